#include "distr/commands.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "distr/errors.hpp"
#include "distr/tensor_io.hpp"

namespace distr::cli {

namespace {

using nlohmann::json;

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<HeadInput> load_heads(const fs::path& dir, bool& three_d) {
  const auto q = read_dtns(dir / "q.dtns");
  const auto k = read_dtns(dir / "k.dtns");
  const auto v = read_dtns(dir / "v.dtns");
  if (q.dims != k.dims || q.dims != v.dims) throw ShapeError("q, k, v tensors differ in shape");
  three_d = q.dims.size() == 3;
  auto qs = unstack_matrices(q);
  auto ks = unstack_matrices(k);
  auto vs = unstack_matrices(v);
  std::vector<HeadInput> heads;
  for (std::size_t i = 0; i < qs.size(); ++i) {
    heads.push_back({std::move(qs[i]), std::move(ks[i]), std::move(vs[i])});
  }
  return heads;
}

json config_json(const AttentionConfig& cfg) {
  json j;
  j["backend"] = std::string(to_string(cfg.backend));
  j["l"] = cfg.l;
  j["m"] = cfg.m;
  j["G*"] = cfg.group_size;
  j["hash_width"] = cfg.hash_width;
  j["scale"] = cfg.scale ? json(*cfg.scale) : json(nullptr);
  j["causal"] = cfg.causal;
  j["seed"] = cfg.seed;
  return j;
}

AttentionConfig config_from_json(const json& j) {
  AttentionConfig cfg;
  cfg.backend = parse_backend(j.at("backend").get<std::string>());
  cfg.l = j.at("l").get<std::size_t>();
  cfg.m = j.at("m").get<std::size_t>();
  cfg.group_size = j.at("G*").get<std::size_t>();
  cfg.hash_width = j.at("hash_width").get<std::size_t>();
  if (!j.at("scale").is_null()) cfg.scale = j.at("scale").get<float>();
  cfg.causal = j.at("causal").get<bool>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  return cfg;
}

template <typename T>
T median(std::vector<T> values) {
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  return values.size() % 2 == 1 ? values[mid] : (values[mid - 1] + values[mid]) / 2;
}

}  // namespace

std::string sha256_hex(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw IoError("sha256 failed for " + path.string());
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xF];
  }
  return out;
}

GeneratedFiles cmd_gen(const GenOptions& opt) {
  if (opt.n < 1 || opt.d < 1 || opt.heads < 1) {
    throw PreconditionError("gen: --n, --d and --heads must be positive");
  }
  std::error_code ec;
  fs::create_directories(opt.out_dir, ec);
  if (ec) throw IoError("cannot create " + opt.out_dir.string() + ": " + ec.message());

  GeneratedFiles files{opt.out_dir / "q.dtns", opt.out_dir / "k.dtns", opt.out_dir / "v.dtns"};
  const std::array<const fs::path*, 3> paths{&files.q, &files.k, &files.v};
  for (std::uint64_t which = 0; which < 3; ++which) {
    Rng rng = Rng::substream(opt.seed, which);
    std::vector<Matrix> mats;
    for (std::size_t h = 0; h < opt.heads; ++h) mats.push_back(random_uniform(rng, opt.n, opt.d));
    write_dtns(*paths[which], stack_matrices(mats));
  }
  return files;
}

std::string cmd_run(const RunOptions& opt) {
  bool three_d = false;
  const auto heads = load_heads(opt.in_dir, three_d);
  const auto result = run_batch(heads, opt.attention, opt.workers);

  Tensor out_tensor = stack_matrices(result.outputs);
  if (three_d && out_tensor.dims.size() == 2) out_tensor.dims.insert(out_tensor.dims.begin(), 1);
  write_dtns(opt.out, out_tensor);

  const auto& cfg = opt.attention;
  const auto n = heads.front().q.rows();
  const auto d = heads.front().q.cols();
  json m;
  m["config"] = config_json(cfg);
  m["config"]["N"] = n;
  m["config"]["d"] = d;
  m["config"]["heads"] = heads.size();
  m["backend"] = std::string(to_string(cfg.backend));
  m["workers"] = result.workers;
  m["workers_requested"] = opt.workers;
  m["inputs"] = {{"q", (opt.in_dir / "q.dtns").string()},
                 {"k", (opt.in_dir / "k.dtns").string()},
                 {"v", (opt.in_dir / "v.dtns").string()}};
  m["output"] = opt.out.string();
  m["timings_us"] = {{"hash", result.phases.hash_us},   {"plan", result.phases.plan_us},
                     {"fuse", result.phases.fuse_us},   {"score", result.phases.score_us},
                     {"softmax", result.phases.softmax_us}, {"wall", result.wall_us}};
  m["op_counts"] = {{"score_mults", result.ops.score_mults},
                    {"fusion_adds", result.ops.fusion_adds},
                    {"hash_mults", result.ops.hash_mults}};
  m["checksums"] = {{"q", sha256_hex(opt.in_dir / "q.dtns")},
                    {"k", sha256_hex(opt.in_dir / "k.dtns")},
                    {"v", sha256_hex(opt.in_dir / "v.dtns")},
                    {"output", sha256_hex(opt.out)}};
  const std::string text = m.dump(2);
  if (!opt.report.empty()) write_text(opt.report, text);
  return text;
}

bool cmd_replay(const fs::path& manifest, const fs::path& out) {
  json m;
  try {
    m = json::parse(read_text(manifest));
  } catch (const json::exception& e) {
    throw IoError("manifest " + manifest.string() + ": " + e.what());
  }
  RunOptions opt;
  try {
    opt.attention = config_from_json(m.at("config"));
    opt.workers = m.at("workers").get<std::size_t>();
    opt.in_dir = fs::path(m.at("inputs").at("q").get<std::string>()).parent_path();
    for (const char* key : {"q", "k", "v"}) {
      const fs::path input = m.at("inputs").at(key).get<std::string>();
      if (sha256_hex(input) != m.at("checksums").at(key).get<std::string>()) {
        throw IoError("input " + input.string() + " does not match its recorded checksum");
      }
    }
  } catch (const json::exception& e) {
    throw IoError("manifest " + manifest.string() + ": " + e.what());
  }
  opt.out = out;
  const auto replayed = json::parse(cmd_run(opt));
  return replayed.at("checksums").at("output") == m.at("checksums").at("output");
}

PlanResult cmd_plan(const PlanOptions& opt) {
  const HardwareDescriptor hw = opt.hw ? load_descriptor(*opt.hw) : HardwareDescriptor{};
  hw.validate();
  PlanResult result{{0, 0}, feasibility_csv(feasibility_table(opt.d, opt.n, hw))};
  if (opt.table) write_text(*opt.table, result.table_csv);
  result.selection = select_block_sizes(opt.d, hw);
  return result;
}

std::string cmd_calibrate(const std::optional<fs::path>& hw) {
  const HardwareDescriptor base = hw ? load_descriptor(*hw) : HardwareDescriptor{};
  const auto targets = reference_targets();
  const auto report = calibrate(targets, CalibrationGrid::defaults(), base);
  std::ostringstream out;
  out << "searched " << report.descriptors_searched << " descriptors\n";
  out << "best " << json::parse(descriptor_to_json(report.best)).dump() << "\n";
  out << "matches " << report.matches << "/" << targets.size() << "\n";
  for (const auto& t : report.per_target) {
    out << "d=" << t.target.d << " expected=(" << t.target.expected.l << "," << t.target.expected.m
        << ") selected=";
    if (t.selected) {
      out << "(" << t.selected->l << "," << t.selected->m << ")";
    } else {
      out << "none";
    }
    out << (t.matched ? " match" : " MISMATCH") << "\n";
  }
  return out.str();
}

ErrorReport cmd_errors(const ErrorsOptions& opt) {
  ErrorStudyConfig study = opt.study;
  study.keep_heatmap = study.keep_heatmap || opt.heatmap.has_value();
  auto report = score_error_stats(study);
  if (opt.heatmap) emit_heatmap(*report.heatmap, *opt.heatmap);
  if (opt.report) write_text(*opt.report, error_report_json(report));
  return report;
}

std::vector<BenchRow> cmd_bench(const BenchOptions& opt) {
  if (opt.n_sweep.empty()) throw PreconditionError("bench: --n-sweep is empty");
  if (opt.gstar_sweep.empty()) throw PreconditionError("bench: --gstar-sweep is empty");
  if (opt.repeats < 1) throw PreconditionError("bench: --repeats must be >= 1");

  std::vector<BenchRow> rows;
  for (const auto n : opt.n_sweep) {
    Rng rng = Rng::substream(opt.seed, n);
    std::vector<HeadInput> batch;
    batch.push_back({random_uniform(rng, n, opt.d), random_uniform(rng, n, opt.d),
                     random_uniform(rng, n, opt.d)});

    std::vector<std::pair<Backend, std::size_t>> variants;
    if (opt.include_exact) variants.emplace_back(Backend::blocked_exact, 1);
    for (auto g : opt.gstar_sweep) variants.emplace_back(Backend::distr, g);

    for (const auto& [backend, g] : variants) {
      AttentionConfig cfg;
      cfg.l = opt.l;
      cfg.m = opt.m;
      cfg.backend = backend;
      cfg.group_size = g;
      cfg.seed = opt.seed;

      std::vector<double> wall, hash, plan, fuse, score, softmax;
      BenchRow row;
      for (std::size_t r = 0; r < opt.repeats; ++r) {
        const auto res = run_batch(batch, cfg, opt.workers);
        wall.push_back(res.wall_us);
        hash.push_back(res.phases.hash_us);
        plan.push_back(res.phases.plan_us);
        fuse.push_back(res.phases.fuse_us);
        score.push_back(res.phases.score_us);
        softmax.push_back(res.phases.softmax_us);
        row.ops = res.ops;
      }
      row.n = n;
      row.d = opt.d;
      row.backend = backend;
      row.group_size = g;
      row.repeats = opt.repeats;
      row.wall_us = median(wall);
      row.phases = {median(hash), median(plan), median(fuse), median(score), median(softmax)};
      const auto counts = op_counts(cfg, n, opt.d);
      row.score_op_ratio = static_cast<double>(counts.score_mults_exact) /
                           static_cast<double>(row.ops.score_mults);
      rows.push_back(row);
    }
  }
  if (opt.csv) write_text(*opt.csv, bench_csv(rows));
  if (opt.report) write_text(*opt.report, bench_json(opt, rows));
  return rows;
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::ostringstream out;
  out << "N,d,backend,G*,repeats,wall_us,hash_us,plan_us,fuse_us,score_us,softmax_us,"
         "lsh_fraction,score_mults,score_op_ratio\n";
  for (const auto& r : rows) {
    out << r.n << ',' << r.d << ',' << to_string(r.backend) << ',' << r.group_size << ','
        << r.repeats << ',' << r.wall_us << ',' << r.phases.hash_us << ',' << r.phases.plan_us
        << ',' << r.phases.fuse_us << ',' << r.phases.score_us << ',' << r.phases.softmax_us << ','
        << r.lsh_fraction() << ',' << r.ops.score_mults << ',' << r.score_op_ratio << '\n';
  }
  return out.str();
}

std::string bench_json(const BenchOptions& opt, const std::vector<BenchRow>& rows) {
  json j;
  j["config"] = {{"n_sweep", opt.n_sweep}, {"d", opt.d},       {"gstar_sweep", opt.gstar_sweep},
                 {"repeats", opt.repeats}, {"l", opt.l},       {"m", opt.m},
                 {"workers", opt.workers}, {"seed", opt.seed}};
  j["rows"] = json::array();
  for (const auto& r : rows) {
    j["rows"].push_back({{"N", r.n},
                         {"d", r.d},
                         {"backend", std::string(to_string(r.backend))},
                         {"G*", r.group_size},
                         {"repeats", r.repeats},
                         {"wall_us", r.wall_us},
                         {"hash_us", r.phases.hash_us},
                         {"plan_us", r.phases.plan_us},
                         {"fuse_us", r.phases.fuse_us},
                         {"score_us", r.phases.score_us},
                         {"softmax_us", r.phases.softmax_us},
                         {"lsh_fraction", r.lsh_fraction()},
                         {"score_mults", r.ops.score_mults},
                         {"score_op_ratio", r.score_op_ratio}});
  }
  return j.dump(2);
}

}  // namespace distr::cli
