#include "distr/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "distr/errors.hpp"
#include "distr/grouping.hpp"
#include "distr/lsh.hpp"
#include "distr/parallel.hpp"

namespace distr {

namespace {

constexpr double kDenominatorGuard = 1e-12;
constexpr std::uint64_t kProjectionStream = ~std::uint64_t{0};

struct TrialStats {
  double min_pct = std::numeric_limits<double>::infinity();
  double max_pct = 0;
  double sum_pct = 0;
  double signed_sum_pct = 0;
  std::size_t count = 0;
};

}  // namespace

Matrix approximate_score_matrix(const Matrix& q, const Matrix& k, std::size_t l,
                                std::size_t group_size, std::size_t hash_width,
                                std::uint64_t projection_seed) {
  if (q.cols() != k.cols()) throw ShapeError("approximate_score_matrix: q and k differ in d");
  if (l < 1) throw PreconditionError("l must be >= 1");
  const std::size_t d = q.cols();
  const auto proj = build_projection(projection_seed, hash_width, l);
  const GrayTable table(hash_width);
  const Matrix kt = transpose(k);

  Matrix s_hat(q.rows(), k.rows());
  for (std::size_t q0 = 0; q0 < q.rows(); q0 += l) {
    const std::size_t rows = std::min(l, q.rows() - q0);
    const Matrix block = q.slice_rows(q0, rows);
    const auto plan = make_plan(sort_permutation(hash_block(block, proj, table)), group_size, d);
    const Matrix part = approx_scores(block, kt, plan);
    std::copy(part.data().begin(), part.data().end(),
              s_hat.data().begin() + static_cast<std::ptrdiff_t>(q0 * k.rows()));
  }
  return s_hat;
}

ErrorReport score_error_stats(const ErrorStudyConfig& cfg) {
  if (cfg.trials < 1) throw PreconditionError("trials must be >= 1");
  if (cfg.n < 1 || cfg.d < 1 || cfg.l < 1) throw PreconditionError("n, d and l must be >= 1");
  if (cfg.group_size < 1 || cfg.d % cfg.group_size != 0) {
    throw PreconditionError("d=" + std::to_string(cfg.d) + " is not divisible by G*=" +
                            std::to_string(cfg.group_size));
  }
  const std::uint64_t projection_seed = Rng::substream(cfg.seed, kProjectionStream).next_u64();

  ErrorReport report;
  report.config = cfg;
  std::vector<TrialStats> trials(cfg.trials);
  parallel_for(cfg.trials, cfg.workers, [&](std::size_t t, std::size_t) {
    Rng rng = Rng::substream(cfg.seed, t);
    const Matrix q = random_uniform(rng, cfg.n, cfg.d);
    const Matrix k = random_uniform(rng, cfg.n, cfg.d);
    const Matrix s = matmul(q, transpose(k));
    const Matrix s_hat =
        approximate_score_matrix(q, k, cfg.l, cfg.group_size, cfg.hash_width, projection_seed);

    TrialStats& st = trials[t];
    const auto exact = s.data();
    const auto approx = s_hat.data();
    for (std::size_t i = 0; i < exact.size(); ++i) {
      const double denom = std::max(std::abs(static_cast<double>(exact[i])), kDenominatorGuard);
      const double signed_pct = 100.0 * (static_cast<double>(exact[i]) - approx[i]) / denom;
      const double pct = std::abs(signed_pct);
      st.min_pct = std::min(st.min_pct, pct);
      st.max_pct = std::max(st.max_pct, pct);
      st.sum_pct += pct;
      st.signed_sum_pct += signed_pct;
    }
    st.count = exact.size();
    if (t == 0 && cfg.keep_heatmap) {
      Matrix heat(s.rows(), s.cols());
      for (std::size_t i = 0; i < exact.size(); ++i) heat.data()[i] = std::abs(exact[i] - approx[i]);
      report.heatmap = std::move(heat);
    }
  });

  double total = 0;
  std::size_t count = 0;
  report.min_pct = std::numeric_limits<double>::infinity();
  report.trial_bias_min_pct = std::numeric_limits<double>::infinity();
  for (const auto& st : trials) {
    report.min_pct = std::min(report.min_pct, st.min_pct);
    report.max_pct = std::max(report.max_pct, st.max_pct);
    total += st.sum_pct;
    count += st.count;
    report.per_trial_means.push_back(st.sum_pct / static_cast<double>(st.count));

    const double bias = std::abs(st.signed_sum_pct / static_cast<double>(st.count));
    report.trial_bias_min_pct = std::min(report.trial_bias_min_pct, bias);
    report.trial_bias_max_pct = std::max(report.trial_bias_max_pct, bias);
    report.trial_bias_mean_pct += bias;
  }
  report.mean_pct = total / static_cast<double>(count);
  report.trial_bias_mean_pct /= static_cast<double>(trials.size());
  return report;
}

OutputError output_error(const Matrix& exact, const Matrix& approx) {
  if (exact.rows() != approx.rows() || exact.cols() != approx.cols()) {
    throw ShapeError("output_error: shapes differ");
  }
  OutputError out;
  double diff_sq = 0;
  double ref_sq = 0;
  double sum_pct = 0;
  const auto e = exact.data();
  const auto a = approx.data();
  for (std::size_t i = 0; i < e.size(); ++i) {
    const double diff = static_cast<double>(e[i]) - a[i];
    const double pct =
        100.0 * std::abs(diff) / std::max(std::abs(static_cast<double>(e[i])), kDenominatorGuard);
    sum_pct += pct;
    out.max_abs_rel_pct = std::max(out.max_abs_rel_pct, pct);
    diff_sq += diff * diff;
    ref_sq += static_cast<double>(e[i]) * e[i];
  }
  out.mean_abs_rel_pct = sum_pct / static_cast<double>(e.size());
  out.frobenius_rel = ref_sq > 0 ? std::sqrt(diff_sq / ref_sq) : std::sqrt(diff_sq);
  return out;
}

std::string heatmap_csv(const Matrix& m) {
  std::string out;
  char buf[32];
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (c > 0) out += ',';
      const auto res = std::to_chars(buf, buf + sizeof(buf), m(r, c));
      out.append(buf, res.ptr);
    }
    out += '\n';
  }
  return out;
}

void emit_heatmap(const Matrix& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << heatmap_csv(m);
  if (!out) throw IoError("write failed: " + path.string());
}

Matrix parse_heatmap_csv(const std::string& text) {
  std::vector<float> values;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    std::size_t row_cols = 0;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    while (p <= end) {
      const char* comma = std::find(p, end, ',');
      float v = 0;
      const auto res = std::from_chars(p, comma, v);
      if (res.ec != std::errc{} || res.ptr != comma) throw IoError("heatmap: bad number");
      values.push_back(v);
      ++row_cols;
      p = comma + 1;
    }
    if (rows == 0) cols = row_cols;
    if (row_cols != cols) throw IoError("heatmap: ragged rows");
    ++rows;
  }
  if (rows == 0) throw IoError("heatmap: empty");
  return Matrix(rows, cols, std::move(values));
}

std::string error_report_json(const ErrorReport& r) {
  nlohmann::json j;
  j["N"] = r.config.n;
  j["d"] = r.config.d;
  j["l"] = r.config.l;
  j["G*"] = r.config.group_size;
  j["trials"] = r.config.trials;
  j["seed"] = r.config.seed;
  j["hash_width"] = r.config.hash_width;
  j["min_pct"] = r.min_pct;
  j["max_pct"] = r.max_pct;
  j["mean_pct"] = r.mean_pct;
  j["per_trial_means"] = r.per_trial_means;
  j["trial_bias_min_pct"] = r.trial_bias_min_pct;
  j["trial_bias_max_pct"] = r.trial_bias_max_pct;
  j["trial_bias_mean_pct"] = r.trial_bias_mean_pct;
  if (r.heatmap) {
    auto rows = nlohmann::json::array();
    for (std::size_t i = 0; i < r.heatmap->rows(); ++i) {
      const auto row = r.heatmap->row(i);
      rows.push_back(std::vector<float>(row.begin(), row.end()));
    }
    j["heatmap"] = std::move(rows);
  } else {
    j["heatmap"] = nullptr;
  }
  return j.dump(2);
}

}  // namespace distr
