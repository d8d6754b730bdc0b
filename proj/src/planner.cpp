#include "distr/planner.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace distr {

namespace {

using nlohmann::json;

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  if (!v.is_number_integer() && !v.is_number_unsigned()) {
    throw PreconditionError(std::string("descriptor field '") + key + "' must be an integer");
  }
  if (v.get<std::int64_t>() < 0) {
    throw PreconditionError(std::string("descriptor field '") + key + "' must be non-negative");
  }
  out = v.get<T>();
}

}  // namespace

std::vector<std::uint32_t> HardwareDescriptor::power_of_two_tiles(std::uint32_t tile_unit) {
  std::vector<std::uint32_t> tiles;
  for (std::uint32_t t = tile_unit; t > 0 && t <= 256; t *= 2) tiles.push_back(t);
  return tiles;
}

void HardwareDescriptor::validate() const {
  if (shared_mem_bytes == 0) throw PreconditionError("descriptor: M_s must be > 0");
  if (tensor_cores == 0) throw PreconditionError("descriptor: N_T must be > 0");
  if (warps_per_block == 0) throw PreconditionError("descriptor: W_b must be > 0");
  if (element_bytes == 0) throw PreconditionError("descriptor: w must be > 0");
  if (tile_unit == 0) throw PreconditionError("descriptor: N' must be > 0");
  if (candidate_tiles.empty()) throw PreconditionError("descriptor: candidate_tiles is empty");
  for (auto t : candidate_tiles) {
    if (t == 0 || t % tile_unit != 0) {
      throw PreconditionError("descriptor: candidate tile " + std::to_string(t) +
                              " is not a positive multiple of N'=" + std::to_string(tile_unit));
    }
  }
}

HardwareDescriptor parse_descriptor(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw PreconditionError(std::string("descriptor: ") + e.what());
  }
  if (!j.is_object()) throw PreconditionError("descriptor: expected a JSON object");
  HardwareDescriptor hw;
  read_field(j, "M_s", hw.shared_mem_bytes);
  read_field(j, "N_T", hw.tensor_cores);
  read_field(j, "W_b", hw.warps_per_block);
  read_field(j, "w", hw.element_bytes);
  const bool has_tiles = j.contains("candidate_tiles");
  if (j.contains("N'")) {
    read_field(j, "N'", hw.tile_unit);
    if (!has_tiles && hw.tile_unit > 0) {
      hw.candidate_tiles = HardwareDescriptor::power_of_two_tiles(hw.tile_unit);
    }
  }
  if (has_tiles) {
    const auto& tiles = j.at("candidate_tiles");
    if (!tiles.is_array()) throw PreconditionError("descriptor: candidate_tiles must be an array");
    hw.candidate_tiles.clear();
    for (const auto& t : tiles) {
      if (!t.is_number_unsigned() && !(t.is_number_integer() && t.get<std::int64_t>() >= 0)) {
        throw PreconditionError("descriptor: candidate_tiles must hold non-negative integers");
      }
      hw.candidate_tiles.push_back(t.get<std::uint32_t>());
    }
  }
  read_field(j, "score_budget", hw.score_budget);
  hw.validate();
  return hw;
}

HardwareDescriptor load_descriptor(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open descriptor " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_descriptor(buf.str());
}

std::string descriptor_to_json(const HardwareDescriptor& hw) {
  json j;
  j["M_s"] = hw.shared_mem_bytes;
  j["N_T"] = hw.tensor_cores;
  j["W_b"] = hw.warps_per_block;
  j["w"] = hw.element_bytes;
  j["N'"] = hw.tile_unit;
  j["candidate_tiles"] = hw.candidate_tiles;
  j["score_budget"] = hw.score_budget;
  return j.dump(2);
}

std::uint64_t io_cost(std::uint64_t l, std::uint64_t n, std::uint64_t d) {
  if (l == 0) throw PreconditionError("io_cost: l must be > 0");
  const std::uint64_t q_blocks = (n + l - 1) / l;
  return q_blocks * (2 * l * d + 2 * n * d);
}

Occupancy occupancy(std::uint64_t l, std::uint64_t m, std::uint64_t d, const HardwareDescriptor& hw) {
  Occupancy o;
  o.block_bytes = std::uint64_t{hw.element_bytes} * (l * d + 2 * m * d);
  o.blocks_per_sm = o.block_bytes == 0 ? 0 : hw.shared_mem_bytes / o.block_bytes;
  o.warps_per_sm = std::uint64_t{hw.warps_per_block} * o.blocks_per_sm;
  o.fits_shared_memory = o.block_bytes <= hw.shared_mem_bytes;
  o.meets_warp_target = o.warps_per_sm >= 2 * std::uint64_t{hw.tensor_cores};
  o.within_score_budget = l * m <= hw.score_budget;
  o.feasible = o.fits_shared_memory && o.meets_warp_target && o.within_score_budget;
  return o;
}

std::optional<BlockSpec> try_select_block_sizes(std::uint64_t d, const HardwareDescriptor& hw) {
  std::optional<BlockSpec> best;
  for (auto l : hw.candidate_tiles) {
    if (l % hw.tile_unit != 0) continue;
    for (auto m : hw.candidate_tiles) {
      if (m % hw.tile_unit != 0) continue;
      if (!occupancy(l, m, d, hw).feasible) continue;
      if (!best || l > best->l || (l == best->l && m > best->m)) best = BlockSpec{l, m};
    }
  }
  return best;
}

BlockSpec select_block_sizes(std::uint64_t d, const HardwareDescriptor& hw) {
  hw.validate();
  if (d == 0) throw PreconditionError("select_block_sizes: d must be > 0");
  if (auto spec = try_select_block_sizes(d, hw)) return *spec;

  // Apply the filters in order and report the one that removed the last pair.
  bool any_fit = false;
  bool any_warps = false;
  for (auto l : hw.candidate_tiles) {
    for (auto m : hw.candidate_tiles) {
      const auto o = occupancy(l, m, d, hw);
      any_fit = any_fit || o.fits_shared_memory;
      any_warps = any_warps || (o.fits_shared_memory && o.meets_warp_target);
    }
  }
  const std::string where = " for d=" + std::to_string(d);
  if (!any_fit) {
    throw InfeasibleError("shared_memory",
                          "no (l, m) block set fits in M_s=" + std::to_string(hw.shared_mem_bytes) +
                              " bytes" + where);
  }
  if (!any_warps) {
    throw InfeasibleError("occupancy", "no (l, m) reaches W_b*blocks >= 2*N_T=" +
                                           std::to_string(2 * hw.tensor_cores) + where);
  }
  throw InfeasibleError("score_budget", "every occupancy-feasible (l, m) exceeds score_budget=" +
                                            std::to_string(hw.score_budget) + where);
}

std::vector<FeasibilityRow> feasibility_table(std::uint64_t d, std::uint64_t n,
                                              const HardwareDescriptor& hw) {
  std::vector<FeasibilityRow> rows;
  for (auto l : hw.candidate_tiles) {
    for (auto m : hw.candidate_tiles) {
      rows.push_back({l, m, occupancy(l, m, d, hw), io_cost(l, n, d)});
    }
  }
  return rows;
}

std::string feasibility_csv(const std::vector<FeasibilityRow>& rows) {
  std::ostringstream out;
  out << "l,m,block_bytes,blocks_per_sm,warps_per_sm,fits_shared_memory,meets_warp_target,"
         "within_score_budget,feasible,io_cost\n";
  for (const auto& r : rows) {
    out << r.l << ',' << r.m << ',' << r.occ.block_bytes << ',' << r.occ.blocks_per_sm << ','
        << r.occ.warps_per_sm << ',' << r.occ.fits_shared_memory << ','
        << r.occ.meets_warp_target << ',' << r.occ.within_score_budget << ',' << r.occ.feasible
        << ',' << r.io << '\n';
  }
  return out.str();
}

CalibrationGrid CalibrationGrid::defaults() {
  return CalibrationGrid{
      {49152, 65536, 98304, 102400, 131072, 163840, 167936, 196608, 233472},
      {2, 4, 8},
      {2, 4, 8},
      {2, 4},
      {8192, 16384, 32768, 65536},
  };
}

std::size_t CalibrationGrid::size() const {
  return shared_mem_bytes.size() * tensor_cores.size() * warps_per_block.size() *
         element_bytes.size() * score_budget.size();
}

namespace {

std::vector<TargetMatch> evaluate(const std::vector<CalibrationTarget>& targets,
                                  const HardwareDescriptor& hw, std::size_t& matches) {
  std::vector<TargetMatch> out;
  matches = 0;
  for (const auto& t : targets) {
    TargetMatch tm{t, try_select_block_sizes(t.d, hw), false};
    tm.matched = tm.selected && *tm.selected == t.expected;
    matches += tm.matched ? 1 : 0;
    out.push_back(tm);
  }
  return out;
}

}  // namespace

CalibrationReport calibrate(const std::vector<CalibrationTarget>& targets,
                            const CalibrationGrid& grid, const HardwareDescriptor& base) {
  if (targets.empty()) throw PreconditionError("calibrate: no targets");
  if (grid.size() == 0) throw PreconditionError("calibrate: empty search grid");

  CalibrationReport report;
  std::size_t base_matches = 0;
  auto base_report = evaluate(targets, base, base_matches);
  bool have_best = false;
  for (auto ms : grid.shared_mem_bytes)
    for (auto nt : grid.tensor_cores)
      for (auto wb : grid.warps_per_block)
        for (auto w : grid.element_bytes)
          for (auto budget : grid.score_budget) {
            HardwareDescriptor hw = base;
            hw.shared_mem_bytes = ms;
            hw.tensor_cores = nt;
            hw.warps_per_block = wb;
            hw.element_bytes = w;
            hw.score_budget = budget;
            ++report.descriptors_searched;
            std::size_t matches = 0;
            auto per_target = evaluate(targets, hw, matches);
            if (!have_best || matches > report.matches) {
              report.best = hw;
              report.matches = matches;
              report.per_target = std::move(per_target);
              have_best = true;
            }
          }
  if (base_matches >= report.matches) {
    report.best = base;
    report.matches = base_matches;
    report.per_target = std::move(base_report);
  }
  return report;
}

std::vector<CalibrationTarget> reference_targets() {
  return {{32, {256, 64}}, {64, {128, 128}}, {128, {128, 32}}};
}

}  // namespace distr
