#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "distr/errors.hpp"

namespace distr {

/// Per-SM resources that bound the choice of (l, m). Field names follow the
/// JSON descriptor format: M_s, N_T, W_b, w, N', candidate_tiles, score_budget.
struct HardwareDescriptor {
  std::uint64_t shared_mem_bytes = 102400;  ///< M_s
  std::uint32_t tensor_cores = 4;           ///< N_T
  std::uint32_t warps_per_block = 4;        ///< W_b
  std::uint32_t element_bytes = 2;          ///< w
  std::uint32_t tile_unit = 16;             ///< N'
  std::vector<std::uint32_t> candidate_tiles = {16, 32, 64, 128, 256};
  std::uint64_t score_budget = 16384;       ///< max l*m per threadblock

  /// Powers of two from tile_unit to 256.
  static std::vector<std::uint32_t> power_of_two_tiles(std::uint32_t tile_unit);

  /// Throws PreconditionError if a field is non-positive or a candidate tile
  /// is not a positive multiple of the tile unit.
  void validate() const;

  bool operator==(const HardwareDescriptor&) const = default;
};

/// Parses a descriptor from JSON text; absent fields keep their defaults.
/// Structural or value errors throw PreconditionError.
HardwareDescriptor parse_descriptor(const std::string& json_text);
HardwareDescriptor load_descriptor(const std::filesystem::path& path);
std::string descriptor_to_json(const HardwareDescriptor& hw);

struct BlockSpec {
  std::uint32_t l;
  std::uint32_t m;
  bool operator==(const BlockSpec&) const = default;
};

/// Block-level I/O count (N/l)(2ld + 2Nd), with ceil(N/l) Q blocks when l
/// does not divide N.
std::uint64_t io_cost(std::uint64_t l, std::uint64_t n, std::uint64_t d);

struct Occupancy {
  std::uint64_t block_bytes = 0;
  std::uint64_t blocks_per_sm = 0;
  std::uint64_t warps_per_sm = 0;
  bool fits_shared_memory = false;
  bool meets_warp_target = false;
  bool within_score_budget = false;
  bool feasible = false;
};

Occupancy occupancy(std::uint64_t l, std::uint64_t m, std::uint64_t d, const HardwareDescriptor& hw);

/// No candidate pair survives; `constraint()` names the filter that removed
/// the last survivors ("shared_memory", "occupancy", "score_budget").
class InfeasibleError : public PreconditionError {
 public:
  InfeasibleError(std::string constraint, const std::string& what)
      : PreconditionError(what), constraint_(std::move(constraint)) {}
  const std::string& constraint() const noexcept { return constraint_; }

 private:
  std::string constraint_;
};

/// Largest feasible l, then largest feasible m.
BlockSpec select_block_sizes(std::uint64_t d, const HardwareDescriptor& hw);

/// Non-throwing variant.
std::optional<BlockSpec> try_select_block_sizes(std::uint64_t d, const HardwareDescriptor& hw);

struct FeasibilityRow {
  std::uint32_t l;
  std::uint32_t m;
  Occupancy occ;
  std::uint64_t io;
};

/// Every candidate pair, l-major, with its occupancy and I/O cost for a
/// sequence of length n.
std::vector<FeasibilityRow> feasibility_table(std::uint64_t d, std::uint64_t n,
                                              const HardwareDescriptor& hw);
std::string feasibility_csv(const std::vector<FeasibilityRow>& rows);

struct CalibrationTarget {
  std::uint64_t d;
  BlockSpec expected;
};

struct CalibrationGrid {
  std::vector<std::uint64_t> shared_mem_bytes;
  std::vector<std::uint32_t> tensor_cores;
  std::vector<std::uint32_t> warps_per_block;
  std::vector<std::uint32_t> element_bytes;
  std::vector<std::uint64_t> score_budget;

  /// A bounded grid around commodity-GPU values that contains the default
  /// descriptor.
  static CalibrationGrid defaults();
  std::size_t size() const;
};

struct TargetMatch {
  CalibrationTarget target;
  std::optional<BlockSpec> selected;
  bool matched = false;
};

struct CalibrationReport {
  HardwareDescriptor best;
  std::size_t matches = 0;
  std::vector<TargetMatch> per_target;
  std::size_t descriptors_searched = 0;
};

/// Exhaustive search over `grid` (other fields taken from `base`) for the
/// descriptor matching the most targets. Ties keep the earliest grid point,
/// except that `base` itself wins any tie it is part of.
CalibrationReport calibrate(const std::vector<CalibrationTarget>& targets,
                            const CalibrationGrid& grid,
                            const HardwareDescriptor& base = HardwareDescriptor{});

/// The published (d, l, m) selections for d = 32, 64, 128.
std::vector<CalibrationTarget> reference_targets();

}  // namespace distr
