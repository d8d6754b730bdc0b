#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "distr/attention.hpp"
#include "distr/eval.hpp"
#include "distr/planner.hpp"

namespace distr::cli {

namespace fs = std::filesystem;

/// Process exit codes.
enum ExitCode : int { kOk = 0, kUsage = 1, kPrecondition = 2, kIo = 3 };

std::string sha256_hex(const fs::path& path);

// gen ----------------------------------------------------------------------

struct GenOptions {
  std::uint64_t seed = 0;
  std::size_t n = 64;
  std::size_t d = 64;
  std::size_t heads = 1;
  fs::path out_dir;
};

struct GeneratedFiles {
  fs::path q;
  fs::path k;
  fs::path v;
};

/// Writes q.dtns, k.dtns, v.dtns (U(0,1) entries, substreams 0/1/2 of seed).
GeneratedFiles cmd_gen(const GenOptions& opt);

// run ----------------------------------------------------------------------

struct RunOptions {
  AttentionConfig attention;
  std::size_t workers = 1;
  fs::path in_dir;  ///< holds q.dtns, k.dtns, v.dtns
  fs::path out;
  fs::path report;
};

/// Runs attention over every head in the input tensors, writes O and a JSON
/// manifest. Returns the manifest text.
std::string cmd_run(const RunOptions& opt);

/// Re-runs the configuration recorded in a manifest, writing O to `out`, and
/// returns true when the output checksum matches the recorded one.
bool cmd_replay(const fs::path& manifest, const fs::path& out);

// plan ---------------------------------------------------------------------

struct PlanOptions {
  std::uint64_t d = 64;
  std::uint64_t n = 1024;  ///< sequence length for the I/O column
  std::optional<fs::path> hw;
  std::optional<fs::path> table;
};

struct PlanResult {
  BlockSpec selection;
  std::string table_csv;
};

/// Throws InfeasibleError when no pair is feasible.
PlanResult cmd_plan(const PlanOptions& opt);

/// Match report of the default calibration grid against the published
/// selections, as human-readable lines.
std::string cmd_calibrate(const std::optional<fs::path>& hw);

// errors -------------------------------------------------------------------

struct ErrorsOptions {
  ErrorStudyConfig study;
  std::optional<fs::path> report;
  std::optional<fs::path> heatmap;
};

ErrorReport cmd_errors(const ErrorsOptions& opt);

// bench --------------------------------------------------------------------

struct BenchOptions {
  std::vector<std::size_t> n_sweep = {1024, 2048};
  std::size_t d = 64;
  std::vector<std::size_t> gstar_sweep = {2};
  std::size_t repeats = 3;
  std::size_t l = 64;
  std::size_t m = 64;
  std::size_t workers = 1;
  std::uint64_t seed = 0;
  bool include_exact = true;
  std::optional<fs::path> report;
  std::optional<fs::path> csv;
};

struct BenchRow {
  std::size_t n = 0;
  std::size_t d = 0;
  Backend backend = Backend::blocked_exact;
  std::size_t group_size = 1;
  std::size_t repeats = 0;
  double wall_us = 0;  ///< median over repeats
  PhaseTimings phases;  ///< per-phase medians over repeats
  OpCounters ops;
  double score_op_ratio = 1.0;  ///< exact / this backend's score multiplies

  double lsh_fraction() const noexcept {
    return wall_us > 0 ? (phases.hash_us + phases.plan_us) / wall_us : 0.0;
  }
};

std::vector<BenchRow> cmd_bench(const BenchOptions& opt);
std::string bench_csv(const std::vector<BenchRow>& rows);
std::string bench_json(const BenchOptions& opt, const std::vector<BenchRow>& rows);

}  // namespace distr::cli
