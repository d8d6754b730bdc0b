#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "distr/matrix.hpp"

namespace distr {

struct ErrorStudyConfig {
  std::size_t n = 64;
  std::size_t d = 64;
  std::size_t l = 2;
  std::size_t group_size = 2;
  std::size_t trials = 100;
  std::uint64_t seed = 0;
  std::size_t hash_width = 16;
  bool keep_heatmap = false;
  std::size_t workers = 1;
};

/// Relative errors of the approximate score matrix against the exact one.
/// min/max/mean_pct pool |s - s_hat| / s over every element of every trial.
struct ErrorReport {
  ErrorStudyConfig config;
  double min_pct = 0;
  double max_pct = 0;
  double mean_pct = 0;
  std::vector<double> per_trial_means;

  /// Per trial: |mean_ij (s - s_hat) / s|, the signed relative error averaged
  /// over the whole matrix before taking the magnitude. Summarized over trials.
  double trial_bias_min_pct = 0;
  double trial_bias_max_pct = 0;
  double trial_bias_mean_pct = 0;

  /// |S - S_hat| of trial 0, when requested.
  std::optional<Matrix> heatmap;
};

/// Draws Q, K ~ U(0,1)^{n x d} per trial from substream (seed, trial), builds
/// S_hat block by block with Q-block height l using the LSH grouping pipeline
/// and unscaled scores, and pools the relative errors.
ErrorReport score_error_stats(const ErrorStudyConfig& cfg);

/// Exact S and block-wise S_hat for one (q, k) pair; `projection_seed` and
/// hash width as in the attention engine. Exposed for testing.
Matrix approximate_score_matrix(const Matrix& q, const Matrix& k, std::size_t l,
                                std::size_t group_size, std::size_t hash_width,
                                std::uint64_t projection_seed);

struct OutputError {
  double mean_abs_rel_pct = 0;
  double max_abs_rel_pct = 0;
  double frobenius_rel = 0;
};

/// Elementwise |exact - approx| / max(|exact|, 1e-12) in percent, plus the
/// Frobenius ratio ||exact - approx|| / ||exact||.
OutputError output_error(const Matrix& exact, const Matrix& approx);

std::string heatmap_csv(const Matrix& m);
void emit_heatmap(const Matrix& m, const std::filesystem::path& path);
Matrix parse_heatmap_csv(const std::string& text);

std::string error_report_json(const ErrorReport& r);

}  // namespace distr
