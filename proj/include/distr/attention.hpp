#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "distr/lsh.hpp"
#include "distr/matrix.hpp"

namespace distr {

enum class Backend { naive, blocked_exact, distr };

std::string_view to_string(Backend b) noexcept;
/// Accepts "naive", "blocked-exact" and "distr".
Backend parse_backend(std::string_view name);

struct AttentionConfig {
  std::size_t l = 64;  ///< Q-block rows
  std::size_t m = 64;  ///< K/V-block rows
  std::size_t group_size = 2;
  std::size_t hash_width = kDefaultHashWidth;
  /// Score multiplier; 1/sqrt(d) of the unreduced d when unset.
  std::optional<float> scale;
  bool causal = false;
  Backend backend = Backend::blocked_exact;
  std::uint64_t seed = 0;

  float resolved_scale(std::size_t d) const;
  /// Throws PreconditionError on invalid block sizes, scale or divisibility.
  void validate(std::size_t d) const;
};

/// Running row statistics of the streaming softmax for one Q block.
struct SoftmaxState {
  SoftmaxState(std::size_t rows, std::size_t d);

  std::vector<float> running_max;  ///< starts at -inf
  std::vector<float> running_sum;  ///< starts at 0
  Matrix accum_out;                ///< rows x d, starts at 0

  /// accum_out / running_sum row by row.
  Matrix finalize() const;
};

/// Folds one score block (rows x m) and its V block (m x d) into the state.
/// -inf scores contribute nothing; a fully masked row is left untouched.
void online_update(SoftmaxState& state, const Matrix& s_block, const Matrix& v_block);

struct OpCounters {
  std::uint64_t score_mults = 0;
  std::uint64_t fusion_adds = 0;
  std::uint64_t hash_mults = 0;

  OpCounters& operator+=(const OpCounters& o) noexcept;
  bool operator==(const OpCounters&) const = default;
};

/// Wall-clock microseconds per pipeline phase.
struct PhaseTimings {
  double hash_us = 0;
  double plan_us = 0;  ///< sort, plan construction and Q sampling
  double fuse_us = 0;
  double score_us = 0;
  double softmax_us = 0;

  double total_us() const noexcept { return hash_us + plan_us + fuse_us + score_us + softmax_us; }
  PhaseTimings& operator+=(const PhaseTimings& o) noexcept;
  PhaseTimings& operator/=(double divisor) noexcept;
};

struct AttentionStats {
  OpCounters ops;
  PhaseTimings phases;
};

/// Projection and Gray table shared by every block of a distr run.
struct LshContext {
  Projection projection;
  GrayTable table;

  static LshContext make(const AttentionConfig& cfg);
};

/// Reference: materializes S and P.
Matrix attention_naive(const Matrix& q, const Matrix& k, const Matrix& v,
                       const AttentionConfig& cfg, AttentionStats* stats = nullptr);

/// Double loop over Q blocks and K/V blocks with a streaming softmax.
Matrix attention_blocked_exact(const Matrix& q, const Matrix& k, const Matrix& v,
                               const AttentionConfig& cfg, AttentionStats* stats = nullptr);

/// Blocked attention whose score blocks come from per-Q-block LSH grouping:
/// sampled Q columns times fused K^T rows. V is never reduced.
Matrix attention_distr(const Matrix& q, const Matrix& k, const Matrix& v,
                       const AttentionConfig& cfg, const LshContext& lsh,
                       AttentionStats* stats = nullptr);

/// Dispatches on cfg.backend, building the LSH context when needed.
Matrix attention(const Matrix& q, const Matrix& k, const Matrix& v, const AttentionConfig& cfg,
                 AttentionStats* stats = nullptr);

struct OpCountSummary {
  std::uint64_t score_mults_exact = 0;
  std::uint64_t score_mults_distr = 0;
  std::uint64_t fusion_adds = 0;
  std::uint64_t hash_mults = 0;
};

/// Multiply/add counts of an unmasked run, accumulated block by block so
/// ragged tails are counted with their true sizes.
OpCountSummary op_counts(const AttentionConfig& cfg, std::size_t n, std::size_t d);

// ---------------------------------------------------------------------------
// Batched execution

struct HeadInput {
  Matrix q;
  Matrix k;
  Matrix v;
};

struct BatchResult {
  std::vector<Matrix> outputs;
  OpCounters ops;
  /// Busy time per phase summed over workers and divided by the worker count.
  PhaseTimings phases;
  double wall_us = 0;
  std::size_t workers = 1;
};

/// Runs every head in `batch` (flattened batch x head order). Work items are
/// (head, Q block) pairs; outputs are bitwise independent of `workers`.
BatchResult run_batch(std::span<const HeadInput> batch, const AttentionConfig& cfg,
                      std::size_t workers);

}  // namespace distr
