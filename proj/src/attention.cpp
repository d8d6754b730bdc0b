#include "distr/attention.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "distr/errors.hpp"
#include "distr/grouping.hpp"
#include "distr/parallel.hpp"

namespace distr {

namespace {

constexpr float kNegInf = -std::numeric_limits<float>::infinity();

using Clock = std::chrono::steady_clock;

class PhaseTimer {
 public:
  explicit PhaseTimer(double& slot) : slot_(slot), start_(Clock::now()) {}
  ~PhaseTimer() {
    slot_ += std::chrono::duration<double, std::micro>(Clock::now() - start_).count();
  }
  PhaseTimer(const PhaseTimer&) = delete;
  PhaseTimer& operator=(const PhaseTimer&) = delete;

 private:
  double& slot_;
  Clock::time_point start_;
};

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

void check_shapes(const Matrix& q, const Matrix& k, const Matrix& v) {
  if (q.rows() != k.rows() || q.rows() != v.rows() || q.cols() != k.cols() ||
      q.cols() != v.cols()) {
    throw ShapeError("attention: q, k, v must share N and d (got " + std::to_string(q.rows()) +
                     "x" + std::to_string(q.cols()) + ", " + std::to_string(k.rows()) + "x" +
                     std::to_string(k.cols()) + ", " + std::to_string(v.rows()) + "x" +
                     std::to_string(v.cols()) + ")");
  }
}

// Scales a rows x cols score block in place and masks keys that lie after the
// query when causal. q0/k0 are the global indices of the block's first row/col.
void scale_and_mask(std::span<float> s, std::size_t rows, std::size_t cols, float scale,
                    bool causal, std::size_t q0, std::size_t k0) {
  for (float& x : s) x *= scale;
  if (!causal) return;
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t query = q0 + r;
    for (std::size_t c = 0; c < cols; ++c) {
      if (k0 + c > query) s[r * cols + c] = kNegInf;
    }
  }
}

void update_rows(SoftmaxState& state, std::span<const float> s, std::size_t cols,
                 std::span<const float> v, std::size_t d) {
  const std::size_t rows = state.running_max.size();
  for (std::size_t r = 0; r < rows; ++r) {
    const float* srow = s.data() + r * cols;
    float block_max = kNegInf;
    for (std::size_t c = 0; c < cols; ++c) block_max = std::max(block_max, srow[c]);
    const float old_max = state.running_max[r];
    const float new_max = std::max(old_max, block_max);
    if (new_max == kNegInf) continue;

    auto acc = state.accum_out.row(r);
    const float correction = std::exp(old_max - new_max);
    if (correction != 1.0f) {
      for (float& x : acc) x *= correction;
    }
    float block_sum = 0.0f;
    for (std::size_t c = 0; c < cols; ++c) {
      const float p = std::exp(srow[c] - new_max);
      if (p == 0.0f) continue;
      block_sum += p;
      const float* vrow = v.data() + c * d;
      for (std::size_t j = 0; j < d; ++j) acc[j] += p * vrow[j];
    }
    state.running_sum[r] = correction * state.running_sum[r] + block_sum;
    state.running_max[r] = new_max;
  }
}

// Read-only per-head data shared by all Q-block work items.
struct PreparedHead {
  const Matrix* q;
  const Matrix* k;
  const Matrix* v;
  std::size_t n;
  std::size_t d;
  std::vector<Matrix> kt_blocks;  // d x m_actual each
};

PreparedHead prepare_head(const Matrix& q, const Matrix& k, const Matrix& v,
                          const AttentionConfig& cfg) {
  check_shapes(q, k, v);
  PreparedHead head{&q, &k, &v, q.rows(), q.cols(), {}};
  const std::size_t blocks = ceil_div(head.n, cfg.m);
  head.kt_blocks.reserve(blocks);
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::size_t k0 = b * cfg.m;
    const std::size_t cols = std::min(cfg.m, head.n - k0);
    head.kt_blocks.push_back(transpose(k.slice_rows(k0, cols)));
  }
  return head;
}

void run_q_block(const PreparedHead& head, const AttentionConfig& cfg, const LshContext* lsh,
                 std::size_t q_index, Matrix& out, AttentionStats& stats) {
  const std::size_t d = head.d;
  const std::size_t q0 = q_index * cfg.l;
  const std::size_t rows = std::min(cfg.l, head.n - q0);
  const float scale = cfg.resolved_scale(d);

  Matrix lhs = head.q->slice_rows(q0, rows);
  std::optional<GroupingPlan> plan;
  if (lsh != nullptr) {
    std::vector<std::uint32_t> hashes;
    {
      PhaseTimer t(stats.phases.hash_us);
      hashes = hash_block(lhs, lsh->projection, lsh->table, &stats.ops.hash_mults);
    }
    PhaseTimer t(stats.phases.plan_us);
    plan.emplace(make_plan(sort_permutation(hashes), cfg.group_size, d));
    lhs = sample_q(lhs, *plan);
  }
  const std::size_t inner = lhs.cols();

  SoftmaxState state(rows, d);
  const std::size_t last_query = q0 + rows - 1;
  for (std::size_t kb = 0; kb < head.kt_blocks.size(); ++kb) {
    const std::size_t k0 = kb * cfg.m;
    if (cfg.causal && k0 > last_query) break;
    const Matrix* kt = &head.kt_blocks[kb];
    const std::size_t cols = kt->cols();

    std::optional<Matrix> fused;
    if (plan) {
      PhaseTimer t(stats.phases.fuse_us);
      fused.emplace(fuse_kt(*kt, *plan));
      kt = &*fused;
      stats.ops.fusion_adds += plan->group_count() * (plan->group_size() - 1) * cols;
    }

    Matrix s(rows, cols);
    {
      PhaseTimer t(stats.phases.score_us);
      gemm_accumulate(lhs.data(), kt->data(), s.data(), rows, inner, cols);
      scale_and_mask(s.data(), rows, cols, scale, cfg.causal, q0, k0);
      stats.ops.score_mults += rows * cols * inner;
    }
    PhaseTimer t(stats.phases.softmax_us);
    const auto v_rows = head.v->data().subspan(k0 * d, cols * d);
    update_rows(state, s.data(), cols, v_rows, d);
  }

  PhaseTimer t(stats.phases.softmax_us);
  const Matrix o = state.finalize();
  std::copy(o.data().begin(), o.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(q0 * d));
}

Matrix run_blocked(const Matrix& q, const Matrix& k, const Matrix& v, const AttentionConfig& cfg,
                   const LshContext* lsh, AttentionStats* stats) {
  const auto head = prepare_head(q, k, v, cfg);
  cfg.validate(head.d);
  Matrix out(head.n, head.d);
  AttentionStats local;
  const std::size_t q_blocks = ceil_div(head.n, cfg.l);
  for (std::size_t b = 0; b < q_blocks; ++b) run_q_block(head, cfg, lsh, b, out, local);
  if (stats != nullptr) {
    stats->ops += local.ops;
    stats->phases += local.phases;
  }
  return out;
}

}  // namespace

std::string_view to_string(Backend b) noexcept {
  switch (b) {
    case Backend::naive:
      return "naive";
    case Backend::blocked_exact:
      return "blocked-exact";
    case Backend::distr:
      return "distr";
  }
  return "unknown";
}

Backend parse_backend(std::string_view name) {
  if (name == "naive") return Backend::naive;
  if (name == "blocked-exact") return Backend::blocked_exact;
  if (name == "distr") return Backend::distr;
  throw PreconditionError("unknown backend '" + std::string(name) + "'");
}

float AttentionConfig::resolved_scale(std::size_t d) const {
  return scale.value_or(1.0f / std::sqrt(static_cast<float>(d)));
}

void AttentionConfig::validate(std::size_t d) const {
  if (l < 1 || m < 1) throw PreconditionError("block sizes l and m must be >= 1");
  if (const float s = resolved_scale(d); !(s > 0.0f) || !std::isfinite(s)) {
    throw PreconditionError("scale must be positive and finite");
  }
  if (backend == Backend::distr) {
    if (group_size < 1) throw PreconditionError("G* must be >= 1");
    if (d % group_size != 0) {
      throw PreconditionError("d=" + std::to_string(d) + " is not divisible by G*=" +
                              std::to_string(group_size));
    }
    if (hash_width < 1 || hash_width > kMaxHashWidth) {
      throw PreconditionError("hash width must be in [1, " + std::to_string(kMaxHashWidth) + "]");
    }
  }
}

SoftmaxState::SoftmaxState(std::size_t rows, std::size_t d)
    : running_max(rows, kNegInf), running_sum(rows, 0.0f), accum_out(rows, d) {}

Matrix SoftmaxState::finalize() const {
  Matrix out = accum_out;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    if (!(running_sum[r] > 0.0f)) {
      throw PreconditionError("softmax state row " + std::to_string(r) + " saw no unmasked key");
    }
    const float inv = 1.0f / running_sum[r];
    for (float& x : out.row(r)) x *= inv;
  }
  return out;
}

void online_update(SoftmaxState& state, const Matrix& s_block, const Matrix& v_block) {
  if (s_block.rows() != state.running_max.size() || s_block.cols() != v_block.rows() ||
      v_block.cols() != state.accum_out.cols()) {
    throw ShapeError("online_update: inconsistent block shapes");
  }
  update_rows(state, s_block.data(), s_block.cols(), v_block.data(), v_block.cols());
}

OpCounters& OpCounters::operator+=(const OpCounters& o) noexcept {
  score_mults += o.score_mults;
  fusion_adds += o.fusion_adds;
  hash_mults += o.hash_mults;
  return *this;
}

PhaseTimings& PhaseTimings::operator+=(const PhaseTimings& o) noexcept {
  hash_us += o.hash_us;
  plan_us += o.plan_us;
  fuse_us += o.fuse_us;
  score_us += o.score_us;
  softmax_us += o.softmax_us;
  return *this;
}

PhaseTimings& PhaseTimings::operator/=(double divisor) noexcept {
  hash_us /= divisor;
  plan_us /= divisor;
  fuse_us /= divisor;
  score_us /= divisor;
  softmax_us /= divisor;
  return *this;
}

LshContext LshContext::make(const AttentionConfig& cfg) {
  return LshContext{build_projection(cfg.seed, cfg.hash_width, cfg.l), GrayTable(cfg.hash_width)};
}

Matrix attention_naive(const Matrix& q, const Matrix& k, const Matrix& v,
                       const AttentionConfig& cfg, AttentionStats* stats) {
  check_shapes(q, k, v);
  const std::size_t n = q.rows();
  const std::size_t d = q.cols();
  cfg.validate(d);
  AttentionStats local;
  Matrix s(n, n);
  {
    PhaseTimer t(local.phases.score_us);
    s = matmul(q, transpose(k));
    scale_and_mask(s.data(), n, n, cfg.resolved_scale(d), cfg.causal, 0, 0);
    local.ops.score_mults += n * n * d;
  }
  Matrix o(n, d);
  {
    PhaseTimer t(local.phases.softmax_us);
    o = matmul(softmax_rows(s), v);
  }
  if (stats != nullptr) {
    stats->ops += local.ops;
    stats->phases += local.phases;
  }
  return o;
}

Matrix attention_blocked_exact(const Matrix& q, const Matrix& k, const Matrix& v,
                               const AttentionConfig& cfg, AttentionStats* stats) {
  return run_blocked(q, k, v, cfg, nullptr, stats);
}

Matrix attention_distr(const Matrix& q, const Matrix& k, const Matrix& v,
                       const AttentionConfig& cfg, const LshContext& lsh, AttentionStats* stats) {
  AttentionConfig distr_cfg = cfg;
  distr_cfg.backend = Backend::distr;
  distr_cfg.validate(q.cols());
  if (lsh.projection.block_height < cfg.l) {
    throw PreconditionError("projection height is smaller than the Q-block height l");
  }
  return run_blocked(q, k, v, distr_cfg, &lsh, stats);
}

Matrix attention(const Matrix& q, const Matrix& k, const Matrix& v, const AttentionConfig& cfg,
                 AttentionStats* stats) {
  switch (cfg.backend) {
    case Backend::naive:
      return attention_naive(q, k, v, cfg, stats);
    case Backend::blocked_exact:
      return attention_blocked_exact(q, k, v, cfg, stats);
    case Backend::distr: {
      cfg.validate(q.cols());
      const auto lsh = LshContext::make(cfg);
      return attention_distr(q, k, v, cfg, lsh, stats);
    }
  }
  throw PreconditionError("unknown backend");
}

OpCountSummary op_counts(const AttentionConfig& cfg, std::size_t n, std::size_t d) {
  if (cfg.l < 1 || cfg.m < 1 || cfg.group_size < 1) {
    throw PreconditionError("op_counts: l, m and G* must be >= 1");
  }
  if (d % cfg.group_size != 0) throw PreconditionError("op_counts: d not divisible by G*");
  const std::size_t reduced = d / cfg.group_size;
  OpCountSummary out;
  for (std::size_t q0 = 0; q0 < n; q0 += cfg.l) {
    const std::size_t rows = std::min(cfg.l, n - q0);
    out.hash_mults += cfg.hash_width * rows * d;
    for (std::size_t k0 = 0; k0 < n; k0 += cfg.m) {
      const std::size_t cols = std::min(cfg.m, n - k0);
      out.score_mults_exact += rows * cols * d;
      out.score_mults_distr += rows * cols * reduced;
      out.fusion_adds += reduced * (cfg.group_size - 1) * cols;
    }
  }
  return out;
}

BatchResult run_batch(std::span<const HeadInput> batch, const AttentionConfig& cfg,
                      std::size_t workers) {
  if (batch.empty()) throw PreconditionError("run_batch: empty batch");
  const std::size_t d = batch.front().q.cols();
  for (const auto& h : batch) {
    check_shapes(h.q, h.k, h.v);
    if (h.q.cols() != d) throw ShapeError("run_batch: heads must share d");
  }
  cfg.validate(d);
  workers = std::max<std::size_t>(workers, 1);

  const auto start = Clock::now();
  std::optional<LshContext> lsh;
  if (cfg.backend == Backend::distr) lsh.emplace(LshContext::make(cfg));

  BatchResult result;
  result.outputs.reserve(batch.size());
  for (const auto& h : batch) result.outputs.emplace_back(h.q.rows(), d);

  // Work items: whole heads for naive, (head, Q block) otherwise.
  std::vector<std::pair<std::size_t, std::size_t>> items;
  std::vector<PreparedHead> heads;
  if (cfg.backend == Backend::naive) {
    for (std::size_t h = 0; h < batch.size(); ++h) items.emplace_back(h, 0);
  } else {
    heads.reserve(batch.size());
    for (std::size_t h = 0; h < batch.size(); ++h) {
      heads.push_back(prepare_head(batch[h].q, batch[h].k, batch[h].v, cfg));
      for (std::size_t b = 0; b < ceil_div(heads.back().n, cfg.l); ++b) items.emplace_back(h, b);
    }
  }

  const std::size_t used = std::min(workers, items.size());
  std::vector<AttentionStats> per_worker(used);
  parallel_for(items.size(), used, [&](std::size_t i, std::size_t w) {
    const auto [h, b] = items[i];
    if (cfg.backend == Backend::naive) {
      result.outputs[h] = attention_naive(batch[h].q, batch[h].k, batch[h].v, cfg, &per_worker[w]);
    } else {
      run_q_block(heads[h], cfg, lsh ? &*lsh : nullptr, b, result.outputs[h], per_worker[w]);
    }
  });

  for (const auto& s : per_worker) {
    result.ops += s.ops;
    result.phases += s.phases;
  }
  result.phases /= static_cast<double>(used);
  result.workers = used;
  result.wall_us = std::chrono::duration<double, std::micro>(Clock::now() - start).count();
  return result;
}

}  // namespace distr
