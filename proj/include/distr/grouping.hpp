#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "distr/matrix.hpp"

namespace distr {

/// Partition of the d embedding columns into d / group_size groups of equal
/// size. Group j holds perm[j*G .. (j+1)*G); its representative is the first
/// of those in permutation order.
class GroupingPlan {
 public:
  GroupingPlan(std::vector<std::uint32_t> perm, std::size_t group_size);

  std::size_t dim() const noexcept { return perm_.size(); }
  std::size_t group_size() const noexcept { return group_size_; }
  std::size_t group_count() const noexcept { return perm_.size() / group_size_; }

  std::span<const std::uint32_t> permutation() const noexcept { return perm_; }

  /// Members of group j in ascending column index order.
  std::span<const std::uint32_t> group(std::size_t j) const noexcept {
    return {members_.data() + j * group_size_, group_size_};
  }

  std::span<const std::uint32_t> representatives() const noexcept { return reps_; }

 private:
  std::vector<std::uint32_t> perm_;
  std::size_t group_size_;
  std::vector<std::uint32_t> members_;
  std::vector<std::uint32_t> reps_;
};

/// Validates `perm` against d and G* and builds the plan.
GroupingPlan make_plan(std::vector<std::uint32_t> perm, std::size_t group_size, std::size_t d);

/// l x (d/G) matrix of representative columns, in group order.
Matrix sample_q(const Matrix& q_block, const GroupingPlan& plan);

/// (d/G) x m matrix; row j is the sum of K^T rows in group j, ascending index.
Matrix fuse_kt(const Matrix& kt_block, const GroupingPlan& plan);

/// sample_q(q_block) * fuse_kt(kt_block).
Matrix approx_scores(const Matrix& q_block, const Matrix& kt_block, const GroupingPlan& plan);

/// Sum over groups and members of |(q_rep - q_i) k_i^T|_1: the grouping
/// objective evaluated for a given plan. Computed in 64-bit.
double grouping_residual(const Matrix& q_block, const Matrix& kt_block, const GroupingPlan& plan);

}  // namespace distr
