#include "distr/grouping.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "distr/errors.hpp"

namespace distr {

GroupingPlan::GroupingPlan(std::vector<std::uint32_t> perm, std::size_t group_size)
    : perm_(std::move(perm)), group_size_(group_size), members_(perm_) {
  const std::size_t k = group_count();
  reps_.reserve(k);
  for (std::size_t j = 0; j < k; ++j) {
    reps_.push_back(perm_[j * group_size_]);
    const auto first = members_.begin() + static_cast<std::ptrdiff_t>(j * group_size_);
    std::sort(first, first + static_cast<std::ptrdiff_t>(group_size_));
  }
}

GroupingPlan make_plan(std::vector<std::uint32_t> perm, std::size_t group_size, std::size_t d) {
  if (group_size < 1) throw PreconditionError("group size must be >= 1");
  if (d % group_size != 0) {
    throw PreconditionError("d=" + std::to_string(d) + " is not divisible by G*=" +
                            std::to_string(group_size));
  }
  if (perm.size() != d) throw PreconditionError("permutation length differs from d");
  std::vector<bool> seen(d, false);
  for (auto p : perm) {
    if (p >= d || seen[p]) throw PreconditionError("invalid permutation");
    seen[p] = true;
  }
  return GroupingPlan(std::move(perm), group_size);
}

Matrix sample_q(const Matrix& q_block, const GroupingPlan& plan) {
  if (q_block.cols() != plan.dim()) {
    throw ShapeError("sample_q: block has " + std::to_string(q_block.cols()) +
                     " columns, plan covers " + std::to_string(plan.dim()));
  }
  const auto reps = plan.representatives();
  Matrix out(q_block.rows(), reps.size());
  for (std::size_t r = 0; r < q_block.rows(); ++r) {
    const auto src = q_block.row(r);
    auto dst = out.row(r);
    for (std::size_t j = 0; j < reps.size(); ++j) dst[j] = src[reps[j]];
  }
  return out;
}

Matrix fuse_kt(const Matrix& kt_block, const GroupingPlan& plan) {
  if (kt_block.rows() != plan.dim()) {
    throw ShapeError("fuse_kt: block has " + std::to_string(kt_block.rows()) +
                     " rows, plan covers " + std::to_string(plan.dim()));
  }
  Matrix out(plan.group_count(), kt_block.cols());
  for (std::size_t j = 0; j < plan.group_count(); ++j) {
    auto dst = out.row(j);
    for (auto member : plan.group(j)) {
      const auto src = kt_block.row(member);
      for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
    }
  }
  return out;
}

Matrix approx_scores(const Matrix& q_block, const Matrix& kt_block, const GroupingPlan& plan) {
  return matmul(sample_q(q_block, plan), fuse_kt(kt_block, plan));
}

double grouping_residual(const Matrix& q_block, const Matrix& kt_block, const GroupingPlan& plan) {
  if (q_block.cols() != plan.dim() || kt_block.rows() != plan.dim()) {
    throw ShapeError("grouping_residual: shapes do not match plan");
  }
  double total = 0.0;
  for (std::size_t j = 0; j < plan.group_count(); ++j) {
    const auto rep = plan.representatives()[j];
    for (auto i : plan.group(j)) {
      for (std::size_t r = 0; r < q_block.rows(); ++r) {
        const double dq = static_cast<double>(q_block(r, rep)) - q_block(r, i);
        for (std::size_t c = 0; c < kt_block.cols(); ++c) {
          total += std::abs(dq * kt_block(i, c));
        }
      }
    }
  }
  return total;
}

}  // namespace distr
