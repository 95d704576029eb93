#pragma once

#include <cstdint>
#include <vector>

#include "psr/autograd.hpp"

namespace psr {

/// Entry n (0-based) is 1 iff rank <= n + 1. Throws DataError unless 1 <= rank <= N.
std::vector<std::uint8_t> encode_partition_gt(int rank, int num_ranks);

struct FocalParams {
  double alpha = 0.25;  // weight of positives; negatives get 1 - alpha. alpha < 0 disables weighting.
  double gamma = 2.0;
};

inline constexpr double kFocalEps = 1e-7;

/// Mean over all entries of -a_t (1 - p_t)^gamma log p_t, with p clamped to
/// [eps, 1 - eps]. `target` holds 0/1 values of the same shape as `pred`.
Var focal_loss(const Var& pred, const Tensor& target, const FocalParams& params = {});

/// Mean over masks of 1 - (2 sum(p t) + 1) / (sum(p^2) + sum(t^2) + 1).
/// `pred` is H x W or R x H x W; `target` has the same shape.
Var dice_loss(const Var& pred, const Tensor& target);

struct LossWeights {
  double partition = 1.0;
  double mask = 3.0;

  void validate() const;
};

/// How the per-head focal sum is normalized.
enum class PartitionNorm {
  kCells,      // mean over cells (sum over heads of per-head means)
  kPositives,  // divided by max(1, number of positive cells)
};

struct LossInputs {
  Var partition;          // K x N probabilities
  Var masks;              // R x H x W soft masks of the positive cells; undefined when R = 0
  Tensor partition_gt;    // K x N, 0/1
  Tensor mask_gt;         // R x H x W, 0/1
};

struct LossTerms {
  Var total;
  double partition = 0.0;  // unweighted
  double mask = 0.0;       // unweighted; 0 without positive cells
};

/// lambda_p * sum_n focal(column n) + lambda_m * dice(positive masks).
LossTerms total_loss(const LossInputs& in, const LossWeights& weights, const FocalParams& focal = {},
                     PartitionNorm norm = PartitionNorm::kCells);

}  // namespace psr
