#include "psr/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "psr/errors.hpp"
#include "psr/ops.hpp"

namespace psr {

std::vector<std::uint8_t> encode_partition_gt(int rank, int num_ranks) {
  if (num_ranks < 1 || rank < 1 || rank > num_ranks) {
    throw DataError("rank " + std::to_string(rank) + " outside [1, " + std::to_string(num_ranks) + "]");
  }
  std::vector<std::uint8_t> v(num_ranks, 0);
  for (int n = rank - 1; n < num_ranks; ++n) v[n] = 1;
  return v;
}

namespace {

// Per-entry focal term and its derivative with respect to p.
struct FocalTerm {
  double value;
  double dvalue;
};

FocalTerm focal_term(double p, bool positive, const FocalParams& fp) {
  const bool clamped = p < kFocalEps || p > 1.0 - kFocalEps;
  p = std::clamp(p, kFocalEps, 1.0 - kFocalEps);
  const double pt = positive ? p : 1.0 - p;
  const double at = fp.alpha < 0 ? 1.0 : (positive ? fp.alpha : 1.0 - fp.alpha);
  const double q = 1.0 - pt;
  const double mod = std::pow(q, fp.gamma);
  const double lp = std::log(pt);
  const double value = -at * mod * lp;
  double d_pt = -at * mod / pt;
  if (fp.gamma != 0.0) d_pt += at * fp.gamma * std::pow(q, fp.gamma - 1.0) * lp;
  return {value, clamped ? 0.0 : (positive ? d_pt : -d_pt)};
}

double focal_sum(const Tensor& pred, const Tensor& target, const FocalParams& fp, std::size_t col, std::size_t cols) {
  double s = 0;
  for (std::size_t i = col; i < pred.size(); i += cols) s += focal_term(pred[i], target[i] > 0.5, fp).value;
  return s;
}

}  // namespace

Var focal_loss(const Var& pred, const Tensor& target, const FocalParams& params) {
  if (pred.shape() != target.shape()) {
    throw DimensionError("focal_loss: prediction " + shape_str(pred.shape()) + " vs target " +
                         shape_str(target.shape()));
  }
  if (pred.size() == 0) throw DimensionError("focal_loss: empty input");
  const double n = static_cast<double>(pred.size());
  const double value = focal_sum(pred.value(), target, params, 0, 1) / n;
  return Var::make(Tensor::scalar(value), "focal_loss", {pred}, [target, params, n](Node& self) {
    const Tensor& p = self.parents[0]->value;
    Tensor& g = self.parents[0]->grad_buffer();
    const double up = self.grad[0] / n;
    for (std::size_t i = 0; i < p.size(); ++i) g[i] += up * focal_term(p[i], target[i] > 0.5, params).dvalue;
  });
}

Var dice_loss(const Var& pred, const Tensor& target) {
  if (pred.shape() != target.shape()) {
    throw DimensionError("dice_loss: prediction " + shape_str(pred.shape()) + " vs target " +
                         shape_str(target.shape()));
  }
  if (pred.value().rank() != 2 && pred.value().rank() != 3) {
    throw DimensionError("dice_loss: expects H x W or R x H x W, got " + shape_str(pred.shape()));
  }
  const bool batched = pred.value().rank() == 3;
  const int r = batched ? pred.dim(0) : 1;
  if (r == 0) throw DimensionError("dice_loss: no masks");
  const std::size_t m = pred.size() / r;

  std::vector<double> inter(r, 0.0), denom(r, 1.0);
  const Tensor& p = pred.value();
  for (int k = 0; k < r; ++k) {
    for (std::size_t i = k * m; i < (k + 1) * m; ++i) {
      inter[k] += p[i] * target[i];
      denom[k] += p[i] * p[i] + target[i] * target[i];
    }
  }
  double loss = 0;
  for (int k = 0; k < r; ++k) loss += 1.0 - (2.0 * inter[k] + 1.0) / denom[k];
  loss /= r;
  return Var::make(Tensor::scalar(loss), "dice_loss", {pred}, [target, inter, denom, r, m](Node& self) {
    const Tensor& p = self.parents[0]->value;
    Tensor& g = self.parents[0]->grad_buffer();
    const double up = self.grad[0] / r;
    for (int k = 0; k < r; ++k) {
      const double num = 2.0 * inter[k] + 1.0;
      for (std::size_t i = k * m; i < (k + 1) * m; ++i) {
        // d/dp [1 - num/den] = -(2 t den - num 2 p) / den^2
        g[i] += up * -(2.0 * target[i] * denom[k] - num * 2.0 * p[i]) / (denom[k] * denom[k]);
      }
    }
  });
}

void LossWeights::validate() const {
  if (!(partition >= 0.0) || !(mask >= 0.0)) throw ConfigError("loss weights must be non-negative");
}

LossTerms total_loss(const LossInputs& in, const LossWeights& weights, const FocalParams& focal, PartitionNorm norm) {
  weights.validate();
  const Shape& ps = in.partition.shape();
  if (ps.size() != 2 || in.partition_gt.shape() != ps) {
    throw DimensionError("total_loss: partition " + shape_str(ps) + " vs target " +
                         shape_str(in.partition_gt.shape()));
  }
  const int k = ps[0], n = ps[1];
  int positives = 0;
  for (int c = 0; c < k; ++c) positives += in.partition_gt.at(c, n - 1) > 0.5;

  // Sum over heads of per-head means equals n * (mean over the matrix).
  Var partition = scale(focal_loss(in.partition, in.partition_gt, focal), n);
  if (norm == PartitionNorm::kPositives) partition = scale(partition, static_cast<double>(k) / std::max(1, positives));

  LossTerms out;
  out.partition = partition.value()[0];
  out.total = scale(partition, weights.partition);
  if (in.masks.defined() && in.masks.size() > 0) {
    Var dice = dice_loss(in.masks, in.mask_gt);
    out.mask = dice.value()[0];
    out.total = add(out.total, scale(dice, weights.mask));
  }
  return out;
}

}  // namespace psr
