#pragma once

#include <cstdint>
#include <vector>

#include "psr/autograd.hpp"

namespace psr {

// Elementwise arithmetic. Binary ops require identical shapes.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& x, double factor);
Var add_scalar(const Var& x, double value);
Var sum(const Var& x);
Var mean(const Var& x);
Var log(const Var& x);
Var sigmoid(const Var& x);
Var relu(const Var& x);
Var leaky_relu(const Var& x, double negative_slope = 0.01);

/// Adds b[c] to every element of channel c of a C x ... tensor.
Var add_channel_bias(const Var& x, const Var& bias);

// Layout.
Var reshape(const Var& x, Shape shape);
Var permute(const Var& x, const std::vector<int>& axes);
/// Stacks equally shaped tensors along a new leading axis.
Var stack(const std::vector<Var>& xs);
/// Slice i of the leading axis.
Var select(const Var& x, int index);
/// Concatenates along the leading axis.
Var concat(const std::vector<Var>& xs);
/// Rows of a 2-D tensor, in the given order.
Var gather_rows(const Var& x, const std::vector<int>& rows);

/// (m x k) . (k x n).
Var matmul(const Var& a, const Var& b);
/// x[..., in] . w[in x out] + b[out].
Var linear(const Var& x, const Var& weight, const Var& bias);

/// Max-subtracted softmax along `axis`.
Var softmax(const Var& x, int axis);

/// Cross-correlation of C_in x H x W with C_out x C_in x k x k. Zero padding.
/// `bias` may be undefined.
Var conv2d(const Var& x, const Var& kernel, const Var& bias, int stride = 1, int padding = -1);

/// Group normalization of a C x H x W map with per-channel affine.
Var group_norm(const Var& x, int groups, const Var& gamma, const Var& beta, double eps = 1e-5);

/// Bilinear resize of C x H x W, half-pixel centers (corners not aligned).
Var interpolate(const Var& x, int out_h, int out_w);

/// Counts scored query-key pairs. One increment per pair per sequence,
/// independent of the number of heads.
struct PairCounter {
  std::uint64_t pairs = 0;
};

/// Scaled dot-product attention over B x L x D projections, split into
/// `heads` contiguous channel blocks.
Var attention_core(const Var& q, const Var& k, const Var& v, int heads,
                   PairCounter* counter = nullptr);

struct MhsaParams {
  Var wq, wk, wv, wo;  // D x D
  Var bq, bk, bv, bo;  // D
};

/// Multi-head self-attention with output projection. Accepts L x D or
/// B x L x D (B independent sequences).
Var mhsa(const Var& x, const MhsaParams& params, int heads, PairCounter* counter = nullptr);

}  // namespace psr
