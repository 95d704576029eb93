#pragma once

#include <cstdint>
#include <vector>

#include "psr/layers.hpp"
#include "psr/pyramid.hpp"

namespace psr {

struct DptConfig {
  int layers = 3;
  int conv_layers = 3;
  int heads = 4;
  int channels = 16;  // E
  int gn_groups = 4;
  double leaky_slope = 0.01;

  void validate() const;
};

/// Convolutional harmonization: conv_layers x ReLU(GN(Conv3x3)).
/// Weights are shared by all scales.
struct CgrParams {
  std::vector<ConvParams> convs;
  std::vector<NormParams> norms;
};

struct RowColumnParams {
  MhsaParams row;
  MhsaParams column;
  NormParams norm;
};

struct CrossScaleParams {
  MhsaParams attn;
  NormParams norm;
};

struct ClcgParams {
  ConvParams conv1;
  ConvParams conv2;
  NormParams norm;
};

struct DptLayerParams {
  RowColumnParams row_column;
  CrossScaleParams cross_scale;
  ClcgParams clcg;
};

struct DptParams {
  std::vector<DptLayerParams> layers;
};

CgrParams make_cgr(ParameterSet& set, const DptConfig& config, Rng& rng);
DptParams make_dpt(ParameterSet& set, const DptConfig& config, Rng& rng);

PyramidFeatures cgr(const PyramidFeatures& g, const CgrParams& params, const DptConfig& config);

/// x + MHSA over each row (B = H sequences of length W). x is E x H x W.
Var row_attention(const Var& x, const MhsaParams& params, int heads, PairCounter* counter = nullptr);
/// x + MHSA over each column (B = W sequences of length H).
Var column_attention(const Var& x, const MhsaParams& params, int heads, PairCounter* counter = nullptr);

/// GN(column pass of (row pass of f)).
FeatureGrid row_column_attention(const FeatureGrid& f, const RowColumnParams& params, const DptConfig& config,
                                 PairCounter* counter = nullptr);

/// Upsamples every grid to the largest extent, attends over the S scale
/// vectors at each location, downsamples back, adds the residual and
/// normalizes. Grids may be rectangular and of equal size.
PyramidFeatures cross_scale_attention(const PyramidFeatures& p, const CrossScaleParams& params,
                                      const DptConfig& config, PairCounter* counter = nullptr);

/// GN(Conv(LeakyReLU(Conv(f))) + f) per scale.
PyramidFeatures clcg(const PyramidFeatures& f, const ClcgParams& params, const DptConfig& config);

PyramidFeatures dpt_layer(const PyramidFeatures& f, const DptLayerParams& params, const DptConfig& config,
                          PairCounter* counter = nullptr);

/// Applies every layer in `params` in order. Expects positioned features.
PyramidFeatures dpt_forward(const PyramidFeatures& f, const DptConfig& config, const DptParams& params,
                            PairCounter* counter = nullptr);

/// Baseline: one MHSA over all cells of all scales concatenated, then the
/// residual and GN; shapes restored per scale.
PyramidFeatures all_scale_attention(const PyramidFeatures& p, const CrossScaleParams& params,
                                    const DptConfig& config, PairCounter* counter = nullptr);

struct PairCountReport {
  std::int64_t S = 0, H = 0, W = 0;
  std::int64_t dpt_pairs = 0;
  std::int64_t all_scale_pairs = 0;

  double ratio() const { return static_cast<double>(dpt_pairs) / static_cast<double>(all_scale_pairs); }
};

/// Closed-form score-pair counts: S*H*W^2 + S*H^2*W + S^2*H*W for the
/// row/column/cross-scale routes and (S*H*W)^2 for all-scale attention.
PairCountReport count_attention_pairs(std::int64_t S, std::int64_t H, std::int64_t W);

/// Runs the three DPT attention routes and the all-scale baseline on S
/// random E x H x W grids and reports the counted query-key pairs.
PairCountReport measure_attention_pairs(int S, int H, int W, std::uint64_t seed = 0);

}  // namespace psr
