#pragma once

#include <vector>

#include "psr/layers.hpp"

namespace psr {

/// One gridded feature map, E x s x s.
struct FeatureGrid {
  int scale_index = 0;
  Var data;

  int channels() const { return data.dim(0); }
  int side() const { return data.dim(1); }
};

/// Grids ordered finest (largest side) to coarsest.
struct PyramidFeatures {
  std::vector<FeatureGrid> grids;

  std::size_t size() const { return grids.size(); }
  /// Total number of grid cells, sum of side^2.
  int cell_count() const;
  /// Throws ConfigError unless indices increase, sides strictly decrease and
  /// every grid is channels x side x side as configured.
  void validate(int channels, const std::vector<int>& sides) const;
};

struct EncoderConfig {
  int channels = 16;  // E
  std::vector<int> grid_sides{12, 10, 8, 6, 4};
  int gn_groups = 4;
  int stem_channels = 16;
};

/// Four stride-2 conv + GN + ReLU stages; stage j runs at 1/2^(j+1) resolution.
struct EncoderParams {
  std::vector<ConvParams> convs;
  std::vector<NormParams> norms;
};

struct EncoderOutput {
  PyramidFeatures grids;
  std::vector<Var> stages;  // raw stage maps, finest first
};

inline constexpr int kEncoderStages = 4;
inline constexpr int kEncoderStride = 1 << kEncoderStages;

EncoderParams make_encoder(ParameterSet& set, const EncoderConfig& config, Rng& rng);

/// Stage index feeding a grid of the given side: the coarsest stage whose
/// smaller extent still covers the side, else the finest stage.
int stage_for_side(int side, int image_h, int image_w);

EncoderOutput encode(const Var& image, const EncoderParams& params, const EncoderConfig& config);

/// Fixed 2-D sinusoid: the first E/2 channels encode the column, the last
/// E/2 the row. Within a half, channel 2k is sin(p / l_k) and 2k+1 is
/// cos(p / l_k) with l_k geometric from 1 to 1e4 cell units.
Tensor sinusoid_encoding(int channels, int side);

struct PositionalParams {
  std::vector<Var> scale_bias;  // one length-E vector per scale
};

PositionalParams make_positional(ParameterSet& set, int channels, int scales);

PyramidFeatures add_positional_encoding(const PyramidFeatures& p, const PositionalParams& params);

}  // namespace psr
