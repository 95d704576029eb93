#pragma once

#include <vector>

#include "psr/data_synth.hpp"
#include "psr/layers.hpp"
#include "psr/pyramid.hpp"

namespace psr {

/// Location of a grid cell. Cells are enumerated scale-major, then row-major
/// (y, then x); partition rows and mask rows share this order.
struct CellOrigin {
  int scale = 0;  // position in PyramidFeatures::grids
  int y = 0;
  int x = 0;

  friend bool operator==(const CellOrigin&, const CellOrigin&) = default;
};

std::vector<CellOrigin> cell_origins(const std::vector<int>& sides);
/// Row index of (scale, y, x) in the cell enumeration.
int cell_index(const std::vector<int>& sides, const CellOrigin& origin);

/// Flattens a pyramid of C x s x s maps into a (sum s^2) x C matrix in cell order.
Var gather_cells(const std::vector<Var>& maps);

/// N independent 3x3 E->1 heads, stored as one E->N kernel (output channels
/// never mix). Shared by all scales.
struct PartitionHeadParams {
  ConvParams conv;
};

/// `prior` sets the initial bias to logit(prior); 0.5 gives a zero bias.
PartitionHeadParams make_partition_head(ParameterSet& set, int channels, int num_ranks, Rng& rng,
                                        double prior = 0.01);

/// K x N pre-sigmoid scores.
Var partition_logits(const PyramidFeatures& f_hat, const PartitionHeadParams& params);
/// K x N partition probabilities.
Var partition_forward(const PyramidFeatures& f_hat, const PartitionHeadParams& params);

struct MaskHeadParams {
  ConvParams fuse;    // 1x1, sum(stage channels) -> D
  ConvParams kernel;  // 3x3, E -> D, shared by all scales
};

MaskHeadParams make_mask_head(ParameterSet& set, const std::vector<int>& stage_channels, int channels, int mask_dim,
                              Rng& rng);

/// D x H/4 x W/4 map: every encoder stage resized to 1/4 input resolution,
/// concatenated along channels and fused by the 1x1 conv.
Var global_mask_features(const std::vector<Var>& encoder_stages, int image_h, int image_w,
                         const MaskHeadParams& params);

/// K x D dynamic kernels, one per cell.
Var mask_kernels(const PyramidFeatures& f_hat, const MaskHeadParams& params);

/// Soft masks sigmoid(kernel . map) for the requested kernel rows, R x H_m x W_m.
Var dynamic_masks(const Var& kernels, const Var& global_map, const std::vector<int>& rows);
/// Logits of the same.
Var dynamic_mask_logits(const Var& kernels, const Var& global_map, const std::vector<int>& rows);

/// All K soft masks, K x H_m x W_m, in cell order.
Var mask_forward(const PyramidFeatures& f_hat, const std::vector<Var>& encoder_stages, int image_h, int image_w,
                 const MaskHeadParams& params);

struct AssignConfig {
  std::vector<int> sides;      // grid sides, finest first
  double min_object = 8.0;     // lower end of the size ranges, pixels
  /// Optional explicit boundaries on sqrt(area), sides.size()+1 values.
  /// Empty: log-spaced over [min_object, image side].
  std::vector<double> boundaries;
};

/// Log-spaced size boundaries b_0..b_S on sqrt(area).
std::vector<double> scale_boundaries(const AssignConfig& config, int image_side);

/// Scale whose [b_k, b_k+1) range holds sqrt(area); sizes outside the
/// overall range clamp to the first / last scale.
int scale_for_size(double sqrt_area, const std::vector<double>& boundaries);

struct CellTargets {
  std::vector<int> instance;            // per cell: instance index or -1
  std::vector<int> positive_cells;      // ascending cell indices
  std::vector<int> positive_instances;  // instance index per positive cell
};

/// One positive cell per instance: the cell, on the instance's scale,
/// containing its center of mass. A center on a cell boundary goes to the
/// lower index. When two instances claim the same cell the more salient one
/// (lower rank) keeps it. Throws DataError for an empty mask.
CellTargets assign_targets(const SceneSample& sample, const AssignConfig& config);

}  // namespace psr
