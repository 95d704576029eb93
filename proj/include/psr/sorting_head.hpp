#pragma once

#include <vector>

#include "psr/heads.hpp"
#include "psr/p2r.hpp"

namespace psr {

/// Ranking-by-sorting baseline: one 3x3 conv E -> N+1 shared by all scales.
/// Classes 0..N-1 are ranks 1..N, class N is background.
struct SortingHeadParams {
  ConvParams conv;
};

/// The background bias is set so that, with zero features, every rank
/// class starts at probability `prior`.
SortingHeadParams make_sorting_head(ParameterSet& set, int channels, int num_ranks, Rng& rng, double prior = 0.01);

Var sorting_logits(const PyramidFeatures& f_hat, const SortingHeadParams& params);
/// K x (N+1) class probabilities, rows sum to one.
Var sorting_head_forward(const PyramidFeatures& f_hat, const SortingHeadParams& params);

/// Mean over rows of -log p[row, label], p clamped to [1e-7, 1].
Var cross_entropy(const Var& probs, const std::vector<int>& labels);

/// Argmax class per row (lowest class on ties); non-background rows are
/// visited by descending confidence, then row. A row is dropped if its
/// binarized mask overlaps an accepted one with IoU > nms_iou or its rank is
/// already taken. Output is ordered by rank; ranks may have gaps.
std::vector<RankedInstance> sort_to_ranks(const Tensor& scores, const Tensor& masks,
                                          const std::vector<CellOrigin>& origins, double nms_iou = 0.5,
                                          double binarize_threshold = 0.5);

}  // namespace psr
