#include "psr/sorting_head.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "psr/errors.hpp"

namespace psr {

SortingHeadParams make_sorting_head(ParameterSet& set, int channels, int num_ranks, Rng& rng, double prior) {
  if (num_ranks < 1) throw ConfigError("sorting head needs N >= 1");
  if (!(prior > 0.0 && prior * num_ranks < 1.0)) throw ConfigError("sorting prior must satisfy 0 < N * prior < 1");
  SortingHeadParams p;
  p.conv = make_conv(set, "sorting", channels, num_ranks + 1, 3, rng);
  // softmax(0, ..., 0, b): each rank class gets 1 / (N + e^b) = prior.
  p.conv.bias.mutable_value()[num_ranks] = std::log(1.0 / prior - num_ranks);
  return p;
}

Var sorting_logits(const PyramidFeatures& f_hat, const SortingHeadParams& params) {
  std::vector<Var> maps;
  for (const FeatureGrid& g : f_hat.grids) maps.push_back(apply_conv(g.data, params.conv));
  return gather_cells(maps);
}

Var sorting_head_forward(const PyramidFeatures& f_hat, const SortingHeadParams& params) {
  return softmax(sorting_logits(f_hat, params), 1);
}

Var cross_entropy(const Var& probs, const std::vector<int>& labels) {
  if (probs.value().rank() != 2 || probs.dim(0) != static_cast<int>(labels.size())) {
    throw DimensionError("cross_entropy: " + shape_str(probs.shape()) + " vs " + std::to_string(labels.size()) +
                         " labels");
  }
  const int rows = probs.dim(0), classes = probs.dim(1);
  double loss = 0;
  for (int r = 0; r < rows; ++r) {
    if (labels[r] < 0 || labels[r] >= classes) throw DataError("cross_entropy: label out of range");
    loss -= std::log(std::max(probs.value().at(r, labels[r]), 1e-7));
  }
  loss /= rows;
  return Var::make(Tensor::scalar(loss), "cross_entropy", {probs}, [labels, rows, classes](Node& self) {
    const Tensor& p = self.parents[0]->value;
    Tensor& g = self.parents[0]->grad_buffer();
    for (int r = 0; r < rows; ++r) {
      const double v = p[static_cast<std::size_t>(r) * classes + labels[r]];
      if (v > 1e-7) g[static_cast<std::size_t>(r) * classes + labels[r]] -= self.grad[0] / (rows * v);
    }
  });
}

std::vector<RankedInstance> sort_to_ranks(const Tensor& scores, const Tensor& masks,
                                          const std::vector<CellOrigin>& origins, double nms_iou,
                                          double binarize_threshold) {
  if (scores.size() == 0) return {};
  if (scores.rank() != 2 || masks.rank() != 3 || masks.dim(0) != scores.dim(0) ||
      (!origins.empty() && static_cast<int>(origins.size()) != scores.dim(0))) {
    throw AlignmentError("sort_to_ranks: scores " + shape_str(scores.shape()) + " vs masks " +
                         shape_str(masks.shape()));
  }
  const int k = scores.dim(0), background = scores.dim(1) - 1;
  struct Claim {
    int row, cls;
    double conf;
  };
  std::vector<Claim> claims;
  for (int r = 0; r < k; ++r) {
    int best = 0;
    for (int c = 1; c <= background; ++c)
      if (scores.at(r, c) > scores.at(r, best)) best = c;
    if (best != background) claims.push_back({r, best, scores.at(r, best)});
  }
  std::stable_sort(claims.begin(), claims.end(), [](const Claim& a, const Claim& b) {
    return a.conf != b.conf ? a.conf > b.conf : a.row < b.row;
  });

  const int h = masks.dim(1), w = masks.dim(2);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  std::vector<bool> taken(background, false);
  std::vector<RankedInstance> out;
  for (const Claim& c : claims) {
    if (taken[c.cls]) continue;
    BinaryMask m(h, w);
    for (std::size_t i = 0; i < plane; ++i) m.data[i] = masks[c.row * plane + i] >= binarize_threshold ? 1 : 0;
    const bool suppressed =
        std::any_of(out.begin(), out.end(), [&](const RankedInstance& r) { return mask_iou(r.mask, m) > nms_iou; });
    if (suppressed) continue;
    taken[c.cls] = true;
    out.push_back({std::move(m), c.cls + 1, c.conf, origins.empty() ? CellOrigin{} : origins[c.row], c.row});
  }
  std::sort(out.begin(), out.end(), [](const RankedInstance& a, const RankedInstance& b) { return a.rank < b.rank; });
  return out;
}

}  // namespace psr
