#pragma once

#include <vector>

#include "psr/heads.hpp"
#include "psr/mask.hpp"
#include "psr/tensor.hpp"

namespace psr {

struct InstanceCandidate {
  Tensor mask;                     // H x W soft mask
  std::vector<double> partition;   // N probabilities
  CellOrigin origin;
  int row = 0;                     // row of the partition matrix; breaks ties
  bool alive = true;
};

struct RankedInstance {
  BinaryMask mask;
  int rank = 0;
  double score = 0.0;  // probability that selected it
  CellOrigin origin;
  int row = 0;

  friend bool operator==(const RankedInstance&, const RankedInstance&) = default;
};

struct P2RConfig {
  double threshold = 0.3;          // T
  double nms_iou = 0.5;
  double binarize = 0.5;
  double objectness_floor = 0.1;

  void validate() const;
};

/// Pairs mask k (K x H x W) with partition row k (K x N), keeping rows whose
/// largest probability reaches `floor`. `origins` may be empty; otherwise
/// it must have K entries. Throws AlignmentError on row-count mismatch.
std::vector<InstanceCandidate> associate(const Tensor& masks, const Tensor& partition,
                                         const std::vector<CellOrigin>& origins, double floor = 0.1);

/// True when some j < i has v_j >= T while v_i < T.
bool is_ambiguous(const std::vector<double>& partition, double threshold);

/// Drops ambiguous candidates; order is preserved.
std::vector<InstanceCandidate> alleviate(std::vector<InstanceCandidate> cands, double threshold);

/// |a & b| / |a | b|, 0 when both are empty. Throws DimensionError on shape mismatch.
double mask_iou(const BinaryMask& a, const BinaryMask& b);

/// Pixel is set iff value >= threshold. Accepts H x W.
BinaryMask binarize(const Tensor& soft, double threshold = 0.5);

/// For n = 1..N: pick the live candidate with the largest v_n (lowest row on
/// ties); stop if v_n < T; emit it as rank n, then kill every live candidate
/// whose binarized mask overlaps it with IoU > nms_iou.
std::vector<RankedInstance> select_ranks(std::vector<InstanceCandidate> cands, int num_ranks,
                                         const P2RConfig& config = {});

/// associate -> alleviate -> select_ranks.
std::vector<RankedInstance> partition_to_rank(const Tensor& masks, const Tensor& partition,
                                              const std::vector<CellOrigin>& origins, const P2RConfig& config = {});

}  // namespace psr
