#include "psr/p2r.hpp"

#include <algorithm>
#include <string>

#include "psr/errors.hpp"

namespace psr {

void P2RConfig::validate() const {
  auto open_unit = [](double v) { return v > 0.0 && v < 1.0; };
  if (!open_unit(threshold) || !open_unit(nms_iou) || !open_unit(binarize)) {
    throw ConfigError("P2R thresholds must lie in (0,1)");
  }
  if (objectness_floor < 0.0 || objectness_floor >= 1.0) throw ConfigError("objectness floor must lie in [0,1)");
}

std::vector<InstanceCandidate> associate(const Tensor& masks, const Tensor& partition,
                                         const std::vector<CellOrigin>& origins, double floor) {
  if (partition.size() == 0) return {};
  if (partition.rank() != 2 || masks.rank() != 3) {
    throw DimensionError("associate: expects K x H x W masks and K x N partitions, got " + shape_str(masks.shape()) +
                         " and " + shape_str(partition.shape()));
  }
  const int k = partition.dim(0), n = partition.dim(1);
  if (masks.dim(0) != k || (!origins.empty() && static_cast<int>(origins.size()) != k)) {
    throw AlignmentError("associate: " + std::to_string(masks.dim(0)) + " masks vs " + std::to_string(k) +
                         " partition rows");
  }
  const int h = masks.dim(1), w = masks.dim(2);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  std::vector<InstanceCandidate> out;
  for (int r = 0; r < k; ++r) {
    std::vector<double> v(n);
    for (int c = 0; c < n; ++c) v[c] = partition.at(r, c);
    if (*std::max_element(v.begin(), v.end()) < floor) continue;
    InstanceCandidate cand;
    cand.mask = Tensor({h, w}, std::vector<double>(masks.data() + r * plane, masks.data() + (r + 1) * plane));
    cand.partition = std::move(v);
    cand.origin = origins.empty() ? CellOrigin{} : origins[r];
    cand.row = r;
    out.push_back(std::move(cand));
  }
  return out;
}

bool is_ambiguous(const std::vector<double>& v, double threshold) {
  bool seen_above = false;
  for (double p : v) {
    if (p >= threshold) {
      seen_above = true;
    } else if (seen_above) {
      return true;
    }
  }
  return false;
}

std::vector<InstanceCandidate> alleviate(std::vector<InstanceCandidate> cands, double threshold) {
  std::erase_if(cands, [threshold](const InstanceCandidate& c) { return is_ambiguous(c.partition, threshold); });
  return cands;
}

double mask_iou(const BinaryMask& a, const BinaryMask& b) {
  if (a.height != b.height || a.width != b.width) {
    throw DimensionError("mask_iou: " + std::to_string(a.height) + "x" + std::to_string(a.width) + " vs " +
                         std::to_string(b.height) + "x" + std::to_string(b.width));
  }
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    inter += a.data[i] && b.data[i];
    uni += a.data[i] || b.data[i];
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

BinaryMask binarize(const Tensor& soft, double threshold) {
  if (soft.rank() != 2) throw DimensionError("binarize: expects H x W, got " + shape_str(soft.shape()));
  BinaryMask m(soft.dim(0), soft.dim(1));
  for (std::size_t i = 0; i < m.pixels(); ++i) m.data[i] = soft[i] >= threshold ? 1 : 0;
  return m;
}

std::vector<RankedInstance> select_ranks(std::vector<InstanceCandidate> cands, int num_ranks,
                                         const P2RConfig& config) {
  std::vector<BinaryMask> binary;
  binary.reserve(cands.size());
  for (const InstanceCandidate& c : cands) {
    if (static_cast<int>(c.partition.size()) < num_ranks) {
      throw DimensionError("select_ranks: candidate has " + std::to_string(c.partition.size()) +
                           " partitions, need " + std::to_string(num_ranks));
    }
    binary.push_back(binarize(c.mask, config.binarize));
  }

  std::vector<RankedInstance> out;
  for (int n = 0; n < num_ranks; ++n) {
    int best = -1;
    for (std::size_t i = 0; i < cands.size(); ++i) {
      if (!cands[i].alive) continue;
      if (best < 0) {
        best = static_cast<int>(i);
        continue;
      }
      const double v = cands[i].partition[n], bv = cands[best].partition[n];
      if (v > bv || (v == bv && cands[i].row < cands[best].row)) best = static_cast<int>(i);
    }
    if (best < 0 || cands[best].partition[n] < config.threshold) break;
    cands[best].alive = false;
    out.push_back({binary[best], n + 1, cands[best].partition[n], cands[best].origin, cands[best].row});
    for (std::size_t i = 0; i < cands.size(); ++i) {
      if (cands[i].alive && mask_iou(binary[i], binary[best]) > config.nms_iou) cands[i].alive = false;
    }
  }
  return out;
}

std::vector<RankedInstance> partition_to_rank(const Tensor& masks, const Tensor& partition,
                                              const std::vector<CellOrigin>& origins, const P2RConfig& config) {
  config.validate();
  const int n = partition.rank() == 2 ? partition.dim(1) : 0;
  return select_ranks(alleviate(associate(masks, partition, origins, config.objectness_floor), config.threshold), n,
                      config);
}

}  // namespace psr
