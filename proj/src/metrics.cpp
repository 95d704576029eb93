#include "psr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

#include "psr/errors.hpp"
#include "psr/p2r.hpp"

namespace psr {

MatchResult match_instances(const std::vector<SceneInstance>& preds, const std::vector<SceneInstance>& gts,
                            double iou_threshold) {
  std::vector<MatchPair> candidates;
  for (std::size_t g = 0; g < gts.size(); ++g) {
    for (std::size_t p = 0; p < preds.size(); ++p) {
      const double iou = mask_iou(gts[g].mask, preds[p].mask);
      if (iou >= iou_threshold && iou > 0.0) {
        candidates.push_back({static_cast<int>(g), static_cast<int>(p), iou, gts[g].rank, preds[p].rank});
      }
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(), [](const MatchPair& a, const MatchPair& b) {
    if (a.iou != b.iou) return a.iou > b.iou;
    return std::tie(a.gt, a.pred) < std::tie(b.gt, b.pred);
  });
  MatchResult r;
  r.n_gt = static_cast<int>(gts.size());
  for (const SceneInstance& g : gts) r.gt_ranks.push_back(g.rank);
  std::vector<bool> gt_used(gts.size(), false), pred_used(preds.size(), false);
  for (const MatchPair& c : candidates) {
    if (gt_used[c.gt] || pred_used[c.pred]) continue;
    gt_used[c.gt] = pred_used[c.pred] = true;
    r.pairs.push_back(c);
  }
  for (std::size_t g = 0; g < gts.size(); ++g)
    if (!gt_used[g]) r.unmatched_gt.push_back(static_cast<int>(g));
  for (std::size_t p = 0; p < preds.size(); ++p)
    if (!pred_used[p]) r.unmatched_pred.push_back(static_cast<int>(p));
  return r;
}

std::vector<double> average_ranks(const std::vector<double>& xs) {
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(xs.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

std::optional<double> pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw DimensionError("pearson: length mismatch");
  const std::size_t n = xs.size();
  if (n < 2) return std::nullopt;
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::optional<double> spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
  return pearson(average_ranks(xs), average_ranks(ys));
}

std::optional<double> sor(const MatchResult& match) {
  std::vector<double> g, p;
  for (const MatchPair& m : match.pairs) {
    g.push_back(m.gt_rank);
    p.push_back(m.pred_rank);
  }
  return spearman(g, p);
}

std::optional<double> sa_sor(const MatchResult& match, int num_ranks) {
  std::vector<double> g(match.n_gt), p(match.n_gt, 0.0);
  for (int i = 0; i < match.n_gt; ++i) g[i] = num_ranks + 1 - match.gt_ranks[i];
  for (const MatchPair& m : match.pairs) p[m.gt] = num_ranks + 1 - m.pred_rank;
  return pearson(g, p);
}

namespace {

std::vector<double> render(const std::vector<SceneInstance>& instances, int num_ranks, int h, int w) {
  std::vector<double> map(static_cast<std::size_t>(h) * w, 0.0);
  for (const SceneInstance& inst : instances) {
    if (inst.mask.height != h || inst.mask.width != w) {
      throw DimensionError("mae: mask " + std::to_string(inst.mask.height) + "x" + std::to_string(inst.mask.width) +
                           " on a " + std::to_string(h) + "x" + std::to_string(w) + " canvas");
    }
    const double v = static_cast<double>(num_ranks - inst.rank + 1) / num_ranks;
    for (std::size_t i = 0; i < map.size(); ++i)
      if (inst.mask.data[i]) map[i] = std::max(map[i], v);
  }
  return map;
}

}  // namespace

double mae(const std::vector<SceneInstance>& preds, const std::vector<SceneInstance>& gts, int num_ranks, int height,
           int width) {
  const auto a = render(preds, num_ranks, height, width);
  const auto b = render(gts, num_ranks, height, width);
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

void ConfusionMatrix::add(const MatchResult& match) {
  for (const MatchPair& m : match.pairs) {
    if (m.gt_rank < 1 || m.gt_rank > num_ranks || m.pred_rank < 1 || m.pred_rank > num_ranks) {
      throw DataError("confusion: rank pair (" + std::to_string(m.gt_rank) + ", " + std::to_string(m.pred_rank) +
                      ") outside 1.." + std::to_string(num_ranks));
    }
    ++counts[m.gt_rank - 1][m.pred_rank - 1];
  }
}

long ConfusionMatrix::total() const {
  long t = 0;
  for (const auto& row : counts) t += std::accumulate(row.begin(), row.end(), 0L);
  return t;
}

long ConfusionMatrix::diagonal() const {
  long t = 0;
  for (int i = 0; i < num_ranks; ++i) t += counts[i][i];
  return t;
}

ImageMetrics evaluate_image(const std::vector<SceneInstance>& preds, const std::vector<SceneInstance>& gts,
                            int num_ranks, int height, int width, double iou_threshold) {
  ImageMetrics m;
  m.match = match_instances(preds, gts, iou_threshold);
  m.sor = sor(m.match);
  m.sa_sor = sa_sor(m.match, num_ranks);
  m.mae = mae(preds, gts, num_ranks, height, width);
  return m;
}

MetricReport aggregate(const std::vector<ImageMetrics>& images, int num_ranks) {
  MetricReport r;
  r.confusion = ConfusionMatrix(num_ranks);
  double mae_sum = 0, sor_sum = 0, sasor_sum = 0;
  long sor_n = 0, sasor_n = 0;
  for (const ImageMetrics& im : images) {
    mae_sum += im.mae;
    if (im.sor) {
      sor_sum += *im.sor;
      ++sor_n;
    }
    if (im.sa_sor) {
      sasor_sum += *im.sa_sor;
      ++sasor_n;
    }
    r.confusion.add(im.match);
  }
  r.images_evaluated = static_cast<long>(images.size());
  r.images_excluded_sor = r.images_evaluated - sor_n;
  r.images_excluded_sasor = r.images_evaluated - sasor_n;
  if (!images.empty()) r.mae = mae_sum / static_cast<double>(images.size());
  if (sor_n > 0) r.sor = sor_sum / sor_n;
  if (sasor_n > 0) r.sa_sor = sasor_sum / sasor_n;
  return r;
}

nlohmann::json report_json(const MetricReport& report, bool sor_normalized) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  nlohmann::json j;
  j["mae"] = report.mae;
  j["sa_sor"] = opt(report.sa_sor);
  j["sor"] = opt(report.sor);
  if (sor_normalized) j["sor_normalized"] = report.sor ? nlohmann::json((*report.sor + 1.0) / 2.0) : nlohmann::json();
  j["images_evaluated"] = report.images_evaluated;
  j["images_excluded_sor"] = report.images_excluded_sor;
  j["images_excluded_sasor"] = report.images_excluded_sasor;
  j["confusion"] = report.confusion.counts;
  return j;
}

}  // namespace psr
