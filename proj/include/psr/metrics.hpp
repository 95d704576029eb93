#pragma once

#include <optional>
#include <vector>

#include "json.hpp"
#include "psr/data_synth.hpp"

namespace psr {

struct MatchPair {
  int gt = 0;
  int pred = 0;
  double iou = 0.0;
  int gt_rank = 0;
  int pred_rank = 0;

  friend bool operator==(const MatchPair&, const MatchPair&) = default;
};

struct MatchResult {
  std::vector<MatchPair> pairs;  // in matching order
  std::vector<int> unmatched_gt;
  std::vector<int> unmatched_pred;
  int n_gt = 0;
  std::vector<int> gt_ranks;  // rank of every GT instance

  friend bool operator==(const MatchResult&, const MatchResult&) = default;
};

/// Greedy one-to-one matching in descending IoU over pairs with
/// IoU >= threshold; ties by (gt index, pred index).
MatchResult match_instances(const std::vector<SceneInstance>& preds, const std::vector<SceneInstance>& gts,
                            double iou_threshold = 0.5);

/// Average ranks (1-based) with ties sharing their mean position.
std::vector<double> average_ranks(const std::vector<double>& xs);
/// Pearson correlation; nullopt for length < 2 or zero variance on either side.
std::optional<double> pearson(const std::vector<double>& xs, const std::vector<double>& ys);
/// Pearson of the average ranks.
std::optional<double> spearman(const std::vector<double>& xs, const std::vector<double>& ys);

/// Spearman rho of (gt rank, pred rank) over matched pairs.
std::optional<double> sor(const MatchResult& match);

/// Pearson r over every GT instance. Ranks become saliency values
/// N + 1 - r; an unmatched GT instance gets prediction value 0, below every
/// ranked prediction.
std::optional<double> sa_sor(const MatchResult& match, int num_ranks);

/// Renders rank r as (N - r + 1) / N over background 0 (overlaps keep the
/// larger value) and returns the mean absolute pixel difference.
double mae(const std::vector<SceneInstance>& preds, const std::vector<SceneInstance>& gts, int num_ranks,
           int height, int width);

struct ConfusionMatrix {
  int num_ranks = 0;
  std::vector<std::vector<long>> counts;  // counts[g-1][p-1]

  explicit ConfusionMatrix(int n = 0) : num_ranks(n), counts(n, std::vector<long>(n, 0)) {}
  void add(const MatchResult& match);
  long total() const;
  long diagonal() const;
};

struct ImageMetrics {
  MatchResult match;
  std::optional<double> sor;
  std::optional<double> sa_sor;
  double mae = 0.0;
};

ImageMetrics evaluate_image(const std::vector<SceneInstance>& preds, const std::vector<SceneInstance>& gts,
                            int num_ranks, int height, int width, double iou_threshold = 0.5);

struct MetricReport {
  double mae = 0.0;
  std::optional<double> sa_sor;
  std::optional<double> sor;
  long images_evaluated = 0;
  long images_excluded_sor = 0;
  long images_excluded_sasor = 0;
  ConfusionMatrix confusion;
};

/// Ordered reduction of per-image results.
MetricReport aggregate(const std::vector<ImageMetrics>& images, int num_ranks);

/// {mae, sa_sor, sor, images_evaluated, images_excluded_sor,
///  images_excluded_sasor, confusion}; undefined averages are null.
/// `sor_normalized` adds (rho + 1) / 2 as "sor_normalized".
nlohmann::json report_json(const MetricReport& report, bool sor_normalized = false);

}  // namespace psr
