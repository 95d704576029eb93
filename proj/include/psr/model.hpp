#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "psr/dpt.hpp"
#include "psr/heads.hpp"
#include "psr/losses.hpp"
#include "psr/p2r.hpp"
#include "psr/sorting_head.hpp"

namespace psr {

enum class HeadType { kPartition, kSorting };

std::string head_name(HeadType head);
HeadType parse_head(const std::string& name);

struct ModelConfig {
  int num_ranks = 3;  // N
  int channels = 16;  // E
  std::vector<int> grid_sides{12, 10, 8, 6, 4};
  int dpt_layers = 3;
  int conv_layers = 3;
  int attention_heads = 4;
  int gn_groups = 4;
  int stem_channels = 16;
  int mask_dim = 8;  // D
  HeadType head = HeadType::kPartition;
  double prior = 0.01;       // initial foreground probability of every head
  double min_object = 8.0;   // lower end of the scale-assignment ranges
  double threshold = 0.3;    // T
  double nms_iou = 0.5;
  double binarize = 0.5;
  double objectness_floor = 0.1;
  LossWeights loss;
  FocalParams focal;
  PartitionNorm partition_norm = PartitionNorm::kCells;

  void validate() const;
  DptConfig dpt() const;
  EncoderConfig encoder() const;
  P2RConfig p2r() const;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
/// Missing keys keep their defaults; unknown keys throw ConfigError.
void from_json(const nlohmann::json& j, ModelConfig& c);

/// All parameters of the network, registered in a fixed order.
struct Model {
  ModelConfig config;
  ParameterSet params;
  EncoderParams encoder;
  PositionalParams positional;
  CgrParams cgr;
  DptParams dpt;
  PartitionHeadParams partition;  // used when head == kPartition
  SortingHeadParams sorting;      // used when head == kSorting
  MaskHeadParams mask;

  Model(const ModelConfig& config, std::uint64_t seed);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
};

struct ForwardOutput {
  std::vector<Var> stages;  // encoder stage maps
  PyramidFeatures f_hat;
  Var scores;      // K x N partition probabilities, or K x (N+1) class probabilities
  Var kernels;     // K x D
  Var global_map;  // D x H/4 x W/4
};

ForwardOutput forward(const Model& model, const Tensor& image);

/// Full-resolution mask logits for the given cells: R x H x W.
Var cell_mask_logits(const ForwardOutput& out, const std::vector<int>& rows, int height, int width);

struct SampleTargets {
  CellTargets cells;
  Tensor scores;            // K x N (partition) 0/1
  std::vector<int> labels;  // K class labels (sorting)
  Tensor masks;             // R x H x W
};

SampleTargets make_targets(const ModelConfig& config, const SceneSample& sample);

/// Loss of one sample; `total` is differentiable w.r.t. the model parameters.
LossTerms sample_loss(const Model& model, const SceneSample& sample);

/// Inference: forward, then P2R (partition head) or score sorting.
std::vector<RankedInstance> predict(const Model& model, const Tensor& image);

}  // namespace psr
