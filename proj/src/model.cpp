#include "psr/model.hpp"

#include <algorithm>
#include <set>

#include "psr/errors.hpp"

namespace psr {

using nlohmann::json;

std::string head_name(HeadType head) { return head == HeadType::kPartition ? "partition" : "sorting"; }

HeadType parse_head(const std::string& name) {
  if (name == "partition") return HeadType::kPartition;
  if (name == "sorting") return HeadType::kSorting;
  throw ConfigError("unknown head type '" + name + "' (expected partition or sorting)");
}

void ModelConfig::validate() const {
  if (num_ranks < 1) throw ConfigError("num_ranks must be positive");
  if (grid_sides.empty()) throw ConfigError("at least one grid side is required");
  for (std::size_t i = 0; i < grid_sides.size(); ++i) {
    if (grid_sides[i] < 1 || (i > 0 && grid_sides[i] >= grid_sides[i - 1])) {
      throw ConfigError("grid sides must be positive and strictly decreasing");
    }
  }
  if (mask_dim < 1) throw ConfigError("mask_dim must be positive");
  if (stem_channels % gn_groups != 0) throw ConfigError("stem_channels must be divisible by gn_groups");
  dpt().validate();
  p2r().validate();
  loss.validate();
  if (!(prior > 0.0 && prior * num_ranks < 1.0)) throw ConfigError("prior must satisfy 0 < N * prior < 1");
  if (!(min_object > 0.0)) throw ConfigError("min_object must be positive");
}

DptConfig ModelConfig::dpt() const {
  DptConfig d;
  d.layers = dpt_layers;
  d.conv_layers = conv_layers;
  d.heads = attention_heads;
  d.channels = channels;
  d.gn_groups = gn_groups;
  return d;
}

EncoderConfig ModelConfig::encoder() const {
  EncoderConfig e;
  e.channels = channels;
  e.grid_sides = grid_sides;
  e.gn_groups = gn_groups;
  e.stem_channels = stem_channels;
  return e;
}

P2RConfig ModelConfig::p2r() const { return {threshold, nms_iou, binarize, objectness_floor}; }

void to_json(json& j, const ModelConfig& c) {
  j = json{{"num_ranks", c.num_ranks},
           {"channels", c.channels},
           {"grid_sides", c.grid_sides},
           {"dpt_layers", c.dpt_layers},
           {"conv_layers", c.conv_layers},
           {"attention_heads", c.attention_heads},
           {"gn_groups", c.gn_groups},
           {"stem_channels", c.stem_channels},
           {"mask_dim", c.mask_dim},
           {"head", head_name(c.head)},
           {"prior", c.prior},
           {"min_object", c.min_object},
           {"threshold", c.threshold},
           {"nms_iou", c.nms_iou},
           {"binarize", c.binarize},
           {"objectness_floor", c.objectness_floor},
           {"lambda_partition", c.loss.partition},
           {"lambda_mask", c.loss.mask},
           {"focal_alpha", c.focal.alpha},
           {"focal_gamma", c.focal.gamma},
           {"partition_norm", c.partition_norm == PartitionNorm::kCells ? "cells" : "positives"}};
}

void from_json(const json& j, ModelConfig& c) {
  static const std::set<std::string> known{
      "num_ranks", "channels",   "grid_sides", "dpt_layers", "conv_layers",      "attention_heads", "gn_groups",
      "stem_channels", "mask_dim", "head",      "prior",      "min_object",       "threshold",       "nms_iou",
      "binarize",  "objectness_floor", "lambda_partition", "lambda_mask", "focal_alpha", "focal_gamma",
      "partition_norm"};
  if (!j.is_object()) throw ConfigError("model config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw ConfigError("unknown model config key '" + key + "'");
  }
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) j.at(key).get_to(field);
    };
    get("num_ranks", c.num_ranks);
    get("channels", c.channels);
    get("grid_sides", c.grid_sides);
    get("dpt_layers", c.dpt_layers);
    get("conv_layers", c.conv_layers);
    get("attention_heads", c.attention_heads);
    get("gn_groups", c.gn_groups);
    get("stem_channels", c.stem_channels);
    get("mask_dim", c.mask_dim);
    if (j.contains("head")) c.head = parse_head(j.at("head").get<std::string>());
    get("prior", c.prior);
    get("min_object", c.min_object);
    get("threshold", c.threshold);
    get("nms_iou", c.nms_iou);
    get("binarize", c.binarize);
    get("objectness_floor", c.objectness_floor);
    get("lambda_partition", c.loss.partition);
    get("lambda_mask", c.loss.mask);
    get("focal_alpha", c.focal.alpha);
    get("focal_gamma", c.focal.gamma);
    if (j.contains("partition_norm")) {
      const auto norm = j.at("partition_norm").get<std::string>();
      if (norm == "cells") {
        c.partition_norm = PartitionNorm::kCells;
      } else if (norm == "positives") {
        c.partition_norm = PartitionNorm::kPositives;
      } else {
        throw ConfigError("partition_norm must be 'cells' or 'positives'");
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
}

Model::Model(const ModelConfig& cfg, std::uint64_t seed) : config(cfg) {
  config.validate();
  Rng rng(seed);
  encoder = make_encoder(params, config.encoder(), rng);
  positional = make_positional(params, config.channels, static_cast<int>(config.grid_sides.size()));
  cgr = make_cgr(params, config.dpt(), rng);
  dpt = make_dpt(params, config.dpt(), rng);
  if (config.head == HeadType::kPartition) {
    partition = make_partition_head(params, config.channels, config.num_ranks, rng, config.prior);
  } else {
    sorting = make_sorting_head(params, config.channels, config.num_ranks, rng, config.prior);
  }
  std::vector<int> stage_channels(kEncoderStages, config.channels);
  stage_channels[0] = config.stem_channels;
  mask = make_mask_head(params, stage_channels, config.channels, config.mask_dim, rng);
}

ForwardOutput forward(const Model& model, const Tensor& image) {
  const ModelConfig& c = model.config;
  EncoderOutput enc = encode(Var(image), model.encoder, c.encoder());
  PyramidFeatures g = cgr(enc.grids, model.cgr, c.dpt());
  PyramidFeatures f_hat = dpt_forward(add_positional_encoding(g, model.positional), c.dpt(), model.dpt);
  ForwardOutput out;
  out.scores = c.head == HeadType::kPartition ? partition_forward(f_hat, model.partition)
                                              : sorting_head_forward(f_hat, model.sorting);
  out.kernels = mask_kernels(f_hat, model.mask);
  out.global_map = global_mask_features(enc.stages, image.dim(1), image.dim(2), model.mask);
  out.stages = std::move(enc.stages);
  out.f_hat = std::move(f_hat);
  return out;
}

Var cell_mask_logits(const ForwardOutput& out, const std::vector<int>& rows, int height, int width) {
  return interpolate(dynamic_mask_logits(out.kernels, out.global_map, rows), height, width);
}

SampleTargets make_targets(const ModelConfig& c, const SceneSample& sample) {
  AssignConfig ac;
  ac.sides = c.grid_sides;
  ac.min_object = c.min_object;
  SampleTargets t;
  t.cells = assign_targets(sample, ac);
  const int k = static_cast<int>(t.cells.instance.size()), n = c.num_ranks;
  t.scores = Tensor({k, n}, 0.0);
  t.labels.assign(k, n);
  for (int cell = 0; cell < k; ++cell) {
    const int inst = t.cells.instance[cell];
    if (inst < 0) continue;
    const int rank = sample.instances[inst].rank;
    const auto gt = encode_partition_gt(rank, n);
    for (int j = 0; j < n; ++j) t.scores.at(cell, j) = gt[j];
    t.labels[cell] = rank - 1;
  }
  const int r = static_cast<int>(t.cells.positive_cells.size());
  if (r > 0) {
    const int h = sample.height(), w = sample.width();
    t.masks = Tensor({r, h, w}, 0.0);
    for (int i = 0; i < r; ++i) {
      const BinaryMask& m = sample.instances[t.cells.positive_instances[i]].mask;
      for (std::size_t p = 0; p < m.pixels(); ++p) t.masks[i * m.pixels() + p] = m.data[p];
    }
  }
  return t;
}

LossTerms sample_loss(const Model& model, const SceneSample& sample) {
  const ModelConfig& c = model.config;
  if (sample.instances.size() > static_cast<std::size_t>(c.num_ranks)) {
    throw DataError("sample has more instances than the model has ranks");
  }
  ForwardOutput out = forward(model, sample.image);
  SampleTargets t = make_targets(c, sample);
  Var masks;
  if (!t.cells.positive_cells.empty()) {
    masks = sigmoid(cell_mask_logits(out, t.cells.positive_cells, sample.height(), sample.width()));
  }
  if (c.head == HeadType::kPartition) {
    return total_loss({out.scores, masks, t.scores, t.masks}, c.loss, c.focal, c.partition_norm);
  }
  // Sorting baseline: cross-entropy in place of the partition term, same
  // normalization and mask branch.
  const int k = out.scores.dim(0);
  const int positives = static_cast<int>(t.cells.positive_cells.size());
  Var ce = cross_entropy(out.scores, t.labels);
  if (c.partition_norm == PartitionNorm::kPositives) ce = scale(ce, static_cast<double>(k) / std::max(1, positives));
  LossTerms terms;
  terms.partition = ce.value()[0];
  terms.total = scale(ce, c.loss.partition);
  if (masks.defined()) {
    Var dice = dice_loss(masks, t.masks);
    terms.mask = dice.value()[0];
    terms.total = add(terms.total, scale(dice, c.loss.mask));
  }
  return terms;
}

std::vector<RankedInstance> predict(const Model& model, const Tensor& image) {
  NoGradGuard no_grad;
  const ModelConfig& c = model.config;
  const int h = image.dim(1), w = image.dim(2);
  ForwardOutput out = forward(model, image);
  const std::vector<CellOrigin> origins = cell_origins(c.grid_sides);
  const Tensor& scores = out.scores.value();
  const int k = scores.dim(0);

  auto full_masks = [&](const std::vector<int>& rows) {
    if (rows.empty()) return Tensor();
    return sigmoid(cell_mask_logits(out, rows, h, w)).value();
  };

  if (c.head == HeadType::kSorting) {
    std::vector<int> rows;
    for (int r = 0; r < k; ++r) {
      int best = 0;
      for (int j = 1; j <= c.num_ranks; ++j)
        if (scores.at(r, j) > scores.at(r, best)) best = j;
      if (best != c.num_ranks) rows.push_back(r);
    }
    Tensor masks({k, h, w}, 0.0);
    Tensor some = full_masks(rows);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      std::copy(some.data() + i * plane, some.data() + (i + 1) * plane, masks.data() + rows[i] * plane);
    }
    return sort_to_ranks(scores, masks, origins, c.nms_iou, c.binarize);
  }

  // associate and alleviate only read partition rows, so full-resolution
  // masks are produced for the survivors alone.
  const P2RConfig p2r = c.p2r();
  std::vector<InstanceCandidate> cands =
      alleviate(associate(Tensor({k, 1, 1}, 0.0), scores, origins, p2r.objectness_floor), p2r.threshold);
  std::vector<int> rows;
  for (const InstanceCandidate& cand : cands) rows.push_back(cand.row);
  Tensor masks = full_masks(rows);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    cands[i].mask = Tensor({h, w}, std::vector<double>(masks.data() + i * plane, masks.data() + (i + 1) * plane));
  }
  return select_ranks(std::move(cands), c.num_ranks, p2r);
}

}  // namespace psr
