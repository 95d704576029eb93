#pragma once

#include <algorithm>
#include <cmath>

#include "psr/data_synth.hpp"
#include "psr/training.hpp"

namespace psr::testing {

/// Smallest configuration that still exercises every stage: two scales,
/// one DPT layer, 32x32 input.
inline ModelConfig tiny_model(HeadType head = HeadType::kPartition) {
  ModelConfig c;
  c.channels = 8;
  c.grid_sides = {4, 2};
  c.dpt_layers = 1;
  c.conv_layers = 1;
  c.attention_heads = 2;
  c.gn_groups = 2;
  c.stem_channels = 8;
  c.mask_dim = 4;
  c.head = head;
  return c;
}

inline GenConfig tiny_scenes() {
  GenConfig g;
  g.canvas = 32;
  g.min_size = 6;
  g.max_size = 12;
  return g;
}

inline RunConfig tiny_run(HeadType head = HeadType::kPartition) {
  RunConfig rc = toy_preset();
  rc.model = tiny_model(head);
  rc.train.epochs = 1;
  rc.train.batch_size = 4;
  rc.train.warmup_iters = 2;
  rc.train.milestones = {};
  return rc;
}

inline Dataset tiny_dataset(int train, int test, std::uint64_t seed = 3) {
  Dataset ds;
  const GenConfig g = tiny_scenes();
  ds.num_ranks = g.num_ranks;
  ds.height = ds.width = g.canvas;
  for (int i = 0; i < train + test; ++i) {
    ds.entries.push_back({std::to_string(i), i < train ? "train" : "test", generate_scene(g, sample_seed(seed, i))});
  }
  return ds;
}

struct FdResult {
  double max_rel = 0.0;
  int checked = 0;
};

/// Central differences of sample_loss against a seeded subset of parameter
/// entries (at most `per_param` per tensor); relative error uses
/// max(|analytic|, |numeric|, 1e-6) as the denominator.
inline FdResult check_parameters(Model& model, const SceneSample& sample, int per_param, double step = 1e-5) {
  model.params.zero_grad();
  backward(sample_loss(model, sample).total);
  Rng rng(17);
  FdResult r;
  for (Parameter& p : model.params.all()) {
    const Tensor analytic = p.var.grad();
    Tensor& value = p.var.mutable_value();
    std::uniform_int_distribution<std::size_t> pick(0, value.size() - 1);
    const int count = std::min<int>(per_param, static_cast<int>(value.size()));
    for (int i = 0; i < count; ++i) {
      const std::size_t idx = pick(rng);
      const double saved = value[idx];
      double plus, minus;
      {
        NoGradGuard guard;
        value[idx] = saved + step;
        plus = sample_loss(model, sample).total.value()[0];
        value[idx] = saved - step;
        minus = sample_loss(model, sample).total.value()[0];
      }
      value[idx] = saved;
      const double numeric = (plus - minus) / (2 * step);
      const double denom = std::max({std::abs(analytic[idx]), std::abs(numeric), 1e-6});
      r.max_rel = std::max(r.max_rel, std::abs(analytic[idx] - numeric) / denom);
      ++r.checked;
    }
  }
  return r;
}

}  // namespace psr::testing
