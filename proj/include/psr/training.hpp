#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "psr/data_synth.hpp"
#include "psr/metrics.hpp"
#include "psr/model.hpp"

namespace psr {

struct TrainConfig {
  int epochs = 60;
  int batch_size = 8;
  double lr = 2.5e-5;
  double momentum = 0.9;
  double weight_decay = 0.0;
  int warmup_iters = 1000;       // linear ramp from warmup_factor * lr
  double warmup_factor = 0.001;
  std::vector<int> milestones{42, 54};  // epochs at which lr is multiplied by `decay`
  double decay = 1e-4;
  double grad_clip = 0.0;  // global L2 norm; 0 disables
  std::uint64_t seed = 0;

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
};

void to_json(nlohmann::json& j, const RunConfig& c);
void from_json(const nlohmann::json& j, RunConfig& c);

/// Optimizer settings published with the method (lr 2.5e-5, 1000 warmup
/// iterations, decay x1e-4 at epochs 42 and 54) on the default model.
RunConfig full_preset();
/// Desk-scale preset: sides [8,6,4], E=16, two DPT layers; lr 0.02 with
/// weight decay 5e-3, partition loss normalized by positives, 60 epochs.
RunConfig toy_preset();
RunConfig preset(const std::string& name);

/// SHA-256 of the canonical config JSON with `train.epochs` removed, so a run
/// can be extended without changing its identity.
std::string config_hash(const RunConfig& config);

/// Learning rate for 0-based `iteration` within 0-based `epoch`.
double learning_rate(const TrainConfig& c, long iteration, int epoch);

struct TrainState {
  int epoch = 0;        // epochs completed
  long iteration = 0;   // optimizer steps taken
  std::vector<Tensor> momentum;  // one buffer per parameter, empty until the first step
};

struct EpochLog {
  int epoch = 0;  // 1-based
  double total = 0.0;
  double partition = 0.0;
  double mask = 0.0;
  double lr = 0.0;
};

using EpochCallback = std::function<void(const EpochLog&, const Model&, const TrainState&)>;

/// SGD with momentum over `data` until `config.train.epochs` are complete,
/// starting from `state`. Deterministic for a fixed seed.
std::vector<EpochLog> train(Model& model, TrainState& state, const RunConfig& config,
                            const std::vector<const SceneSample*>& data, const EpochCallback& on_epoch = {});

/// Per-step loss trace on one sample for `steps` full-batch SGD steps.
/// Returns the loss before each step plus the final loss.
std::vector<double> overfit(Model& model, const RunConfig& config, const SceneSample& sample, int steps);

inline constexpr const char* kCheckpointVersion = "psr-checkpoint/1";

struct Checkpoint {
  RunConfig config;
  std::string hash;
  TrainState state;
  std::map<std::string, Tensor> params;
};

void save_checkpoint(const std::filesystem::path& path, const Model& model, const TrainState& state,
                     const RunConfig& config);
/// Throws LoadError naming the path.
Checkpoint load_checkpoint(const std::filesystem::path& path);
/// Copies parameters into `model`; throws LoadError on any missing or
/// misshapen parameter.
void restore(Model& model, const Checkpoint& ckpt);

struct EvalOptions {
  bool gt_passthrough = false;  // feed GT instances back as predictions
  int threads = 0;              // 0: hardware concurrency
  double match_iou = 0.5;
};

/// Predicts every sample of `split` and aggregates the metrics in dataset
/// order. Throws DataError for an empty split, ConfigError if N differs.
MetricReport evaluate(const Model& model, const Dataset& dataset, const std::string& split,
                      const EvalOptions& options = {});

std::vector<SceneInstance> to_instances(const std::vector<RankedInstance>& ranked);

}  // namespace psr
