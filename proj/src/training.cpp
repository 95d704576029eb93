#include "psr/training.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <bit>
#include <atomic>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <mutex>
#include <thread>

#include "psr/base64.hpp"
#include "psr/errors.hpp"

namespace psr {

using nlohmann::json;

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("epochs must be non-negative");
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("momentum must lie in [0,1)");
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be non-negative");
  if (warmup_iters < 0 || !(warmup_factor > 0.0 && warmup_factor <= 1.0)) throw ConfigError("invalid warmup");
  if (!std::is_sorted(milestones.begin(), milestones.end())) throw ConfigError("milestones must be increasing");
  if (!(decay > 0.0)) throw ConfigError("decay must be positive");
  if (grad_clip < 0.0) throw ConfigError("grad_clip must be non-negative");
}

void to_json(json& j, const TrainConfig& c) {
  j = json{{"epochs", c.epochs},
           {"batch_size", c.batch_size},
           {"lr", c.lr},
           {"momentum", c.momentum},
           {"weight_decay", c.weight_decay},
           {"warmup_iters", c.warmup_iters},
           {"warmup_factor", c.warmup_factor},
           {"milestones", c.milestones},
           {"decay", c.decay},
           {"grad_clip", c.grad_clip},
           {"seed", c.seed}};
}

void from_json(const json& j, TrainConfig& c) {
  static const std::set<std::string> known{"epochs",        "batch_size", "lr",    "momentum",  "weight_decay", "warmup_iters",
                                           "warmup_factor", "milestones", "decay", "grad_clip", "seed"};
  if (!j.is_object()) throw ConfigError("train config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw ConfigError("unknown train config key '" + key + "'");
  }
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) j.at(key).get_to(field);
    };
    get("epochs", c.epochs);
    get("batch_size", c.batch_size);
    get("lr", c.lr);
    get("momentum", c.momentum);
    get("weight_decay", c.weight_decay);
    get("warmup_iters", c.warmup_iters);
    get("warmup_factor", c.warmup_factor);
    get("milestones", c.milestones);
    get("decay", c.decay);
    get("grad_clip", c.grad_clip);
    get("seed", c.seed);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
}

void to_json(json& j, const RunConfig& c) { j = json{{"model", c.model}, {"train", c.train}}; }

void from_json(const json& j, RunConfig& c) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key != "model" && key != "train") throw ConfigError("unknown config section '" + key + "'");
  }
  if (j.contains("model")) from_json(j.at("model"), c.model);
  if (j.contains("train")) from_json(j.at("train"), c.train);
}

RunConfig full_preset() { return RunConfig{}; }

RunConfig toy_preset() {
  RunConfig c;
  c.model.grid_sides = {8, 6, 4};
  c.model.dpt_layers = 2;
  c.model.partition_norm = PartitionNorm::kPositives;
  c.train.epochs = 60;
  c.train.batch_size = 8;
  c.train.lr = 0.02;
  c.train.weight_decay = 5e-3;
  c.train.warmup_iters = 100;
  c.train.warmup_factor = 0.01;
  c.train.milestones = {45, 54};
  c.train.decay = 0.1;
  c.train.grad_clip = 5.0;
  return c;
}

RunConfig preset(const std::string& name) {
  if (name == "toy") return toy_preset();
  if (name == "full") return full_preset();
  throw ConfigError("unknown preset '" + name + "' (expected toy or full)");
}

std::string config_hash(const RunConfig& config) {
  json j = config;
  j["train"].erase("epochs");
  const std::string text = j.dump();
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

double learning_rate(const TrainConfig& c, long iteration, int epoch) {
  double lr = c.lr;
  for (int m : c.milestones)
    if (epoch >= m) lr *= c.decay;
  if (iteration < c.warmup_iters) {
    const double alpha = static_cast<double>(iteration) / c.warmup_iters;
    lr *= c.warmup_factor * (1.0 - alpha) + alpha;
  }
  return lr;
}

namespace {

void sgd_step(ParameterSet& params, TrainState& state, const TrainConfig& c, double lr, double grad_scale) {
  auto& all = params.all();
  if (state.momentum.empty()) {
    for (const Parameter& p : all) state.momentum.emplace_back(p.var.shape(), 0.0);
  }
  if (state.momentum.size() != all.size()) throw ConfigError("optimizer state does not match the parameters");
  double clip = 1.0;
  if (c.grad_clip > 0.0) {
    double sq = 0;
    for (const Parameter& p : all)
      for (double g : p.var.grad().values()) sq += g * g * grad_scale * grad_scale;
    const double norm = std::sqrt(sq);
    if (norm > c.grad_clip) clip = c.grad_clip / norm;
  }
  for (std::size_t i = 0; i < all.size(); ++i) {
    Var& v = all[i].var;
    const Tensor& g = v.grad();
    Tensor& w = v.mutable_value();
    Tensor& m = state.momentum[i];
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double grad = g[k] * grad_scale * clip + c.weight_decay * w[k];
      m[k] = c.momentum * m[k] + grad;
      w[k] -= lr * m[k];
    }
  }
  ++state.iteration;
}

}  // namespace

std::vector<EpochLog> train(Model& model, TrainState& state, const RunConfig& config,
                            const std::vector<const SceneSample*>& data, const EpochCallback& on_epoch) {
  config.train.validate();
  if (data.empty()) throw DataError("training set is empty");
  const TrainConfig& tc = config.train;
  std::vector<EpochLog> logs;
  std::vector<std::size_t> order(data.size());
  while (state.epoch < tc.epochs) {
    const int epoch = state.epoch;
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::mt19937_64 rng(tc.seed * 1000003ull + static_cast<std::uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), rng);

    EpochLog log;
    log.epoch = epoch + 1;
    for (std::size_t start = 0; start < order.size(); start += tc.batch_size) {
      const std::size_t end = std::min(order.size(), start + tc.batch_size);
      model.params.zero_grad();
      for (std::size_t b = start; b < end; ++b) {
        LossTerms l = sample_loss(model, *data[order[b]]);
        backward(l.total);
        log.total += l.total.value()[0];
        log.partition += l.partition;
        log.mask += l.mask;
      }
      log.lr = learning_rate(tc, state.iteration, epoch);
      sgd_step(model.params, state, tc, log.lr, 1.0 / static_cast<double>(end - start));
    }
    const double n = static_cast<double>(data.size());
    log.total /= n;
    log.partition /= n;
    log.mask /= n;
    state.epoch = epoch + 1;
    logs.push_back(log);
    if (on_epoch) on_epoch(log, model, state);
  }
  return logs;
}

std::vector<double> overfit(Model& model, const RunConfig& config, const SceneSample& sample, int steps) {
  config.train.validate();
  TrainState state;
  std::vector<double> trace;
  for (int s = 0; s <= steps; ++s) {
    model.params.zero_grad();
    LossTerms l = sample_loss(model, sample);
    trace.push_back(l.total.value()[0]);
    if (s == steps) break;
    backward(l.total);
    sgd_step(model.params, state, config.train, learning_rate(config.train, state.iteration, 0), 1.0);
  }
  return trace;
}

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoints store little-endian doubles");

json tensor_json(const Tensor& t) {
  std::vector<std::uint8_t> bytes(t.size() * sizeof(double));
  std::memcpy(bytes.data(), t.data(), bytes.size());
  return json{{"shape", t.shape()}, {"data", base64_encode(bytes)}};
}

Tensor tensor_from_json(const json& j, const std::string& where) {
  Shape shape = j.at("shape").get<Shape>();
  auto bytes = base64_decode(j.at("data").get<std::string>());
  const std::size_t n = shape_numel(shape);
  if (!bytes || bytes->size() != n * sizeof(double)) throw LoadError(where + ": tensor payload size mismatch");
  std::vector<double> values(n);
  std::memcpy(values.data(), bytes->data(), bytes->size());
  return Tensor(std::move(shape), std::move(values));
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Model& model, const TrainState& state,
                     const RunConfig& config) {
  json j;
  j["version"] = kCheckpointVersion;
  j["config"] = config;
  j["config_hash"] = config_hash(config);
  j["seed"] = config.train.seed;
  j["epoch"] = state.epoch;
  j["iteration"] = state.iteration;
  json params = json::object(), momentum = json::object();
  const auto& all = model.params.all();
  for (std::size_t i = 0; i < all.size(); ++i) {
    params[all[i].name] = tensor_json(all[i].var.value());
    if (!state.momentum.empty()) momentum[all[i].name] = tensor_json(state.momentum[i]);
  }
  j["parameters"] = std::move(params);
  j["momentum"] = std::move(momentum);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out << j.dump() << "\n";
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open checkpoint " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  Checkpoint ck;
  try {
    json j = json::parse(ss.str());
    if (j.at("version").get<std::string>() != kCheckpointVersion) {
      throw LoadError(path.string() + ": unsupported checkpoint version");
    }
    from_json(j.at("config"), ck.config);
    ck.hash = j.at("config_hash").get<std::string>();
    if (ck.hash != config_hash(ck.config)) throw LoadError(path.string() + ": config hash does not match its config");
    ck.state.epoch = j.at("epoch").get<int>();
    ck.state.iteration = j.at("iteration").get<long>();
    for (const auto& [name, t] : j.at("parameters").items()) ck.params[name] = tensor_from_json(t, path.string());
    const json& mom = j.at("momentum");
    if (!mom.empty()) {
      // Momentum follows parameter registration order, restored by restore().
      Model probe(ck.config.model, 0);
      for (const Parameter& p : probe.params.all()) {
        if (!mom.contains(p.name)) throw LoadError(path.string() + ": momentum for '" + p.name + "' missing");
        ck.state.momentum.push_back(tensor_from_json(mom.at(p.name), path.string()));
      }
    }
  } catch (const json::exception& e) {
    throw LoadError(path.string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw LoadError(path.string() + ": " + e.what());
  }
  return ck;
}

void restore(Model& model, const Checkpoint& ckpt) {
  for (Parameter& p : model.params.all()) {
    auto it = ckpt.params.find(p.name);
    if (it == ckpt.params.end()) throw LoadError("checkpoint lacks parameter '" + p.name + "'");
    if (it->second.shape() != p.var.shape()) {
      throw LoadError("checkpoint parameter '" + p.name + "' has shape " + shape_str(it->second.shape()) +
                      ", model expects " + shape_str(p.var.shape()));
    }
    p.var.mutable_value() = it->second;
  }
  if (ckpt.params.size() != model.params.all().size()) throw LoadError("checkpoint has unexpected parameters");
}

std::vector<SceneInstance> to_instances(const std::vector<RankedInstance>& ranked) {
  std::vector<SceneInstance> out;
  for (const RankedInstance& r : ranked) out.push_back({r.mask, r.rank});
  return out;
}

MetricReport evaluate(const Model& model, const Dataset& dataset, const std::string& split,
                      const EvalOptions& options) {
  if (model.config.num_ranks != dataset.num_ranks) {
    throw ConfigError("model predicts N=" + std::to_string(model.config.num_ranks) + " ranks, dataset has N=" +
                      std::to_string(dataset.num_ranks));
  }
  const std::vector<const SceneSample*> samples = dataset.split(split);
  if (samples.empty()) throw DataError("split '" + split + "' is empty");
  const int n = dataset.num_ranks;
  std::vector<ImageMetrics> results(samples.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < samples.size(); i = next++) {
      const SceneSample& s = *samples[i];
      std::vector<SceneInstance> preds = options.gt_passthrough ? s.instances : to_instances(predict(model, s.image));
      results[i] = evaluate_image(preds, s.instances, n, s.height(), s.width(), options.match_iou);
    }
  };
  int threads = options.threads > 0 ? options.threads : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::clamp(threads, 1, static_cast<int>(samples.size()));
  std::vector<std::thread> pool;
  std::exception_ptr failure;
  std::mutex failure_mutex;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      try {
        worker();
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = samples.size();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return aggregate(results, n);
}

}  // namespace psr
