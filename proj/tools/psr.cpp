// Command-line front end: gen | train | eval | bench-attention | ablate.

#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "psr/commands.hpp"
#include "psr/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Options shared by train and ablate: preset, optional JSON file, dotted
// overrides, and shortcut flags applied last.
struct ConfigFlags {
  std::string preset = "toy";
  std::string file;
  std::vector<std::string> overrides;
  std::optional<int> epochs;
  std::optional<double> lr;
  std::optional<std::string> head;
  std::optional<int> batch_size;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--preset", preset, "Base configuration: toy (desk scale) or full")
        ->check(CLI::IsMember({"toy", "full"}));
    cmd->add_option("--config", file, "JSON file: {\"model\": {...}, \"train\": {...}} or flat {\"model.channels\": 8}")->check(CLI::ExistingFile);
    cmd->add_option("--set", overrides, "Dotted override, e.g. model.channels=16 (repeatable)");
    cmd->add_option("--epochs", epochs, "Number of epochs");
    cmd->add_option("--lr", lr, "Base learning rate");
    cmd->add_option("--head", head, "partition or sorting")->check(CLI::IsMember({"partition", "sorting"}));
    cmd->add_option("--batch-size", batch_size, "Samples per SGD step");
  }

  psr::RunConfig resolve(std::optional<std::uint64_t> seed) const {
    json j = psr::preset(preset);
    if (!file.empty()) {
      std::ifstream in(file);
      json patch;
      try {
        patch = json::parse(in);
      } catch (const json::exception& e) {
        throw psr::ConfigError(file + ": " + e.what());
      }
      if (!patch.is_object()) throw psr::ConfigError(file + ": expected a JSON object");
      // Nested sections merge; flat "section.key" entries act like --set.
      for (const auto& [key, value] : patch.items()) {
        if (key.find('.') != std::string::npos) {
          psr::apply_override(j, key + "=" + value.dump());
        } else {
          j[key].merge_patch(value);
        }
      }
    }
    for (const auto& o : overrides) psr::apply_override(j, o);
    if (epochs) j["train"]["epochs"] = *epochs;
    if (lr) j["train"]["lr"] = *lr;
    if (head) j["model"]["head"] = *head;
    if (batch_size) j["train"]["batch_size"] = *batch_size;
    if (seed) j["train"]["seed"] = *seed;
    psr::RunConfig rc = j.get<psr::RunConfig>();
    rc.model.validate();
    rc.train.validate();
    return rc;
  }
};

psr::BenchRange parse_range(const std::string& text) {
  psr::BenchRange r;
  const auto colon = text.find(':');
  try {
    if (colon == std::string::npos) {
      r.lo = r.hi = std::stoi(text);
    } else {
      r.lo = std::stoi(text.substr(0, colon));
      r.hi = std::stoi(text.substr(colon + 1));
    }
  } catch (const std::exception&) {
    throw psr::ConfigError("range '" + text + "' is not N or LO:HI");
  }
  return r;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      seeds.push_back(std::stoull(item));
    } catch (const std::exception&) {
      throw psr::ConfigError("seed list '" + text + "' is not comma-separated integers");
    }
  }
  return seeds;
}

void emit(const json& j, const std::string& out) {
  if (out.empty()) {
    std::cout << j.dump(2) << "\n";
    return;
  }
  std::ofstream f(out, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + out);
  f << j.dump(2) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Partitioned saliency ranking at desk scale"};
  app.require_subcommand(1);
  std::optional<std::uint64_t> seed;

  // gen
  psr::GenOptions gen;
  std::string gen_out;
  bool arrays = false;
  auto* cmd_gen = app.add_subcommand("gen", "Generate a synthetic dataset");
  cmd_gen->add_option("--n", gen.gen.num_ranks, "Number of ranks N");
  cmd_gen->add_option("--train", gen.train, "Training samples");
  cmd_gen->add_option("--test", gen.test, "Test samples");
  cmd_gen->add_option("--canvas", gen.gen.canvas, "Square canvas side in pixels");
  cmd_gen->add_option("--min-instances", gen.gen.min_instances, "Fewest instances per scene");
  cmd_gen->add_option("--max-instances", gen.gen.max_instances, "Most instances per scene (<= N)");
  cmd_gen->add_option("--min-score-ratio", gen.gen.min_score_ratio, "Reject scenes whose scores are closer");
  cmd_gen->add_flag("--arrays", arrays, "Store images as nested arrays instead of base64 float32");
  cmd_gen->add_option("--threads", gen.threads, "Worker threads (0: all cores)");
  cmd_gen->add_option("--seed", seed, "Base seed");
  cmd_gen->add_option("--out", gen_out, "Output directory")->required();

  // train
  ConfigFlags train_flags;
  std::string train_data, train_out;
  bool resume = false;
  auto* cmd_train = app.add_subcommand("train", "Train a model");
  train_flags.add_to(cmd_train);
  cmd_train->add_option("--data", train_data, "Dataset directory")->required();
  cmd_train->add_option("--out", train_out, "Run directory")->required();
  cmd_train->add_flag("--resume", resume, "Continue from <out>/checkpoint.json");
  cmd_train->add_option("--seed", seed, "Initialization and shuffling seed");

  // eval
  psr::EvalCommandOptions eval;
  std::string eval_ckpt, eval_data, eval_out;
  auto* cmd_eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  cmd_eval->add_option("--checkpoint", eval_ckpt, "Checkpoint file")->required();
  cmd_eval->add_option("--data", eval_data, "Dataset directory")->required();
  cmd_eval->add_option("--split", eval.split, "Split to evaluate");
  cmd_eval->add_flag("--gt-passthrough", eval.gt_passthrough, "Score ground truth as predictions (debug)");
  cmd_eval->add_flag("--sor-normalized", eval.sor_normalized, "Also report (sor + 1) / 2");
  cmd_eval->add_option("--threads", eval.threads, "Worker threads (0: all cores)");
  cmd_eval->add_option("--out", eval_out, "Write the report here instead of stdout");
  cmd_eval->add_option("--seed", seed, "Accepted for uniformity; evaluation is deterministic");

  // bench-attention
  std::string bench_s = "1:5", bench_h = "1:8", bench_w = "1:8", bench_out;
  bool instrumented = false;
  auto* cmd_bench = app.add_subcommand("bench-attention", "Pair counts of DPT vs all-scale attention");
  cmd_bench->add_option("--scales", bench_s, "Scale count S as N or LO:HI");
  cmd_bench->add_option("--height", bench_h, "Grid height H as N or LO:HI");
  cmd_bench->add_option("--width", bench_w, "Grid width W as N or LO:HI");
  cmd_bench->add_flag("--instrumented", instrumented, "Append counts measured by running the attention");
  cmd_bench->add_option("--out", bench_out, "CSV file (default stdout)");
  cmd_bench->add_option("--seed", seed, "Seed of the instrumented weights");

  // ablate
  ConfigFlags ablate_flags;
  std::string ablate_data, ablate_out, ablate_seeds = "0,1,2";
  int ablate_threads = 0;
  auto* cmd_ablate = app.add_subcommand("ablate", "Partition vs sorting head on the same trunk");
  ablate_flags.add_to(cmd_ablate);
  cmd_ablate->add_option("--data", ablate_data, "Dataset directory")->required();
  cmd_ablate->add_option("--out", ablate_out, "Output directory")->required();
  cmd_ablate->add_option("--seeds", ablate_seeds, "Comma-separated seeds");
  cmd_ablate->add_option("--threads", ablate_threads, "Evaluation threads (0: all cores)");
  cmd_ablate->add_option("--seed", seed, "Single seed (overrides --seeds)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_gen->parsed()) {
      gen.seed = seed.value_or(0);
      gen.encoding = arrays ? psr::ImageEncoding::kArrays : psr::ImageEncoding::kBase64;
      psr::cmd_gen(gen, gen_out);
      std::cout << "wrote " << gen.train + gen.test << " samples to " << gen_out << "\n";
    } else if (cmd_train->parsed()) {
      psr::RunConfig rc = train_flags.resolve(seed);
      psr::TrainRun run = psr::cmd_train(rc, train_data, train_out, resume, &std::cerr);
      std::cout << "checkpoint " << run.checkpoint.string() << "\nlog " << run.log.string() << "\n";
    } else if (cmd_eval->parsed()) {
      emit(psr::cmd_eval(eval_ckpt, eval_data, eval), eval_out);
    } else if (cmd_bench->parsed()) {
      const auto s = parse_range(bench_s), h = parse_range(bench_h), w = parse_range(bench_w);
      if (bench_out.empty()) {
        psr::cmd_bench_attention(s, h, w, instrumented, std::cout, seed.value_or(0));
      } else {
        std::ofstream f(bench_out, std::ios::trunc);
        if (!f) throw std::runtime_error("cannot write " + bench_out);
        psr::cmd_bench_attention(s, h, w, instrumented, f, seed.value_or(0));
      }
    } else if (cmd_ablate->parsed()) {
      psr::RunConfig rc = ablate_flags.resolve(std::nullopt);
      const auto seeds = seed ? std::vector<std::uint64_t>{*seed} : parse_seeds(ablate_seeds);
      emit(psr::cmd_ablate(rc, ablate_data, ablate_out, seeds, ablate_threads, &std::cerr), "");
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
