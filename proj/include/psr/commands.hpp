#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "psr/data_synth.hpp"
#include "psr/training.hpp"

namespace psr {

struct GenOptions {
  GenConfig gen;
  int train = 200;
  int test = 50;
  std::uint64_t seed = 0;
  ImageEncoding encoding = ImageEncoding::kBase64;
  int threads = 0;
};

/// Sample i uses seed sample_seed(seed, i); ids are zero-padded indices,
/// the first `train` samples form the train split.
Dataset generate_dataset(const GenOptions& options);
void cmd_gen(const GenOptions& options, const std::filesystem::path& out_dir);

/// Sets a dotted key ("model.channels", "train.lr") from text. Text that
/// parses as JSON is used as such, anything else as a string.
void apply_override(nlohmann::json& config, const std::string& assignment);

struct TrainRun {
  std::filesystem::path checkpoint;
  std::filesystem::path log;
  std::vector<EpochLog> epochs;  // epochs run by this invocation
};

/// Trains on the train split and writes config.json, train_log.csv and
/// checkpoint.json into `out_dir`. With `resume`, continues from the
/// existing checkpoint after checking its config hash.
TrainRun cmd_train(const RunConfig& config, const std::filesystem::path& data_dir,
                   const std::filesystem::path& out_dir, bool resume = false, std::ostream* progress = nullptr);

struct EvalCommandOptions {
  std::string split = "test";
  bool gt_passthrough = false;
  bool sor_normalized = false;
  int threads = 0;
};

nlohmann::json cmd_eval(const std::filesystem::path& checkpoint, const std::filesystem::path& data_dir,
                        const EvalCommandOptions& options = {});

struct BenchRange {
  int lo = 1;
  int hi = 1;
};

/// CSV: S,H,W,dpt_pairs,all_scale_pairs,ratio; with `instrumented`, two
/// more columns hold the counts measured by running both attention forms.
void cmd_bench_attention(BenchRange s, BenchRange h, BenchRange w, bool instrumented, std::ostream& out,
                         std::uint64_t seed = 0);

/// Trains and evaluates both head types for every seed with otherwise
/// identical configs; writes per-run artifacts under out_dir/<head>_seed<k>
/// and returns the side-by-side report (also written to ablation.json).
nlohmann::json cmd_ablate(const RunConfig& config, const std::filesystem::path& data_dir,
                          const std::filesystem::path& out_dir, const std::vector<std::uint64_t>& seeds,
                          int eval_threads = 0, std::ostream* progress = nullptr);

}  // namespace psr
