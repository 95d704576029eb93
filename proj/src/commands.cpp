#include "psr/commands.hpp"

#include <atomic>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "psr/dpt.hpp"
#include "psr/errors.hpp"

namespace psr {

namespace fs = std::filesystem;
using nlohmann::json;

Dataset generate_dataset(const GenOptions& o) {
  o.gen.validate();
  if (o.train < 0 || o.test < 0 || o.train + o.test == 0) throw ConfigError("dataset needs at least one sample");
  const int total = o.train + o.test;
  Dataset ds;
  ds.num_ranks = o.gen.num_ranks;
  ds.height = ds.width = o.gen.canvas;
  ds.entries.resize(total);
  const int width = static_cast<int>(std::to_string(total - 1).size());

  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    try {
      for (int i = next++; i < total; i = next++) {
        std::ostringstream id;
        id << std::setw(std::max(width, 4)) << std::setfill('0') << i;
        ds.entries[i] = {id.str(), i < o.train ? "train" : "test",
                         generate_scene(o.gen, sample_seed(o.seed, static_cast<std::uint64_t>(i)))};
      }
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
      next = total;
    }
  };
  int threads = o.threads > 0 ? o.threads : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::clamp(threads, 1, total);
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return ds;
}

void cmd_gen(const GenOptions& options, const fs::path& out_dir) {
  Dataset ds = generate_dataset(options);
  save_dataset(ds, out_dir, options.encoding);
}

void apply_override(json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  json* node = &config;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("override key '" + key + "' has an empty component");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

namespace {

void write_json_file(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << "\n";
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

TrainRun cmd_train(const RunConfig& config, const fs::path& data_dir, const fs::path& out_dir, bool resume,
                   std::ostream* progress) {
  config.model.validate();
  config.train.validate();
  Dataset ds = load_dataset(data_dir);
  if (ds.num_ranks != config.model.num_ranks) {
    throw ConfigError("dataset has N=" + std::to_string(ds.num_ranks) + ", config has N=" +
                      std::to_string(config.model.num_ranks));
  }
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + out_dir.string() + ": " + ec.message());

  TrainRun run;
  run.checkpoint = out_dir / "checkpoint.json";
  run.log = out_dir / "train_log.csv";
  Model model(config.model, config.train.seed);
  TrainState state;
  if (resume) {
    Checkpoint ck = load_checkpoint(run.checkpoint);
    const std::string hash = config_hash(config);
    if (ck.hash != hash) {
      throw ConfigError("refusing to resume: checkpoint config hash " + ck.hash + " differs from " + hash);
    }
    restore(model, ck);
    state = ck.state;
  }
  json cfg = config;
  cfg["config_hash"] = config_hash(config);
  write_json_file(out_dir / "config.json", cfg);

  std::ofstream log(run.log, resume ? std::ios::app : std::ios::trunc);
  if (!log) throw std::runtime_error("cannot write " + run.log.string());
  if (!resume) log << "epoch,total,partition,mask,lr\n";
  run.epochs = train(model, state, config, ds.split("train"), [&](const EpochLog& e, const Model&, const TrainState&) {
    log << e.epoch << ',' << format_double(e.total) << ',' << format_double(e.partition) << ','
        << format_double(e.mask) << ',' << format_double(e.lr) << '\n';
    log.flush();
    if (progress) {
      *progress << "epoch " << e.epoch << "/" << config.train.epochs << " loss " << e.total << " (partition "
                << e.partition << ", mask " << e.mask << ") lr " << e.lr << std::endl;
    }
  });
  save_checkpoint(run.checkpoint, model, state, config);
  return run;
}

json cmd_eval(const fs::path& checkpoint, const fs::path& data_dir, const EvalCommandOptions& options) {
  Checkpoint ck = load_checkpoint(checkpoint);
  Model model(ck.config.model, ck.config.train.seed);
  restore(model, ck);
  Dataset ds = load_dataset(data_dir);
  EvalOptions eo;
  eo.gt_passthrough = options.gt_passthrough;
  eo.threads = options.threads;
  MetricReport report = evaluate(model, ds, options.split, eo);
  return report_json(report, options.sor_normalized);
}

void cmd_bench_attention(BenchRange s, BenchRange h, BenchRange w, bool instrumented, std::ostream& out,
                         std::uint64_t seed) {
  for (const BenchRange& r : {s, h, w}) {
    if (r.lo < 1 || r.hi < r.lo) throw ConfigError("bench ranges must satisfy 1 <= lo <= hi");
  }
  out << "S,H,W,dpt_pairs,all_scale_pairs,ratio";
  if (instrumented) out << ",dpt_pairs_measured,all_scale_pairs_measured";
  out << '\n';
  for (int si = s.lo; si <= s.hi; ++si)
    for (int hi = h.lo; hi <= h.hi; ++hi)
      for (int wi = w.lo; wi <= w.hi; ++wi) {
        PairCountReport r = count_attention_pairs(si, hi, wi);
        out << si << ',' << hi << ',' << wi << ',' << r.dpt_pairs << ',' << r.all_scale_pairs << ','
            << format_double(r.ratio());
        if (instrumented) {
          PairCountReport m = measure_attention_pairs(si, hi, wi, seed);
          out << ',' << m.dpt_pairs << ',' << m.all_scale_pairs;
        }
        out << '\n';
      }
}

json cmd_ablate(const RunConfig& config, const fs::path& data_dir, const fs::path& out_dir,
                const std::vector<std::uint64_t>& seeds, int eval_threads, std::ostream* progress) {
  if (seeds.empty()) throw ConfigError("ablation needs at least one seed");
  static const char* kMetrics[] = {"sor", "sa_sor", "mae"};
  json runs = json::array(), per_seed = json::array();
  json sums = {{"sor", 0.0}, {"sa_sor", 0.0}, {"mae", 0.0}};
  json counts = {{"sor", 0}, {"sa_sor", 0}, {"mae", 0}};
  for (std::uint64_t seed : seeds) {
    json reports;
    for (HeadType head : {HeadType::kPartition, HeadType::kSorting}) {
      RunConfig rc = config;
      rc.model.head = head;
      rc.train.seed = seed;
      const fs::path dir = out_dir / (head_name(head) + "_seed" + std::to_string(seed));
      if (progress) *progress << "ablate: training " << head_name(head) << " head, seed " << seed << std::endl;
      TrainRun run = cmd_train(rc, data_dir, dir, false, progress);
      EvalCommandOptions eo;
      eo.threads = eval_threads;
      json metrics = cmd_eval(run.checkpoint, data_dir, eo);
      write_json_file(dir / "metrics.json", metrics);
      runs.push_back({{"head", head_name(head)}, {"seed", seed}, {"config_hash", config_hash(rc)}, {"metrics", metrics}});
      reports[head_name(head)] = metrics;
    }
    json delta = {{"seed", seed}};
    for (const char* m : kMetrics) {
      const json& a = reports["partition"][m];
      const json& b = reports["sorting"][m];
      if (a.is_number() && b.is_number()) {
        const double d = a.get<double>() - b.get<double>();
        delta[m] = d;
        sums[m] = sums[m].get<double>() + d;
        counts[m] = counts[m].get<int>() + 1;
      } else {
        delta[m] = nullptr;
      }
    }
    per_seed.push_back(delta);
  }
  json mean;
  for (const char* m : kMetrics) {
    mean[m] = counts[m].get<int>() > 0 ? json(sums[m].get<double>() / counts[m].get<int>()) : json(nullptr);
  }
  // Mean metric per head, for the direction check.
  json head_means;
  for (const char* head : {"partition", "sorting"}) {
    for (const char* m : kMetrics) {
      double s = 0;
      int n = 0;
      for (const json& r : runs) {
        if (r["head"] == head && r["metrics"][m].is_number()) {
          s += r["metrics"][m].get<double>();
          ++n;
        }
      }
      head_means[head][m] = n > 0 ? json(s / n) : json(nullptr);
    }
  }
  json report = {{"runs", runs},
                 {"deltas", {{"definition", "partition - sorting"}, {"per_seed", per_seed}, {"mean", mean}}},
                 {"mean_metrics", head_means}};
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  write_json_file(out_dir / "ablation.json", report);
  return report;
}

}  // namespace psr
