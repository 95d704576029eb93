// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset (default: all). Exit status is nonzero if any
// selected criterion fails.

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "metric_oracles.hpp"
#include "model_fixtures.hpp"
#include "p2r_reference.hpp"
#include "psr/commands.hpp"
#include "psr/dpt.hpp"
#include "psr/grad_check.hpp"
#include "psr/heads.hpp"
#include "psr/losses.hpp"
#include "psr/p2r.hpp"
#include "psr/sorting_head.hpp"
#include "test_util.hpp"

using namespace psr;
using psr::testing::project;
using psr::testing::random_tensor;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double cpu_seconds() { return static_cast<double>(std::clock()) / CLOCKS_PER_SEC; }

std::string fmt(double v, int precision = 4) {
  std::ostringstream ss;
  ss.precision(precision);
  ss << v;
  return ss.str();
}

// ---------------------------------------------------------------- 1

Tensor away_from_zero(Shape shape, Rng& rng) {
  Tensor t = random_tensor(std::move(shape), rng, 0.1, 1.0);
  std::bernoulli_distribution sign(0.5);
  for (double& v : t.values())
    if (sign(rng)) v = -v;
  return t;
}

PyramidFeatures pyramid_of(const std::vector<Var>& vars) {
  PyramidFeatures p;
  for (std::size_t i = 0; i < vars.size(); ++i) p.grids.push_back({static_cast<int>(i), vars[i]});
  return p;
}

Var project_pyramid(const PyramidFeatures& p) {
  Var total = project(p.grids[0].data, 1);
  for (std::size_t i = 1; i < p.size(); ++i) total = add(total, project(p.grids[i].data, 1 + i));
  return total;
}

MhsaParams mhsa_from(const std::vector<Var>& in, std::size_t first) {
  return {in[first], in[first + 1], in[first + 2], in[first + 3],
          in[first + 4], in[first + 5], in[first + 6], in[first + 7]};
}

Outcome criterion_gradients() {
  const double start = cpu_seconds();
  Rng rng(1);
  auto r = [&](Shape s) { return random_tensor(std::move(s), rng); };
  auto mhsa_inputs = [&](int d) {
    std::vector<Tensor> t;
    for (int i = 0; i < 4; ++i) t.push_back(xavier_init(d, d, rng));
    for (int i = 0; i < 4; ++i) t.push_back(random_tensor({d}, rng, -0.1, 0.1));
    return t;
  };
  auto with = [](std::vector<Tensor> head, const std::vector<Tensor>& tail) {
    head.insert(head.end(), tail.begin(), tail.end());
    return head;
  };

  DptConfig dc;
  dc.channels = 8;
  dc.heads = 2;
  dc.gn_groups = 2;
  dc.layers = 1;
  dc.conv_layers = 1;
  ParameterSet set;
  Rng prng(2);
  const CgrParams cgr_p = make_cgr(set, dc, prng);
  const DptParams dpt_p = make_dpt(set, dc, prng);
  const PartitionHeadParams part_p = make_partition_head(set, 8, 3, prng);
  const SortingHeadParams sort_p = make_sorting_head(set, 8, 3, prng);
  const MaskHeadParams mask_p = make_mask_head(set, {8, 8, 8, 8}, 8, 4, prng);
  const std::vector<int> rows{0, 3, 4};

  Tensor probs = random_tensor({5, 4}, rng, 0.05, 1.0);
  for (int i = 0; i < 5; ++i) {
    double z = 0;
    for (int j = 0; j < 4; ++j) z += probs.at(i, j);
    for (int j = 0; j < 4; ++j) probs.at(i, j) /= z;
  }
  Tensor binary({2, 3, 3});
  for (std::size_t i = 0; i < binary.size(); ++i) binary[i] = static_cast<double>(rng() % 2);

  struct Case {
    std::string name;
    ScalarFn fn;
    std::vector<Tensor> inputs;
  };
  std::vector<Case> cases{
      {"add", [](auto& in) { return project(add(in[0], in[1])); }, {r({3, 4}), r({3, 4})}},
      {"sub", [](auto& in) { return project(sub(in[0], in[1])); }, {r({3, 4}), r({3, 4})}},
      {"mul", [](auto& in) { return project(mul(in[0], in[1])); }, {r({3, 4}), r({3, 4})}},
      {"scale", [](auto& in) { return project(scale(in[0], -1.7)); }, {r({5})}},
      {"add_scalar", [](auto& in) { return project(add_scalar(in[0], 0.3)); }, {r({5})}},
      {"sum", [](auto& in) { return scale(sum(mul(in[0], in[0])), 0.5); }, {r({2, 3})}},
      {"mean", [](auto& in) { return mean(mul(in[0], in[0])); }, {r({2, 3})}},
      {"log", [](auto& in) { return project(log(in[0])); }, {random_tensor({6}, rng, 0.2, 2.0)}},
      {"sigmoid", [](auto& in) { return project(sigmoid(in[0])); }, {r({6})}},
      {"relu", [](auto& in) { return project(relu(in[0])); }, {away_from_zero({8}, rng)}},
      {"leaky_relu", [](auto& in) { return project(leaky_relu(in[0], 0.1)); }, {away_from_zero({8}, rng)}},
      {"add_channel_bias", [](auto& in) { return project(add_channel_bias(in[0], in[1])); }, {r({3, 2, 2}), r({3})}},
      {"reshape", [](auto& in) { return project(reshape(in[0], {3, 4})); }, {r({2, 6})}},
      {"permute", [](auto& in) { return project(permute(in[0], {2, 0, 1})); }, {r({2, 3, 4})}},
      {"stack", [](auto& in) { return project(stack({in[0], in[1]})); }, {r({2, 3}), r({2, 3})}},
      {"select", [](auto& in) { return project(select(in[0], 1)); }, {r({3, 2, 2})}},
      {"concat", [](auto& in) { return project(concat({in[0], in[1]})); }, {r({2, 3}), r({1, 3})}},
      {"gather_rows", [](auto& in) { return project(gather_rows(in[0], {2, 0, 2})); }, {r({3, 4})}},
      {"matmul", [](auto& in) { return project(matmul(in[0], in[1])); }, {r({3, 4}), r({4, 2})}},
      {"linear", [](auto& in) { return project(linear(in[0], in[1], in[2])); }, {r({2, 3, 4}), r({4, 5}), r({5})}},
      {"softmax", [](auto& in) { return project(softmax(in[0], 1)); }, {r({3, 4, 2})}},
      {"conv2d", [](auto& in) { return project(conv2d(in[0], in[1], in[2])); }, {r({2, 5, 5}), r({3, 2, 3, 3}), r({3})}},
      {"conv2d_stride2", [](auto& in) { return project(conv2d(in[0], in[1], in[2], 2)); },
       {r({2, 6, 6}), r({3, 2, 3, 3}), r({3})}},
      {"group_norm", [](auto& in) { return project(group_norm(in[0], 2, in[1], in[2])); },
       {r({4, 3, 3}), r({4}), r({4})}},
      {"interpolate_up", [](auto& in) { return project(interpolate(in[0], 5, 7)); }, {r({2, 3, 2})}},
      {"interpolate_down", [](auto& in) { return project(interpolate(in[0], 2, 3)); }, {r({2, 5, 6})}},
      {"attention_core", [](auto& in) { return project(attention_core(in[0], in[1], in[2], 2)); },
       {r({2, 3, 4}), r({2, 3, 4}), r({2, 3, 4})}},
      {"mhsa", [](auto& in) { return project(mhsa(in[0], mhsa_from(in, 1), 2)); }, with({r({2, 4, 4})}, mhsa_inputs(4))},
      {"row_attention", [](auto& in) { return project(row_attention(in[0], mhsa_from(in, 1), 2)); },
       with({r({4, 3, 2})}, mhsa_inputs(4))},
      {"column_attention", [](auto& in) { return project(column_attention(in[0], mhsa_from(in, 1), 2)); },
       with({r({4, 3, 2})}, mhsa_inputs(4))},
      {"cgr", [&](auto& in) { return project_pyramid(cgr(pyramid_of(in), cgr_p, dc)); }, {r({8, 3, 3}), r({8, 2, 2})}},
      {"cross_scale_attention",
       [&](auto& in) { return project_pyramid(cross_scale_attention(pyramid_of(in), dpt_p.layers[0].cross_scale, dc)); },
       {r({8, 3, 3}), r({8, 2, 2})}},
      {"all_scale_attention",
       [&](auto& in) { return project_pyramid(all_scale_attention(pyramid_of(in), dpt_p.layers[0].cross_scale, dc)); },
       {r({8, 3, 3}), r({8, 2, 2})}},
      {"clcg", [&](auto& in) { return project_pyramid(clcg(pyramid_of(in), dpt_p.layers[0].clcg, dc)); },
       {r({8, 3, 3}), r({8, 2, 2})}},
      {"dpt_forward", [&](auto& in) { return project_pyramid(dpt_forward(pyramid_of(in), dc, dpt_p)); },
       {r({8, 3, 3}), r({8, 2, 2})}},
      {"gather_cells", [](auto& in) { return project(gather_cells(in)); }, {r({3, 2, 2}), r({3, 1, 1})}},
      {"partition_forward", [&](auto& in) { return project(partition_forward(pyramid_of(in), part_p)); },
       {r({8, 3, 3}), r({8, 2, 2})}},
      {"sorting_head_forward", [&](auto& in) { return project(sorting_head_forward(pyramid_of(in), sort_p)); },
       {r({8, 3, 3}), r({8, 2, 2})}},
      {"mask_kernels", [&](auto& in) { return project(mask_kernels(pyramid_of(in), mask_p)); },
       {r({8, 3, 3}), r({8, 2, 2})}},
      {"global_mask_features",
       [&](auto& in) { return project(global_mask_features(in, 16, 16, mask_p)); },
       {r({8, 8, 8}), r({8, 4, 4}), r({8, 2, 2}), r({8, 1, 1})}},
      {"dynamic_masks", [&](auto& in) { return project(dynamic_masks(in[0], in[1], rows)); },
       {r({5, 4}), r({4, 3, 3})}},
      {"focal_loss", [&](auto& in) { return focal_loss(in[0], binary); }, {random_tensor({2, 3, 3}, rng, 0.05, 0.95)}},
      {"dice_loss", [&](auto& in) { return dice_loss(in[0], binary); }, {random_tensor({2, 3, 3}, rng, 0.05, 0.95)}},
      {"cross_entropy", [&](auto& in) { return cross_entropy(in[0], {0, 3, 1, 2, 3}); }, {probs}},
  };

  int failures = 0;
  double worst = 0.0;
  std::string worst_name, failed;
  for (const Case& c : cases) {
    std::size_t elements = 0;
    for (const Tensor& t : c.inputs) elements += t.size();
    if (elements > 1000) throw std::logic_error(c.name + " exceeds 1000 input elements");
    GradCheckReport rep = grad_check(c.name, c.fn, c.inputs, 1e-3);
    if (rep.max_rel_error > worst) {
      worst = rep.max_rel_error;
      worst_name = c.name;
    }
    if (!rep.passed) {
      ++failures;
      failed += " " + c.name;
    }
  }

  for (HeadType head : {HeadType::kPartition, HeadType::kSorting}) {
    Model m(psr::testing::tiny_model(head), 3);
    SceneSample s = generate_scene(psr::testing::tiny_scenes(), 11);
    psr::testing::FdResult fd = psr::testing::check_parameters(m, s, 6);
    const std::string name = "total_loss/" + head_name(head);
    if (fd.max_rel > worst) {
      worst = fd.max_rel;
      worst_name = name;
    }
    if (!(fd.max_rel < 1e-3) || fd.checked > 1000) {
      ++failures;
      failed += " " + name;
    }
  }
  const double secs = cpu_seconds() - start;
  const std::size_t total = cases.size() + 2;
  return {failures == 0 && secs < 120.0,
          std::to_string(total - failures) + "/" + std::to_string(total) + " checks below 1e-3 (worst " +
              worst_name + " " + fmt(worst, 3) + ")" + (failed.empty() ? "" : ", failed:" + failed) + ", " +
              fmt(secs, 3) + " s CPU (limit 120)"};
}

// ---------------------------------------------------------------- 2

Outcome criterion_complexity() {
  int mismatches = 0, order_violations = 0;
  for (int s = 1; s <= 5; ++s)
    for (int h = 1; h <= 8; ++h)
      for (int w = 1; w <= 8; ++w) {
        const PairCountReport a = count_attention_pairs(s, h, w);
        const PairCountReport m = measure_attention_pairs(s, h, w, 7);
        if (a.dpt_pairs != m.dpt_pairs || a.all_scale_pairs != m.all_scale_pairs) ++mismatches;
        if (s >= 2 && h >= 2 && w >= 2 && !(a.dpt_pairs < a.all_scale_pairs)) ++order_violations;
      }
  const PairCountReport ex = count_attention_pairs(2, 4, 4);
  const bool example = ex.dpt_pairs == 320 && ex.all_scale_pairs == 1024;
  return {mismatches == 0 && order_violations == 0 && example,
          std::to_string(mismatches) + " analytic/instrumented mismatches over 320 configs, " +
              std::to_string(order_violations) + " ordering violations, S=2,H=W=4: " + std::to_string(ex.dpt_pairs) +
              " vs " + std::to_string(ex.all_scale_pairs)};
}

// ---------------------------------------------------------------- 3

Outcome criterion_p2r_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2024);
  const P2RConfig config;
  int mismatches = 0;
  for (int t = 0; t < 1000; ++t) {
    auto cands = psr::testing::random_candidates(rng);
    auto out = select_ranks(alleviate(cands, config.threshold), 5, config);
    if (out != psr::testing::p2r_reference(cands, 5, config.threshold, config.nms_iou)) ++mismatches;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {mismatches == 0 && secs < 10.0,
          std::to_string(mismatches) + "/1000 mismatches, " + fmt(secs, 3) + " s (limit 10)"};
}

// ---------------------------------------------------------------- 4

Outcome criterion_alleviation() {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double t = 0.3;
  int bad_survivors = 0, unwitnessed = 0, survivors = 0;
  for (int i = 0; i < 10000; ++i) {
    const int n = 1 + static_cast<int>(rng() % 8);
    InstanceCandidate c;
    c.partition.resize(n);
    for (double& v : c.partition) v = u(rng);
    c.row = i;
    auto kept = alleviate({c}, t);
    if (!kept.empty()) {
      ++survivors;
      for (int j = 1; j < n; ++j)
        if ((c.partition[j - 1] >= t) > (c.partition[j] >= t)) ++bad_survivors;
    } else {
      bool witness = false;
      for (int a = 0; a < n && !witness; ++a)
        for (int b = a + 1; b < n && !witness; ++b) witness = c.partition[a] >= t && c.partition[b] < t;
      if (!witness) ++unwitnessed;
    }
  }
  return {bad_survivors == 0 && unwitnessed == 0,
          std::to_string(survivors) + " survivors, " + std::to_string(bad_survivors) + " non-monotone, " +
              std::to_string(10000 - survivors) + " discards, " + std::to_string(unwitnessed) + " without witness"};
}

// ---------------------------------------------------------------- 5

Outcome criterion_metrics() {
  std::mt19937_64 rng(77);
  double worst = 0.0;
  int definedness = 0;
  for (int t = 0; t < 1000; ++t) {
    const int n = 2 + static_cast<int>(rng() % 8);
    std::vector<double> xs(n), ys(n);
    for (int i = 0; i < n; ++i) {
      xs[i] = 1 + static_cast<int>(rng() % 5);
      ys[i] = 1 + static_cast<int>(rng() % 5);
    }
    auto s = spearman(xs, ys), so = psr::testing::spearman_oracle(xs, ys);
    auto p = pearson(xs, ys), po = psr::testing::pearson_oracle(xs, ys);
    if (s.has_value() != so.has_value() || p.has_value() != po.has_value()) ++definedness;
    if (s && so) worst = std::max(worst, std::abs(*s - *so));
    if (p && po) worst = std::max(worst, std::abs(*p - *po));
  }

  Dataset ds = psr::testing::tiny_dataset(0, 20, 5);
  ds.entries[0].split = "train";
  double self_mae = 0.0;
  for (const auto& e : ds.entries) {
    std::vector<SceneInstance> x = e.sample.instances;
    self_mae = std::max(self_mae, mae(x, x, ds.num_ranks, e.sample.height(), e.sample.width()));
  }
  Model model(psr::testing::tiny_model(), 0);
  EvalOptions gt;
  gt.gt_passthrough = true;
  MetricReport r = evaluate(model, ds, "test", gt);
  const bool passthrough = r.mae == 0.0 && r.sor && std::abs(*r.sor - 1.0) < 1e-12 && r.sa_sor &&
                           std::abs(*r.sa_sor - 1.0) < 1e-12;
  return {worst < 1e-9 && definedness == 0 && self_mae == 0.0 && passthrough,
          "max oracle deviation " + fmt(worst, 3) + " (limit 1e-9), " + std::to_string(definedness) +
              " definedness mismatches, mae(x,x)=" + fmt(self_mae) + ", GT passthrough mae=" + fmt(r.mae) +
              " sor=" + (r.sor ? fmt(*r.sor, 12) : "null") + " sa_sor=" + (r.sa_sor ? fmt(*r.sa_sor, 12) : "null")};
}

// ---------------------------------------------------------------- 6

Outcome criterion_overfit() {
  const double start = cpu_seconds();
  RunConfig rc = toy_preset();
  Model model(rc.model, 0);
  SceneSample sample = generate_scene(GenConfig{}, sample_seed(0, 0));
  std::vector<double> trace = overfit(model, rc, sample, 500);
  const double secs = cpu_seconds() - start;
  const double best = *std::min_element(trace.begin(), trace.end());
  const double drop = 1.0 - best / trace.front();
  return {drop >= 0.9 && secs < 300.0,
          "loss " + fmt(trace.front()) + " -> " + fmt(best) + " (final " + fmt(trace.back()) + "), drop " +
              fmt(100 * drop, 3) + "% (need >= 90%), " + fmt(secs, 3) + " s CPU (limit 300)"};
}

// ---------------------------------------------------------------- 7, 8

struct DeskRun {
  MetricReport report;
  double cpu = 0.0;
};

class DeskScale {
 public:
  const Dataset& data() {
    if (data_.entries.empty()) {
      GenOptions o;  // 200 train / 50 test, 64x64, N=3
      data_ = generate_dataset(o);
    }
    return data_;
  }

  const DeskRun& run(HeadType head, std::uint64_t seed) {
    const auto key = std::make_pair(static_cast<int>(head), seed);
    auto it = runs_.find(key);
    if (it != runs_.end()) return it->second;
    RunConfig rc = toy_preset();
    rc.model.head = head;
    rc.train.seed = seed;
    const double start = cpu_seconds();
    Model model(rc.model, seed);
    TrainState state;
    train(model, state, rc, data().split("train"));
    DeskRun r;
    r.cpu = cpu_seconds() - start;
    EvalOptions eo;
    eo.threads = 1;
    r.report = evaluate(model, data(), "test", eo);
    std::cerr << "  [" << head_name(head) << " seed " << seed << "] " << report_json(r.report).dump() << " in "
              << fmt(r.cpu) << " s CPU\n";
    return runs_.emplace(key, r).first->second;
  }

 private:
  Dataset data_;
  std::map<std::pair<int, std::uint64_t>, DeskRun> runs_;
};

std::string opt(const std::optional<double>& v) { return v ? fmt(*v) : "null"; }

Outcome criterion_desk(DeskScale& desk) {
  const DeskRun& r = desk.run(HeadType::kPartition, 0);
  const MetricReport& m = r.report;
  const bool pass = m.sor && *m.sor >= 0.8 && m.sa_sor && *m.sa_sor >= 0.5 && m.mae <= 0.15 && r.cpu <= 1800.0;
  return {pass, "SOR " + opt(m.sor) + " (>= 0.8), SA-SOR " + opt(m.sa_sor) + " (>= 0.5), MAE " + fmt(m.mae) +
                    " (<= 0.15), training " + fmt(r.cpu) + " s CPU (limit 1800)"};
}

Outcome criterion_ablation(DeskScale& desk) {
  double sor[2] = {0, 0}, sa[2] = {0, 0};
  bool defined = true;
  for (std::uint64_t seed : {0, 1, 2}) {
    for (int h = 0; h < 2; ++h) {
      const MetricReport& m = desk.run(h == 0 ? HeadType::kPartition : HeadType::kSorting, seed).report;
      defined = defined && m.sor && m.sa_sor;
      sor[h] += m.sor.value_or(0.0) / 3;
      sa[h] += m.sa_sor.value_or(0.0) / 3;
    }
  }
  const bool pass = defined && sor[0] >= sor[1] - 0.02 && sa[0] >= sa[1] - 0.02;
  return {pass, "mean SOR partition " + fmt(sor[0]) + " vs sorting " + fmt(sor[1]) + ", mean SA-SOR partition " +
                    fmt(sa[0]) + " vs sorting " + fmt(sa[1]) + " (slack 0.02)" +
                    (defined ? "" : ", some metrics undefined")};
}

// ---------------------------------------------------------------- 9

Outcome criterion_units() {
  int mismatches = 0;
  for (int n = 1; n <= 16; ++n)
    for (int rank = 1; rank <= n; ++rank) {
      const auto v = encode_partition_gt(rank, n);
      for (int j = 1; j <= n; ++j) {
        const bool member = rank <= j;  // instance belongs to partition-j
        if ((v[j - 1] != 0) != member) ++mismatches;
      }
    }
  Var pred(Tensor({1}, 0.5), false);
  const double focal = focal_loss(pred, Tensor({1}, 1.0), FocalParams{0.25, 2.0}).value()[0];
  const double expected = 0.25 * 0.25 * std::log(2.0);
  const double err = std::abs(focal - expected);
  return {mismatches == 0 && err <= 1e-12, std::to_string(mismatches) + " encoding mismatches over N <= 16, focal " +
                                              fmt(focal, 17) + " vs " + fmt(expected, 17) + " (|err| " +
                                              fmt(err, 3) + ", limit 1e-12)"};
}

// ---------------------------------------------------------------- 10

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome criterion_determinism() {
  const fs::path root = fs::temp_directory_path() / ("psr_acceptance_" + std::to_string(std::random_device{}()));
  fs::remove_all(root);
  struct Cleanup {
    fs::path p;
    ~Cleanup() { fs::remove_all(p); }
  } cleanup{root};

  GenOptions go;
  go.train = 24;
  go.test = 8;
  go.seed = 10;
  cmd_gen(go, root / "data");

  RunConfig rc = toy_preset();
  rc.train.epochs = 2;
  rc.train.seed = 3;
  std::string metrics[2], checkpoints[2];
  for (int i = 0; i < 2; ++i) {
    const fs::path out = root / ("run" + std::to_string(i));
    TrainRun run = cmd_train(rc, root / "data", out);
    EvalCommandOptions eo;
    eo.threads = i == 0 ? 1 : 4;
    metrics[i] = cmd_eval(run.checkpoint, root / "data", eo).dump();
    checkpoints[i] = slurp(run.checkpoint);
  }
  const bool metrics_same = metrics[0] == metrics[1];
  const bool ckpt_same = checkpoints[0] == checkpoints[1];

  // Dataset round trip in both encodings.
  Dataset ds = generate_dataset(go);
  bool data_exact = true;
  for (ImageEncoding enc : {ImageEncoding::kBase64, ImageEncoding::kArrays}) {
    const fs::path dir = root / (enc == ImageEncoding::kBase64 ? "b64" : "arrays");
    save_dataset(ds, dir, enc);
    Dataset back = load_dataset(dir);
    data_exact = data_exact && back.num_ranks == ds.num_ranks && back.entries.size() == ds.entries.size();
    for (std::size_t i = 0; data_exact && i < ds.entries.size(); ++i) {
      data_exact = back.entries[i].id == ds.entries[i].id && back.entries[i].split == ds.entries[i].split &&
                   back.entries[i].sample == ds.entries[i].sample;
    }
  }

  // Checkpoint round trip: parameters, momentum and predictions.
  Checkpoint ck = load_checkpoint(root / "run0" / "checkpoint.json");
  Model restored(ck.config.model, 12345);
  restore(restored, ck);
  save_checkpoint(root / "resaved.json", restored, ck.state, ck.config);
  const bool ckpt_exact = slurp(root / "resaved.json") == checkpoints[0];

  return {metrics_same && ckpt_same && data_exact && ckpt_exact,
          std::string("metric JSON ") + (metrics_same ? "identical" : "differs") + ", checkpoints " +
              (ckpt_same ? "identical" : "differ") + ", dataset round trip " + (data_exact ? "exact" : "inexact") +
              ", checkpoint round trip " + (ckpt_exact ? "exact" : "inexact")};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  DeskScale desk;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient suite", criterion_gradients},
      {"attention pair counts", criterion_complexity},
      {"P2R oracle equivalence", criterion_p2r_oracle},
      {"alleviation invariant", criterion_alleviation},
      {"metric oracles", criterion_metrics},
      {"overfit smoke", criterion_overfit},
      {"desk-scale learning", [&] { return criterion_desk(desk); }},
      {"paradigm ablation", [&] { return criterion_ablation(desk); }},
      {"GT encoding and loss values", criterion_units},
      {"determinism and persistence", criterion_determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.contains(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << "criterion " << id << " (" << criteria[i].first << "): " << (o.pass ? "PASS" : "FAIL") << " - "
              << o.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
