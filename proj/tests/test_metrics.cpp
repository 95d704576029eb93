#include <random>

#include "doctest.h"
#include "metric_oracles.hpp"
#include "psr/metrics.hpp"

using namespace psr;
using psr::testing::pearson_oracle;
using psr::testing::rank_transform_oracle;
using psr::testing::spearman_oracle;

namespace {

BinaryMask box(int side, int y0, int x0, int h, int w) {
  BinaryMask m(side, side);
  for (int y = y0; y < y0 + h; ++y)
    for (int x = x0; x < x0 + w; ++x) m.at(y, x) = 1;
  return m;
}

// Three disjoint GT boxes on a 16x16 canvas with ranks 1, 2, 3.
std::vector<SceneInstance> three_gts() {
  return {{box(16, 0, 0, 4, 4), 1}, {box(16, 8, 0, 4, 4), 2}, {box(16, 0, 8, 4, 4), 3}};
}

std::vector<SceneInstance> with_ranks(std::vector<SceneInstance> v, std::vector<int> ranks) {
  for (std::size_t i = 0; i < v.size(); ++i) v[i].rank = ranks[i];
  return v;
}

}  // namespace

TEST_CASE("match_instances") {
  auto gts = three_gts();
  SUBCASE("identical sets") {
    auto m = match_instances(gts, gts);
    REQUIRE(m.pairs.size() == 3);
    for (const auto& p : m.pairs) {
      CHECK(p.iou == 1.0);
      CHECK(p.gt == p.pred);
    }
    CHECK(m.unmatched_gt.empty());
  }
  SUBCASE("no overlaps") {
    auto m = match_instances({{box(16, 12, 12, 4, 4), 1}}, gts);
    CHECK(m.pairs.empty());
    CHECK(m.unmatched_gt.size() == 3);
    CHECK(m.unmatched_pred.size() == 1);
  }
  SUBCASE("greedy prefers the higher IoU") {
    // GT 10x10 = 100 px. Pred A covers 90 px inside the GT (IoU 0.9); pred B
    // covers the GT plus 66 px outside (IoU 100/166 ~ 0.6).
    std::vector<SceneInstance> g{{box(32, 0, 0, 10, 10), 1}};
    std::vector<SceneInstance> p{{box(32, 0, 0, 10, 16) , 1}, {box(32, 0, 0, 9, 10), 2}};
    auto m = match_instances(p, g);
    REQUIRE(m.pairs.size() == 1);
    CHECK(m.pairs[0].pred == 1);
    CHECK(m.pairs[0].iou == doctest::Approx(0.9));
    CHECK(m.unmatched_pred == std::vector<int>{0});
  }
}

TEST_CASE("sor") {
  auto gts = three_gts();
  CHECK(*sor(match_instances(gts, gts)) == doctest::Approx(1.0));
  CHECK(*sor(match_instances(with_ranks(gts, {3, 2, 1}), gts)) == doctest::Approx(-1.0));
  CHECK(*sor(match_instances(with_ranks(gts, {1, 3, 2}), gts)) == doctest::Approx(0.5));
  CHECK_FALSE(sor(match_instances({gts[0]}, gts)).has_value());
  CHECK_FALSE(sor(match_instances(with_ranks(gts, {1, 1, 1}), gts)).has_value());
}

TEST_CASE("sa_sor") {
  auto gts = three_gts();
  CHECK(*sa_sor(match_instances(gts, gts), 3) == doctest::Approx(1.0));
  std::vector<SceneInstance> two{gts[0], gts[1]};
  CHECK_FALSE(sa_sor(match_instances({}, two), 3).has_value());
  // Third GT unmatched: values (3,2,1) vs (3,2,0).
  auto m = match_instances({gts[0], gts[1]}, gts);
  CHECK(*sa_sor(m, 3) == doctest::Approx(*pearson_oracle({3, 2, 1}, {3, 2, 0})).epsilon(1e-12));
  // Missing the most salient instance costs more than missing the least.
  auto miss_first = match_instances({gts[1], gts[2]}, gts);
  CHECK(*sa_sor(miss_first, 3) < *sa_sor(m, 3));
}

TEST_CASE("mae") {
  auto gts = three_gts();
  CHECK(mae(gts, gts, 3, 16, 16) == 0.0);
  std::vector<SceneInstance> one{{box(16, 0, 0, 8, 8), 1}};
  CHECK(mae({}, one, 3, 16, 16) == doctest::Approx(64.0 / 256.0).epsilon(1e-15));
  std::vector<SceneInstance> demoted{{box(16, 0, 0, 8, 8), 2}};
  CHECK(mae(demoted, one, 5, 16, 16) == doctest::Approx(64.0 / 256.0 / 5.0).epsilon(1e-15));
  // Overlaps keep the brighter value.
  std::vector<SceneInstance> overlap{{box(16, 0, 0, 8, 8), 2}, {box(16, 0, 0, 8, 8), 1}};
  CHECK(mae(overlap, one, 3, 16, 16) == 0.0);

  std::mt19937_64 rng(1);
  for (int t = 0; t < 100; ++t) {
    std::vector<SceneInstance> a, b;
    for (int i = 0; i < 3; ++i) {
      const int y = rng() % 12, x = rng() % 12;
      a.push_back({box(16, y, x, 4, 4), static_cast<int>(rng() % 3) + 1});
      b.push_back({box(16, x, y, 3, 5), static_cast<int>(rng() % 3) + 1});
    }
    CHECK(mae(a, a, 3, 16, 16) == 0.0);
    const double v = mae(a, b, 3, 16, 16);
    CHECK((v >= 0.0 && v <= 1.0));
  }
}

TEST_CASE("confusion") {
  auto gts = three_gts();
  ConfusionMatrix c(3);
  c.add(match_instances(gts, gts));
  CHECK(c.diagonal() == 3);
  CHECK(c.total() == 3);

  ConfusionMatrix d(5);
  d.add(match_instances({{box(16, 8, 0, 4, 4), 4}}, gts));
  CHECK(d.counts[1][3] == 1);
  CHECK(d.total() == 1);
}

TEST_CASE("oracles") {
  CHECK(rank_transform_oracle({1, 2, 2}) == std::vector<double>{1, 2.5, 2.5});
  CHECK(average_ranks({1, 2, 2}) == std::vector<double>{1, 2.5, 2.5});
  CHECK(*spearman_oracle({1, 2, 3}, {1, 2, 3}) == doctest::Approx(1.0));
  CHECK(*spearman_oracle({1, 2, 3}, {-1, -2, -3}) == doctest::Approx(-1.0));
  CHECK_FALSE(pearson_oracle({1, 1}, {1, 2}).has_value());

  std::mt19937_64 rng(77);
  for (int t = 0; t < 1000; ++t) {
    const int n = 2 + static_cast<int>(rng() % 8);
    std::vector<double> xs(n), ys(n);
    for (int i = 0; i < n; ++i) {
      xs[i] = 1 + static_cast<int>(rng() % 5);  // small range forces ties
      ys[i] = 1 + static_cast<int>(rng() % 5);
    }
    auto s = spearman(xs, ys), so = spearman_oracle(xs, ys);
    auto p = pearson(xs, ys), po = pearson_oracle(xs, ys);
    REQUIRE(s.has_value() == so.has_value());
    REQUIRE(p.has_value() == po.has_value());
    if (s) CHECK(std::abs(*s - *so) < 1e-9);
    if (p) CHECK(std::abs(*p - *po) < 1e-9);
  }
}

TEST_CASE("matching properties and aggregation") {
  std::mt19937_64 rng(5);
  std::vector<ImageMetrics> images;
  long pairs = 0;
  for (int t = 0; t < 200; ++t) {
    std::vector<SceneInstance> p, g;
    const int np = rng() % 4, ng = 1 + rng() % 3;
    for (int i = 0; i < np; ++i) p.push_back({box(16, rng() % 10, rng() % 10, 6, 6), 1 + static_cast<int>(rng() % 3)});
    for (int i = 0; i < ng; ++i) g.push_back({box(16, rng() % 10, rng() % 10, 6, 6), i + 1});
    ImageMetrics im = evaluate_image(p, g, 3, 16, 16);
    CHECK(im.match.pairs.size() <= std::min(p.size(), g.size()));
    for (const auto& mp : im.match.pairs) CHECK(mp.iou >= 0.5);
    pairs += static_cast<long>(im.match.pairs.size());
    images.push_back(im);
  }
  MetricReport r = aggregate(images, 3);
  CHECK(r.confusion.total() == pairs);
  CHECK(r.images_evaluated == 200);
  auto j = report_json(r, true);
  for (const char* key : {"mae", "sa_sor", "sor", "images_evaluated", "images_excluded_sor", "images_excluded_sasor",
                          "confusion", "sor_normalized"}) {
    CHECK(j.contains(key));
  }
  CHECK(j["confusion"].size() == 3);
  CHECK_FALSE(report_json(r).contains("sor_normalized"));
}
