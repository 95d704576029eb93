#include <algorithm>
#include <random>

#include "doctest.h"
#include "p2r_reference.hpp"
#include "psr/errors.hpp"
#include "psr/p2r.hpp"

using namespace psr;
using psr::testing::p2r_reference;
using psr::testing::random_candidates;

namespace {

InstanceCandidate cand(std::vector<double> v, int row, Tensor mask = Tensor({4, 4}, 0.9)) {
  InstanceCandidate c;
  c.partition = std::move(v);
  c.row = row;
  c.mask = std::move(mask);
  return c;
}

Tensor box_mask(int side, int y0, int x0, int h, int w) {
  Tensor t({side, side}, 0.0);
  for (int y = y0; y < y0 + h; ++y)
    for (int x = x0; x < x0 + w; ++x) t.at(y, x) = 1.0;
  return t;
}

BinaryMask bin_box(int side, int y0, int x0, int h, int w) { return binarize(box_mask(side, y0, x0, h, w)); }

}  // namespace

TEST_CASE("associate") {
  SUBCASE("objectness floor filter") {
    Tensor p({20, 3}, 0.05);
    p.at(2, 0) = 0.1;
    p.at(7, 2) = 0.5;
    p.at(19, 1) = 0.99;
    auto c = associate(Tensor({20, 2, 2}, 0.5), p, {}, 0.1);
    REQUIRE(c.size() == 3);
    CHECK(c[0].row == 2);
    CHECK(c[1].row == 7);
    CHECK(c[2].row == 19);
    CHECK(associate(Tensor({20, 2, 2}, 0.5), p, {}, 0.0).size() == 20);
  }
  SUBCASE("masks and origins follow their rows") {
    Tensor masks({3, 2, 2});
    for (int i = 0; i < 12; ++i) masks[i] = i;
    Tensor p({3, 1}, 0.5);
    auto origins = cell_origins({1, 1, 1});
    auto c = associate(masks, p, origins, 0.0);
    REQUIRE(c.size() == 3);
    CHECK(c[1].mask.at(0, 0) == 4.0);
    CHECK(c[2].origin == CellOrigin{2, 0, 0});
  }
  SUBCASE("empty and mismatched inputs") {
    CHECK(associate(Tensor(), Tensor(), {}, 0.1).empty());
    CHECK_THROWS_AS(associate(Tensor({4, 2, 2}), Tensor({5, 3}), {}, 0.1), AlignmentError);
    CHECK_THROWS_AS(associate(Tensor({5, 2, 2}), Tensor({5, 3}), cell_origins({2}), 0.1), AlignmentError);
  }
}

TEST_CASE("alleviate") {
  CHECK(is_ambiguous({0.8, 0.1, 0.9, 0.9, 0.9}, 0.3));
  CHECK_FALSE(is_ambiguous({0.1, 0.2, 0.4, 0.8, 0.9}, 0.3));
  CHECK_FALSE(is_ambiguous({0.1, 0.2, 0.1, 0.0, 0.29}, 0.3));
  CHECK_FALSE(is_ambiguous({0.3, 0.3, 0.3}, 0.3));
  auto out = alleviate({cand({0.8, 0.1, 0.9, 0.9, 0.9}, 0), cand({0.1, 0.2, 0.4, 0.8, 0.9}, 1),
                        cand({0.1, 0.1, 0.1, 0.1, 0.1}, 2)},
                       0.3);
  REQUIRE(out.size() == 2);
  CHECK(out[0].row == 1);
  CHECK(out[1].row == 2);

  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int t = 0; t < 2000; ++t) {
    std::vector<double> v(5);
    for (double& x : v) x = unit(rng);
    auto kept = alleviate({cand(v, 0)}, 0.3);
    bool witness = false;
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < i; ++j) witness = witness || (v[j] >= 0.3 && v[i] < 0.3);
    CHECK(kept.empty() == witness);
    if (!kept.empty())
      for (int n = 1; n < 5; ++n) CHECK((v[n - 1] >= 0.3) <= (v[n] >= 0.3));
  }
}

TEST_CASE("mask_iou and binarize") {
  CHECK(mask_iou(bin_box(4, 0, 0, 2, 2), bin_box(4, 0, 0, 2, 2)) == 1.0);
  CHECK(mask_iou(bin_box(4, 0, 0, 2, 2), bin_box(4, 2, 2, 2, 2)) == 0.0);
  // Two 2x2 squares sharing one column: intersection 2, union 6.
  CHECK(mask_iou(bin_box(4, 0, 0, 2, 2), bin_box(4, 0, 1, 2, 2)) == doctest::Approx(2.0 / 6.0));
  CHECK(mask_iou(BinaryMask(3, 3), BinaryMask(3, 3)) == 0.0);
  CHECK_THROWS_AS(mask_iou(BinaryMask(3, 3), BinaryMask(3, 4)), DimensionError);

  CHECK(binarize(Tensor({2, 2}, 0.7)).area() == 4);
  CHECK(binarize(Tensor({2, 2}, 0.3)).area() == 0);
  CHECK(binarize(Tensor({2, 2}, 0.5)).area() == 4);
  CHECK(binarize(Tensor({2, 2}, std::nextafter(0.5, 0.0))).area() == 0);
}

TEST_CASE("select_ranks") {
  SUBCASE("candidate holding the column-1 maximum is rank 1") {
    auto out = select_ranks({cand({0.2, 0.9, 0.9}, 0, box_mask(4, 0, 0, 2, 2)),
                             cand({0.8, 0.9, 0.95}, 1, box_mask(4, 2, 2, 2, 2))},
                            3);
    REQUIRE(out.size() == 2);
    CHECK(out[0].row == 1);
    CHECK(out[0].rank == 1);
    CHECK(out[0].score == 0.8);
    CHECK(out[1].row == 0);
    CHECK(out[1].rank == 2);
  }
  SUBCASE("empty input") { CHECK(select_ranks({}, 3).empty()); }
  SUBCASE("identical masks: the weaker duplicate is suppressed") {
    auto out = select_ranks({cand({0.9, 0.9}, 0), cand({0.8, 0.9}, 1)}, 2);
    REQUIRE(out.size() == 1);
    CHECK(out[0].row == 0);
  }
  SUBCASE("stops when the column maximum is below T") {
    auto out = select_ranks({cand({0.9, 0.9, 0.9}, 0, box_mask(4, 0, 0, 1, 1)),
                             cand({0.0, 0.25, 0.9}, 1, box_mask(4, 3, 3, 1, 1))},
                            3);
    CHECK(out.size() == 1);
  }
  SUBCASE("single candidate above T everywhere gets rank 1 only") {
    auto out = select_ranks({cand({0.9, 0.9, 0.9}, 4)}, 3);
    REQUIRE(out.size() == 1);
    CHECK(out[0].rank == 1);
  }
  SUBCASE("ties go to the lower row") {
    auto out = select_ranks({cand({0.7}, 9, box_mask(4, 0, 0, 1, 1)), cand({0.7}, 3, box_mask(4, 3, 3, 1, 1))}, 1);
    REQUIRE(out.size() == 1);
    CHECK(out[0].row == 3);
  }
}

TEST_CASE("p2r properties on random candidate sets") {
  std::mt19937_64 rng(2024);
  const P2RConfig config;
  for (int t = 0; t < 1000; ++t) {
    auto cands = random_candidates(rng);
    auto kept = alleviate(cands, config.threshold);
    auto out = select_ranks(kept, 5, config);
    CHECK(out == p2r_reference(cands, 5, config.threshold, config.nms_iou));

    for (std::size_t i = 0; i < out.size(); ++i) {
      CHECK(out[i].rank == static_cast<int>(i) + 1);
      for (std::size_t j = i + 1; j < out.size(); ++j) CHECK(mask_iou(out[i].mask, out[j].mask) <= config.nms_iou);
    }
    for (const auto& c : kept)
      for (int n = 1; n < 5; ++n) CHECK((c.partition[n - 1] >= 0.3) <= (c.partition[n] >= 0.3));

    // Order invariance when probabilities are distinct.
    bool distinct = true;
    for (std::size_t a = 0; a < kept.size(); ++a)
      for (std::size_t b = a + 1; b < kept.size(); ++b)
        for (int n = 0; n < 5; ++n) distinct = distinct && kept[a].partition[n] != kept[b].partition[n];
    if (distinct) {
      auto shuffled = kept;
      std::shuffle(shuffled.begin(), shuffled.end(), rng);
      CHECK(select_ranks(shuffled, 5, config) == out);
    }
  }
  CHECK(p2r_reference({}, 5, 0.3, 0.5).empty());
}

TEST_CASE("partition_to_rank pipeline") {
  Tensor masks({3, 4, 4}, 0.0);
  for (int x = 0; x < 4; ++x) {
    masks.at(0, 0, x) = 0.9;
    masks.at(1, 3, x) = 0.9;
    masks.at(2, 0, x) = 0.9;  // duplicate of row 0
  }
  Tensor p = Tensor({3, 2}, std::vector<double>{0.2, 0.9, 0.95, 0.99, 0.6, 0.8});
  auto out = partition_to_rank(masks, p, cell_origins({1, 1, 1}));
  REQUIRE(out.size() == 2);
  CHECK(out[0].row == 1);
  CHECK(out[1].row == 0);  // row 2 duplicates row 0 and is suppressed
  P2RConfig bad;
  bad.threshold = 1.5;
  CHECK_THROWS_AS(partition_to_rank(masks, p, {}, bad), ConfigError);
}
