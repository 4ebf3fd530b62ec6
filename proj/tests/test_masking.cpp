#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "dcmcl/masking.hpp"

using namespace dcmcl;

namespace {

const double kConfAr[] = {.9, .1, .5, .4};
const double kConfNar[] = {.8, .2, .3, .6};

MaskPlan four_mutual() {
  MaskPlan p;
  p.n_target = 4;
  p.masked = p.mutual = {0, 1, 2, 3};
  return p;
}

std::vector<int> select(Selection s, double fraction = 0.5) {
  Rng rng(1);
  return select_confidence(four_mutual(), kConfAr, kConfNar, s, fraction, rng);
}

}  // namespace

TEST_CASE("cmlm_mask") {
  Rng rng(1);
  const MaskPlan one = cmlm_mask(1, rng);
  CHECK(one.masked == std::vector<int>{0});
  CHECK(one.observed.empty());

  double total = 0;
  std::vector<int> hits(8, 0);
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) {
    const MaskPlan p = cmlm_mask(8, rng);
    total += static_cast<double>(p.masked.size());
    for (int j : p.masked) ++hits[static_cast<std::size_t>(j)];
    CHECK_FALSE(p.masked.empty());
  }
  CHECK(std::abs(total / draws - 4.5) < 0.05);
  // (n + 1) / (2n) per position
  for (int h : hits) CHECK(std::abs(h / static_cast<double>(draws) / (9.0 / 16.0) - 1.0) < 0.01);

  Rng a(42), b(42);
  const MaskPlan pa = cmlm_mask(7, a), pb = cmlm_mask(7, b);
  CHECK(pa.masked == pb.masked);
  CHECK(pa.observed == pb.observed);
}

TEST_CASE("fixed_ratio_mask") {
  Rng rng(2);
  CHECK(fixed_ratio_mask(5, 1.0, rng).masked.size() == 5);
  CHECK(fixed_ratio_mask(6, 0.5, rng).masked.size() == 3);
  CHECK(fixed_ratio_mask(6, 0.01, rng).masked.size() == 1);
  const MaskPlan none = fixed_ratio_mask(6, 0.0, rng);
  CHECK(none.masked.empty());
  CHECK(none.mutual.empty());
  CHECK(none.observed.size() == 6);
  CHECK_THROWS_AS(fixed_ratio_mask(4, 1.5, rng), std::invalid_argument);
  CHECK_THROWS_AS(fixed_ratio_mask(4, -0.1, rng), std::invalid_argument);
}

TEST_CASE("disco contexts") {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const auto ctx = disco_contexts(6, rng);
    REQUIRE(ctx.size() == 6);
    for (int i = 0; i < 6; ++i)
      CHECK(std::find(ctx[static_cast<std::size_t>(i)].begin(), ctx[static_cast<std::size_t>(i)].end(), i) ==
            ctx[static_cast<std::size_t>(i)].end());
  }
  const auto two = disco_contexts(2, rng);
  CHECK(std::all_of(two[0].begin(), two[0].end(), [](int j) { return j == 1; }));
  CHECK(std::all_of(two[1].begin(), two[1].end(), [](int j) { return j == 0; }));
  Rng a(5), b(5);
  CHECK(disco_contexts(7, a) == disco_contexts(7, b));

  Rng r(9);
  const MaskPlan p = disco_plan(5, r);
  CHECK(p.mutual == std::vector<int>{0, 1, 2, 3, 4});
  CHECK(p.per_position());
  const BoolMat vis = context_visibility(p, 7);
  for (int i = 0; i < 5; ++i) CHECK_FALSE(vis(i, i));
}

TEST_CASE("mask plans keep their partition invariants") {
  Rng rng(4);
  for (int i = 0; i < 10000; ++i) {
    const int n = static_cast<int>(rng.uniform_int(1, 12));
    const MaskStrategy s = static_cast<MaskStrategy>(i % 3);
    const MaskPlan p = make_plan(s, n, rng.uniform(), rng);
    CHECK_NOTHROW(p.validate());
    std::set<int> all(p.observed.begin(), p.observed.end());
    for (int j : p.masked) CHECK(all.insert(j).second);
    CHECK(static_cast<int>(all.size()) == n);
    if (s == MaskStrategy::disco) {
      CHECK(static_cast<int>(p.mutual.size()) == n);
    } else {
      CHECK(p.mutual == p.masked);
    }
  }
  MaskPlan bad;
  bad.n_target = 3;
  bad.observed = {0, 1};
  bad.masked = {1, 2};
  CHECK_THROWS_AS(bad.validate(), std::logic_error);
}

TEST_CASE("select_confidence worked example") {
  CHECK(select(Selection::low_inter) == std::vector<int>{1, 2});
  CHECK(select(Selection::high_inter) == std::vector<int>{0, 3});
  CHECK(select(Selection::all) == std::vector<int>{0, 1, 2, 3});
  // max = [.9,.2,.5,.6] -> top 2 {0,3}; min = [.8,.1,.3,.4] -> bottom 2 {1,2}
  CHECK(select(Selection::high_union) == std::vector<int>{0, 3});
  CHECK(select(Selection::low_union) == std::vector<int>{1, 2});
  CHECK(select(Selection::random).size() == 2);
  CHECK(select(Selection::high_inter, 0.25) == std::vector<int>{0});
  CHECK(select(Selection::low_inter, 0.6).size() == 3);
}

TEST_CASE("select_confidence size, ties and complements") {
  Rng rng(6);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = static_cast<int>(rng.uniform_int(1, 10)) * 2;
    MaskPlan p;
    p.n_target = n + 3;
    for (int j = 0; j < n; ++j) p.mutual.push_back(j + 1);
    p.masked = p.mutual;
    std::vector<double> a(static_cast<std::size_t>(n)), b(static_cast<std::size_t>(n));
    // Coarse values force ties.
    for (auto& x : a) x = static_cast<double>(rng.uniform_int(0, 4)) / 4.0;
    for (auto& x : b) x = static_cast<double>(rng.uniform_int(0, 4)) / 4.0;
    const double frac = 0.05 + 0.95 * rng.uniform();
    const std::size_t want = static_cast<std::size_t>(std::ceil(frac * n));
    for (Selection s : {Selection::random, Selection::high_inter, Selection::high_union, Selection::low_inter, Selection::low_union})
      CHECK(select_confidence(p, a, b, s, frac, rng).size() == want);

    // Same score (min) read from the top and from the bottom; distinct scores,
    // since both ends break ties toward lower positions.
    for (auto& x : a) x = rng.uniform();
    for (auto& x : b) x = rng.uniform();
    auto hi = select_confidence(p, a, b, Selection::high_inter, 0.5, rng);
    auto lo = select_confidence(p, a, b, Selection::low_union, 0.5, rng);
    std::vector<int> both;
    std::set_union(hi.begin(), hi.end(), lo.begin(), lo.end(), std::back_inserter(both));
    CHECK(both == p.mutual);
    hi = select_confidence(p, a, b, Selection::high_union, 0.5, rng);
    lo = select_confidence(p, a, b, Selection::low_inter, 0.5, rng);
    both.clear();
    std::set_union(hi.begin(), hi.end(), lo.begin(), lo.end(), std::back_inserter(both));
    CHECK(both == p.mutual);
  }
  MaskPlan empty;
  empty.n_target = 3;
  empty.observed = {0, 1, 2};
  CHECK(select_confidence(empty, {}, {}, Selection::high_inter, 0.5, rng).empty());

  // All-equal scores: ties go to lower positions.
  MaskPlan p = four_mutual();
  const double flat[] = {.5, .5, .5, .5};
  CHECK(select_confidence(p, flat, flat, Selection::high_inter, 0.5, rng) == std::vector<int>{0, 1});
  CHECK(select_confidence(p, flat, flat, Selection::low_inter, 0.5, rng) == std::vector<int>{0, 1});
}
