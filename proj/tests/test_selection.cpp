#include <doctest.h>

#include <algorithm>
#include <cstdint>
#include <set>
#include <stdexcept>
#include <vector>

#include "fedsim/rng.hpp"
#include "fedsim/selection.hpp"

using fedsim::ClusterAssignment;
using fedsim::FlopCounter;
using fedsim::SelectionContext;

namespace {

SelectionContext make_ctx(std::size_t L, int K, std::uint64_t seed = 1, int round = 1) {
  SelectionContext ctx;
  ctx.round = round;
  ctx.K = K;
  ctx.sizes.assign(L, 10);
  ctx.seed = seed;
  return ctx;
}

void check_valid(const std::vector<int>& picked, std::size_t L, int K) {
  CHECK(picked.size() == static_cast<std::size_t>(K));
  std::set<int> unique(picked.begin(), picked.end());
  CHECK(unique.size() == picked.size());
  for (int id : picked) {
    CHECK(id >= 0);
    CHECK(id < static_cast<int>(L));
  }
}

}  // namespace

TEST_CASE("weighted draw returns everyone when K equals L") {
  const auto ctx = make_ctx(8, 8);
  const auto picked = fedsim::select_random(ctx);
  std::vector<int> all{0, 1, 2, 3, 4, 5, 6, 7};
  CHECK(picked == all);
}

TEST_CASE("draw frequency follows the data-size weights") {
  SelectionContext ctx = make_ctx(2, 1);
  ctx.sizes = {3, 1};
  int hits = 0;
  const int trials = 100000;
  for (int t = 1; t <= trials; ++t) {
    ctx.round = t;
    if (fedsim::select_random(ctx).front() == 0) ++hits;
  }
  CHECK(static_cast<double>(hits) / trials == doctest::Approx(0.75).epsilon(0.0134));
}

TEST_CASE("selection repeats exactly for a fixed seed and round") {
  const auto ctx = make_ctx(20, 5, 77, 3);
  CHECK(fedsim::select_random(ctx) == fedsim::select_random(ctx));
  SelectionContext other = ctx;
  other.round = 4;
  CHECK(fedsim::select_random(ctx) != fedsim::select_random(other));
}

TEST_CASE("each elementary draw charges one counter unit") {
  const auto ctx = make_ctx(10, 4);
  FlopCounter counter;
  fedsim::select_random(ctx, &counter);
  CHECK(counter.flops == 4.0);
}

TEST_CASE("highest-loss candidates win") {
  SelectionContext ctx = make_ctx(6, 2);
  ctx.d = 3;
  const std::vector<int> candidates{1, 2, 4};
  const auto picked = fedsim::select_powerd(ctx, candidates, {0.9, 0.5, 0.7});
  CHECK(picked == std::vector<int>{1, 4});
}

TEST_CASE("equal losses fall back to the lowest ids") {
  SelectionContext ctx = make_ctx(6, 2);
  ctx.d = 3;
  const auto picked = fedsim::select_powerd(ctx, {5, 2, 4}, {0.4, 0.4, 0.4});
  CHECK(picked == std::vector<int>{2, 4});
}

TEST_CASE("candidate width equal to K keeps every candidate") {
  SelectionContext ctx = make_ctx(6, 3);
  ctx.d = 3;
  const auto picked = fedsim::select_powerd(ctx, {0, 3, 5}, {0.1, 0.9, 0.5});
  CHECK(picked == std::vector<int>{0, 3, 5});
}

TEST_CASE("candidate pools are distinct ids drawn by weight") {
  SelectionContext ctx = make_ctx(10, 3);
  ctx.d = 6;
  const auto pool = fedsim::powerd_candidates(ctx);
  check_valid(pool, 10, 6);
}

TEST_CASE("powerd validation rejects d below K") {
  SelectionContext ctx = make_ctx(10, 5);
  ctx.d = 3;
  CHECK_THROWS_AS(ctx.validate(), std::invalid_argument);
}

TEST_CASE("group sampling takes two per group when K doubles G") {
  SelectionContext ctx = make_ctx(20, 10);
  std::vector<int> assign(20);
  for (int i = 0; i < 20; ++i) assign[i] = i / 4;  // 5 groups of 4
  const ClusterAssignment clusters{assign, 5};
  ctx.clusters = &clusters;
  const auto picked = fedsim::select_simclust(ctx);
  check_valid(picked, 20, 10);
  std::vector<int> per_group(5, 0);
  for (int id : picked) ++per_group[assign[id]];
  for (int c : per_group) CHECK(c == 2);
}

TEST_CASE("group sampling covers every group once when G equals K") {
  SelectionContext ctx = make_ctx(12, 4);
  std::vector<int> assign(12);
  for (int i = 0; i < 12; ++i) assign[i] = i % 4;
  const ClusterAssignment clusters{assign, 4};
  ctx.clusters = &clusters;
  const auto picked = fedsim::select_simclust(ctx);
  check_valid(picked, 12, 4);
  std::set<int> seen;
  for (int id : picked) seen.insert(assign[id]);
  CHECK(seen.size() == 4);
}

TEST_CASE("two groups and three slots split the quota unevenly") {
  SelectionContext ctx = make_ctx(10, 3);
  std::vector<int> assign(10);
  for (int i = 0; i < 10; ++i) assign[i] = i < 5 ? 0 : 1;
  const ClusterAssignment clusters{assign, 2};
  ctx.clusters = &clusters;
  for (int round = 1; round <= 20; ++round) {
    ctx.round = round;
    const auto picked = fedsim::select_simclust(ctx);
    check_valid(picked, 10, 3);
    int g0 = 0;
    for (int id : picked) g0 += assign[id] == 0 ? 1 : 0;
    const int g1 = 3 - g0;
    CHECK(std::min(g0, g1) == 1);
    CHECK(std::max(g0, g1) == 2);
  }
}

TEST_CASE("distinct groups stay distinct when groups outnumber slots") {
  SelectionContext ctx = make_ctx(30, 5);
  std::vector<int> assign(30);
  for (int i = 0; i < 30; ++i) assign[i] = i / 3;  // 10 groups of 3
  const ClusterAssignment clusters{assign, 10};
  ctx.clusters = &clusters;
  for (int round = 1; round <= 20; ++round) {
    ctx.round = round;
    const auto picked = fedsim::select_simclust(ctx);
    check_valid(picked, 30, 5);
    std::set<int> groups_seen;
    for (int id : picked) groups_seen.insert(assign[id]);
    CHECK(groups_seen.size() == 5);  // never two members of one group
  }
}

TEST_CASE("whole-group selection returns exactly one group when sizes match") {
  SelectionContext ctx = make_ctx(100, 10);
  std::vector<int> assign(100);
  for (int i = 0; i < 100; ++i) assign[i] = i / 10;
  const ClusterAssignment clusters{assign, 10};
  ctx.clusters = &clusters;
  const auto picked = fedsim::select_repclust(ctx);
  check_valid(picked, 100, 10);
  std::set<int> groups_seen;
  for (int id : picked) groups_seen.insert(assign[id]);
  CHECK(groups_seen.size() == 1);
  // the whole group, not a subset
  const int g = assign[picked.front()];
  for (int i = 0; i < 100; ++i) {
    if (assign[i] == g) CHECK(std::count(picked.begin(), picked.end(), i) == 1);
  }
}

TEST_CASE("small groups accumulate until the quota is met") {
  SelectionContext ctx = make_ctx(20, 10);
  std::vector<int> assign(20);
  for (int i = 0; i < 20; ++i) assign[i] = i / 5;  // 4 groups of 5
  const ClusterAssignment clusters{assign, 4};
  ctx.clusters = &clusters;
  for (int round = 1; round <= 20; ++round) {
    ctx.round = round;
    const auto picked = fedsim::select_repclust(ctx);
    check_valid(picked, 20, 10);
    std::set<int> groups_seen;
    for (int id : picked) groups_seen.insert(assign[id]);
    CHECK(groups_seen.size() == 2);  // exactly two whole groups of five
  }
}

TEST_CASE("large groups are subsampled down to the quota") {
  SelectionContext ctx = make_ctx(40, 10);
  std::vector<int> assign(40);
  for (int i = 0; i < 40; ++i) assign[i] = i / 20;  // 2 groups of 20
  const ClusterAssignment clusters{assign, 2};
  ctx.clusters = &clusters;
  const auto picked = fedsim::select_repclust(ctx);
  check_valid(picked, 40, 10);
  std::set<int> groups_seen;
  for (int id : picked) groups_seen.insert(assign[id]);
  CHECK(groups_seen.size() == 1);
}

TEST_CASE("every strategy returns K distinct ids under random contexts") {
  fedsim::rng::Stream s(99);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t L = 4 + s.below(30);
    const int K = 1 + static_cast<int>(s.below(L));
    SelectionContext ctx = make_ctx(L, K, 1000 + trial, trial + 1);
    for (auto& size : ctx.sizes) size = 1 + static_cast<std::int64_t>(s.below(50));
    check_valid(fedsim::select_random(ctx), L, K);

    ctx.d = K + static_cast<int>(s.below(L - K + 1));
    const auto pool = fedsim::powerd_candidates(ctx);
    std::vector<double> losses;
    for (std::size_t i = 0; i < pool.size(); ++i) losses.push_back(s.uniform());
    check_valid(fedsim::select_powerd(ctx, pool, losses), L, K);

    const int G = 2 + static_cast<int>(s.below(L - 1));
    std::vector<int> assign(L);
    for (std::size_t i = 0; i < L; ++i) assign[i] = static_cast<int>(i) % G;
    const ClusterAssignment clusters{assign, G};
    ctx.clusters = &clusters;
    check_valid(fedsim::select_simclust(ctx), L, K);
    check_valid(fedsim::select_repclust(ctx), L, K);
  }
}

TEST_CASE("context validation enforces the basic bounds") {
  SelectionContext ctx = make_ctx(5, 6);
  CHECK_THROWS_AS(ctx.validate(), std::invalid_argument);
  ctx = make_ctx(5, 0);
  CHECK_THROWS_AS(ctx.validate(), std::invalid_argument);
  ctx = make_ctx(5, 3);
  ctx.sizes[2] = 0;
  CHECK_THROWS_AS(ctx.validate(), std::invalid_argument);
}
