#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "fedsim/partition.hpp"
#include "fedsim/rng.hpp"

using fedsim::ClientDataset;
using fedsim::PartitionConfig;

namespace {

PartitionConfig small_cfg() {
  PartitionConfig cfg;
  cfg.L = 10;
  cfg.M = 10;
  cfg.alpha = 1.0;
  cfg.rho = 2;
  cfg.samples_per_client = 50;
  cfg.feature_dim = 4;
  cfg.seed = 123;
  return cfg;
}

std::vector<std::vector<double>> rows_of(const ClientDataset& ds) {
  std::vector<std::vector<double>> rows(ds.n_samples());
  for (std::size_t i = 0; i < ds.n_samples(); ++i) {
    rows[i] = {ds.features.begin() + i * ds.feature_dim,
               ds.features.begin() + (i + 1) * ds.feature_dim};
    rows[i].push_back(static_cast<double>(ds.labels[i]));
  }
  return rows;
}

}  // namespace

TEST_CASE("config validation rejects bad shapes") {
  PartitionConfig cfg = small_cfg();
  cfg.rho = 3;  // does not divide M=10
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = small_cfg();
  cfg.L = 9;  // not a multiple of rho=2
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = small_cfg();
  cfg.alpha = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = small_cfg();
  cfg.rho = 20;  // > M
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("largest remainder rounding hits the documented cases") {
  CHECK(fedsim::largest_remainder_counts({0.5, 0.5}, 10) ==
        std::vector<std::int64_t>{5, 5});
  const auto counts = fedsim::largest_remainder_counts({0.33, 0.33, 0.34}, 10);
  CHECK(std::accumulate(counts.begin(), counts.end(), std::int64_t{0}) == 10);
  CHECK(counts == std::vector<std::int64_t>{3, 3, 4});
  for (std::size_t i = 0; i < counts.size(); ++i) {
    CHECK(std::abs(static_cast<double>(counts[i]) - 10.0 * 0.33) <= 1.0 + 0.11);
  }
}

TEST_CASE("largest remainder rounding always sums to the total") {
  fedsim::rng::Stream s(77);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t k = 2 + s.below(8);
    const auto p = s.dirichlet(0.7, k);
    const std::int64_t total = static_cast<std::int64_t>(1 + s.below(500));
    const auto counts = fedsim::largest_remainder_counts(p, total);
    CHECK(std::accumulate(counts.begin(), counts.end(), std::int64_t{0}) == total);
    for (std::size_t i = 0; i < k; ++i) {
      CHECK(std::abs(static_cast<double>(counts[i]) -
                     static_cast<double>(total) * p[i]) < 1.0);
    }
  }
}

TEST_CASE("first block has no mass on the second half of the classes") {
  PartitionConfig cfg = small_cfg();  // M=10, rho=2
  const auto dists = fedsim::draw_client_label_distributions(cfg);
  REQUIRE(dists.size() == cfg.L);
  for (std::size_t j = 0; j < cfg.L / 2; ++j) {
    for (std::size_t m = 5; m < 10; ++m) CHECK(dists[j].probs[m] == 0.0);
  }
  for (std::size_t j = cfg.L / 2; j < cfg.L; ++j) {
    for (std::size_t m = 0; m < 5; ++m) CHECK(dists[j].probs[m] == 0.0);
  }
}

TEST_CASE("infinite alpha with one partition is exactly uniform") {
  PartitionConfig cfg = small_cfg();
  cfg.rho = 1;
  cfg.alpha = std::numeric_limits<double>::infinity();
  const auto dists = fedsim::draw_client_label_distributions(cfg);
  for (const auto& d : dists) {
    for (double p : d.probs) CHECK(p == 0.1);
  }
}

TEST_CASE("rho equal to M yields one-hot distributions") {
  PartitionConfig cfg = small_cfg();
  cfg.rho = 10;
  const auto dists = fedsim::draw_client_label_distributions(cfg);
  for (std::size_t j = 0; j < cfg.L; ++j) {
    const std::size_t block = j / (cfg.L / cfg.rho);
    for (std::size_t m = 0; m < cfg.M; ++m) {
      CHECK(dists[j].probs[m] == (m == block ? 1.0 : 0.0));
    }
  }
}

TEST_CASE("materialized datasets respect counts, shapes and supports") {
  PartitionConfig cfg = small_cfg();
  const auto dists = fedsim::draw_client_label_distributions(cfg);
  const auto datasets = fedsim::materialize_client_datasets(cfg, dists);
  REQUIRE(datasets.size() == cfg.L);
  for (std::size_t j = 0; j < cfg.L; ++j) {
    const auto& ds = datasets[j];
    CHECK(ds.client_id == static_cast<int>(j));
    CHECK(ds.n_samples() == cfg.samples_per_client);
    CHECK(ds.features.size() == cfg.samples_per_client * cfg.feature_dim);
    CHECK(std::accumulate(ds.label_counts.begin(), ds.label_counts.end(),
                          std::int64_t{0}) == static_cast<std::int64_t>(cfg.samples_per_client));
    // cross-partition mass is exactly zero
    const bool first_block = j < cfg.L / 2;
    for (std::size_t m = 0; m < cfg.M; ++m) {
      if (first_block ? m >= 5 : m < 5) CHECK(ds.label_counts[m] == 0);
    }
    // distinct classes per client never exceed M/rho
    int distinct = 0;
    for (auto c : ds.label_counts) distinct += c > 0 ? 1 : 0;
    CHECK(distinct <= static_cast<int>(cfg.M / cfg.rho));
    CHECK(fedsim::is_valid_simplex(ds.empirical_distribution()));
  }
}

TEST_CASE("identical config reproduces bitwise-identical datasets") {
  PartitionConfig cfg = small_cfg();
  const auto d1 = fedsim::draw_client_label_distributions(cfg);
  const auto d2 = fedsim::draw_client_label_distributions(cfg);
  for (std::size_t j = 0; j < cfg.L; ++j) CHECK(d1[j].probs == d2[j].probs);
  const auto a = fedsim::materialize_client_datasets(cfg, d1);
  const auto b = fedsim::materialize_client_datasets(cfg, d2);
  for (std::size_t j = 0; j < cfg.L; ++j) {
    CHECK(a[j].features == b[j].features);
    CHECK(a[j].labels == b[j].labels);
  }
}

TEST_CASE("stratified split honors the ratio per class") {
  ClientDataset ds;
  ds.client_id = 0;
  ds.feature_dim = 2;
  ds.label_counts = {10, 0};
  for (int i = 0; i < 10; ++i) {
    ds.labels.push_back(0);
    ds.features.push_back(i);
    ds.features.push_back(-i);
  }
  const auto [train, test] = fedsim::train_test_split(ds, 0.7, 99);
  CHECK(train.n_samples() == 7);
  CHECK(test.n_samples() == 3);

  ClientDataset two;
  two.client_id = 1;
  two.feature_dim = 1;
  two.label_counts = {4, 4};
  for (int m = 0; m < 2; ++m) {
    for (int i = 0; i < 4; ++i) {
      two.labels.push_back(m);
      two.features.push_back(m * 10 + i);
    }
  }
  const auto [tr2, te2] = fedsim::train_test_split(two, 0.5, 99);
  CHECK(tr2.label_counts == std::vector<std::int64_t>{2, 2});
  CHECK(te2.label_counts == std::vector<std::int64_t>{2, 2});
}

TEST_CASE("split shards are disjoint and cover the input") {
  PartitionConfig cfg = small_cfg();
  const auto dists = fedsim::draw_client_label_distributions(cfg);
  const auto datasets = fedsim::materialize_client_datasets(cfg, dists);
  for (const auto& ds : datasets) {
    const auto [train, test] = fedsim::train_test_split(ds, 0.7, cfg.seed);
    CHECK(train.n_samples() + test.n_samples() == ds.n_samples());
    auto all = rows_of(train);
    const auto test_rows = rows_of(test);
    all.insert(all.end(), test_rows.begin(), test_rows.end());
    auto orig = rows_of(ds);
    std::sort(all.begin(), all.end());
    std::sort(orig.begin(), orig.end());
    CHECK(all == orig);  // a partition of the rows: disjoint and complete
  }
}

TEST_CASE("merge pools shards under the server id") {
  PartitionConfig cfg = small_cfg();
  cfg.L = 4;
  cfg.rho = 2;
  const auto datasets = fedsim::materialize_client_datasets(
      cfg, fedsim::draw_client_label_distributions(cfg));
  const auto merged = fedsim::merge_datasets(datasets);
  CHECK(merged.client_id == -1);
  CHECK(merged.n_samples() == cfg.L * cfg.samples_per_client);
  std::int64_t total = 0;
  for (std::size_t m = 0; m < cfg.M; ++m) {
    std::int64_t per_class = 0;
    for (const auto& ds : datasets) per_class += ds.label_counts[m];
    CHECK(merged.label_counts[m] == per_class);
    total += per_class;
  }
  CHECK(total == static_cast<std::int64_t>(merged.n_samples()));
}

TEST_CASE("uniform empirical distributions concentrate near 1/M") {
  PartitionConfig cfg;
  cfg.L = 8;
  cfg.M = 10;
  cfg.rho = 1;
  cfg.alpha = std::numeric_limits<double>::infinity();
  cfg.samples_per_client = 400;
  cfg.feature_dim = 3;
  cfg.seed = 5;
  const auto datasets = fedsim::materialize_client_datasets(
      cfg, fedsim::draw_client_label_distributions(cfg));
  const double bound = 2.0 / std::sqrt(static_cast<double>(cfg.samples_per_client));
  for (const auto& ds : datasets) {
    const auto emp = ds.empirical_distribution();
    for (double p : emp.probs) CHECK(std::abs(p - 0.1) < bound);
  }
}
