#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fedsim/distributions.hpp"

namespace fedsim {

// (alpha, rho)-Dir scheme: clients are split into rho contiguous equal blocks,
// block r only holds the M/rho classes of partition r, and within-support
// ratios are Dirichlet(alpha). alpha = +infinity selects exact uniformity.
struct PartitionConfig {
  std::size_t L = 100;  // clients
  std::size_t M = 10;   // classes
  double alpha = 1.0;
  std::size_t rho = 1;  // disjoint class partitions
  std::size_t samples_per_client = 500;
  std::size_t feature_dim = 32;
  std::uint64_t seed = 0;

  void validate() const;  // throws std::invalid_argument
};

struct ClientDataset {
  int client_id = 0;
  std::size_t feature_dim = 0;
  std::vector<double> features;  // n_samples x feature_dim, row-major
  std::vector<int> labels;       // grouped by class, ascending
  std::vector<std::int64_t> label_counts;

  std::size_t n_samples() const { return labels.size(); }
  LabelDistribution empirical_distribution() const;
};

// Rounds total*probs to integers summing exactly to total; leftover units go
// to the largest fractional remainders, ties to the lowest index.
std::vector<std::int64_t> largest_remainder_counts(const std::vector<double>& probs,
                                                   std::int64_t total);

std::vector<LabelDistribution> draw_client_label_distributions(const PartitionConfig& cfg);

// Gaussian blobs: class m has mean (m - (M-1)/2) on every coordinate and unit
// variance, so consecutive class means are unit-spaced per coordinate.
std::vector<ClientDataset> materialize_client_datasets(
    const PartitionConfig& cfg, const std::vector<LabelDistribution>& dists);

// Stratified-by-label split; a single-sample class shard goes entirely to
// train with a warning on stderr.
std::pair<ClientDataset, ClientDataset> train_test_split(const ClientDataset& ds,
                                                         double ratio,
                                                         std::uint64_t seed);

// Concatenates shards (e.g. the global test set); client_id becomes -1.
ClientDataset merge_datasets(const std::vector<ClientDataset>& shards);

// CSV layout: client_id, label, feature_0..feature_{d-1}
void export_datasets_csv(const std::vector<ClientDataset>& datasets,
                         const std::string& path);

}  // namespace fedsim
