#include "fedsim/partition.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "fedsim/rng.hpp"

namespace fedsim {

void PartitionConfig::validate() const {
  if (L == 0) throw std::invalid_argument("partition: L must be positive");
  if (M == 0) throw std::invalid_argument("partition: M must be positive");
  if (rho < 1 || rho > M) throw std::invalid_argument("partition: rho must be in [1, M]");
  if (M % rho != 0) throw std::invalid_argument("partition: rho must divide M");
  if (L % rho != 0) throw std::invalid_argument("partition: rho must divide L");
  if (samples_per_client == 0) {
    throw std::invalid_argument("partition: samples_per_client must be positive");
  }
  if (feature_dim == 0) throw std::invalid_argument("partition: feature_dim must be positive");
  if (!(alpha > 0.0)) throw std::invalid_argument("partition: alpha must be > 0");
}

LabelDistribution ClientDataset::empirical_distribution() const {
  std::vector<double> p(label_counts.size(), 0.0);
  const double n = static_cast<double>(n_samples());
  for (std::size_t m = 0; m < label_counts.size(); ++m) {
    p[m] = static_cast<double>(label_counts[m]) / n;
  }
  return LabelDistribution(std::move(p));
}

std::vector<std::int64_t> largest_remainder_counts(const std::vector<double>& probs,
                                                   std::int64_t total) {
  const std::size_t m = probs.size();
  std::vector<std::int64_t> counts(m, 0);
  std::vector<double> remainders(m, 0.0);
  std::int64_t assigned = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const double raw = probs[i] * static_cast<double>(total);
    counts[i] = static_cast<std::int64_t>(std::floor(raw));
    remainders[i] = raw - std::floor(raw);
    assigned += counts[i];
  }
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return remainders[a] > remainders[b];
  });
  const std::int64_t leftover = total - assigned;
  for (std::int64_t k = 0; k < leftover; ++k) {
    counts[order[static_cast<std::size_t>(k) % m]] += 1;
  }
  return counts;
}

std::vector<LabelDistribution> draw_client_label_distributions(const PartitionConfig& cfg) {
  cfg.validate();
  const std::size_t support = cfg.M / cfg.rho;
  const std::size_t block = cfg.L / cfg.rho;
  const bool uniform = std::isinf(cfg.alpha);
  std::vector<LabelDistribution> out;
  out.reserve(cfg.L);
  for (std::size_t client = 0; client < cfg.L; ++client) {
    const std::size_t r = client / block;
    std::vector<double> p(cfg.M, 0.0);
    if (uniform) {
      for (std::size_t k = 0; k < support; ++k) {
        p[r * support + k] = 1.0 / static_cast<double>(support);
      }
    } else {
      rng::Stream stream(cfg.seed, "labels", client);
      const std::vector<double> w = stream.dirichlet(cfg.alpha, support);
      for (std::size_t k = 0; k < support; ++k) p[r * support + k] = w[k];
    }
    out.emplace_back(std::move(p));
  }
  return out;
}

std::vector<ClientDataset> materialize_client_datasets(
    const PartitionConfig& cfg, const std::vector<LabelDistribution>& dists) {
  cfg.validate();
  if (dists.size() != cfg.L) {
    throw std::invalid_argument("materialize: need exactly L distributions");
  }
  const double offset = (static_cast<double>(cfg.M) - 1.0) / 2.0;
  std::vector<ClientDataset> out;
  out.reserve(cfg.L);
  for (std::size_t client = 0; client < cfg.L; ++client) {
    ClientDataset ds;
    ds.client_id = static_cast<int>(client);
    ds.feature_dim = cfg.feature_dim;
    ds.label_counts = largest_remainder_counts(
        dists[client].probs, static_cast<std::int64_t>(cfg.samples_per_client));
    ds.features.reserve(cfg.samples_per_client * cfg.feature_dim);
    ds.labels.reserve(cfg.samples_per_client);
    rng::Stream stream(cfg.seed, "features", client);
    for (std::size_t m = 0; m < cfg.M; ++m) {
      const double mean = static_cast<double>(m) - offset;
      for (std::int64_t s = 0; s < ds.label_counts[m]; ++s) {
        ds.labels.push_back(static_cast<int>(m));
        for (std::size_t d = 0; d < cfg.feature_dim; ++d) {
          ds.features.push_back(stream.normal(mean, 1.0));
        }
      }
    }
    out.push_back(std::move(ds));
  }
  return out;
}

namespace {

// Per-class train counts: largest-remainder toward round(n*ratio), with
// single-sample shards forced into train and per-class caps respected.
std::vector<std::int64_t> stratified_train_counts(const std::vector<std::int64_t>& counts,
                                                  double ratio, int client_id) {
  const std::size_t m = counts.size();
  std::int64_t n = 0;
  for (auto c : counts) n += c;
  std::int64_t target = std::llround(static_cast<double>(n) * ratio);

  std::vector<std::int64_t> train(m, 0);
  std::vector<double> remainders(m, 0.0);
  std::int64_t assigned = 0;
  bool warned = false;
  for (std::size_t i = 0; i < m; ++i) {
    if (counts[i] == 1) {
      train[i] = 1;
      if (!warned) {
        std::cerr << "warning: client " << client_id
                  << " has a single-sample class shard; it goes entirely to train\n";
        warned = true;
      }
      continue;
    }
    const double raw = static_cast<double>(counts[i]) * ratio;
    train[i] = static_cast<std::int64_t>(std::floor(raw));
    remainders[i] = raw - std::floor(raw);
  }
  for (std::size_t i = 0; i < m; ++i) assigned += train[i];

  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return remainders[a] > remainders[b];
  });
  for (std::size_t pass = 0; pass < m && assigned < target; ++pass) {
    for (std::size_t k = 0; k < m && assigned < target; ++k) {
      const std::size_t i = order[k];
      if (train[i] < counts[i]) {
        train[i] += 1;
        ++assigned;
      }
    }
  }
  return train;
}

}  // namespace

std::pair<ClientDataset, ClientDataset> train_test_split(const ClientDataset& ds,
                                                         double ratio,
                                                         std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw std::invalid_argument("train_test_split: ratio must be in (0, 1)");
  }
  const std::size_t m = ds.label_counts.size();
  const std::vector<std::int64_t> train_counts =
      stratified_train_counts(ds.label_counts, ratio, ds.client_id);

  ClientDataset train, test;
  train.client_id = test.client_id = ds.client_id;
  train.feature_dim = test.feature_dim = ds.feature_dim;
  train.label_counts.assign(m, 0);
  test.label_counts.assign(m, 0);

  rng::Stream stream(seed, "split", static_cast<std::uint64_t>(ds.client_id));
  std::size_t row = 0;
  for (std::size_t cls = 0; cls < m; ++cls) {
    const std::int64_t count = ds.label_counts[cls];
    if (count == 0) continue;
    std::vector<std::size_t> rows(static_cast<std::size_t>(count));
    std::iota(rows.begin(), rows.end(), row);
    row += static_cast<std::size_t>(count);
    stream.shuffle(rows);

    for (std::int64_t k = 0; k < count; ++k) {
      const bool to_train = k < train_counts[cls];
      ClientDataset& dst = to_train ? train : test;
      const std::size_t r = rows[static_cast<std::size_t>(k)];
      dst.labels.push_back(static_cast<int>(cls));
      dst.label_counts[cls] += 1;
      const double* begin = ds.features.data() + r * ds.feature_dim;
      dst.features.insert(dst.features.end(), begin, begin + ds.feature_dim);
    }
  }
  return {std::move(train), std::move(test)};
}

ClientDataset merge_datasets(const std::vector<ClientDataset>& shards) {
  if (shards.empty()) throw std::invalid_argument("merge_datasets: empty input");
  ClientDataset out;
  out.client_id = -1;
  out.feature_dim = shards.front().feature_dim;
  out.label_counts.assign(shards.front().label_counts.size(), 0);
  for (const auto& ds : shards) {
    if (ds.feature_dim != out.feature_dim ||
        ds.label_counts.size() != out.label_counts.size()) {
      throw std::invalid_argument("merge_datasets: shard shape mismatch");
    }
    out.features.insert(out.features.end(), ds.features.begin(), ds.features.end());
    out.labels.insert(out.labels.end(), ds.labels.begin(), ds.labels.end());
    for (std::size_t m = 0; m < ds.label_counts.size(); ++m) {
      out.label_counts[m] += ds.label_counts[m];
    }
  }
  return out;
}

void export_datasets_csv(const std::vector<ClientDataset>& datasets,
                         const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  if (datasets.empty()) return;
  out << "client_id,label";
  for (std::size_t d = 0; d < datasets.front().feature_dim; ++d) out << ",feature_" << d;
  out << "\n";
  char buf[32];
  for (const auto& ds : datasets) {
    for (std::size_t i = 0; i < ds.n_samples(); ++i) {
      out << ds.client_id << "," << ds.labels[i];
      for (std::size_t d = 0; d < ds.feature_dim; ++d) {
        std::snprintf(buf, sizeof(buf), "%.17g", ds.features[i * ds.feature_dim + d]);
        out << "," << buf;
      }
      out << "\n";
    }
  }
}

}  // namespace fedsim
