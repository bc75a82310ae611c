#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fedsim/partition.hpp"

namespace fedsim {

// Dense feed-forward net described by its layer widths. A single weight layer
// (no hidden widths) is softmax regression.
struct Architecture {
  std::vector<std::size_t> layer_sizes;  // input, hidden..., output

  static Architecture softmax_regression(std::size_t input_dim, std::size_t classes) {
    return Architecture{{input_dim, classes}};
  }
  static Architecture mlp(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                          std::size_t classes) {
    std::vector<std::size_t> sizes{input_dim};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(classes);
    return Architecture{std::move(sizes)};
  }

  std::size_t num_weight_layers() const { return layer_sizes.size() - 1; }
  std::size_t input_dim() const { return layer_sizes.front(); }
  std::size_t num_classes() const { return layer_sizes.back(); }
  std::size_t param_count() const;
  std::string describe() const;

  bool operator==(const Architecture&) const = default;
};

struct ModelParams {
  Architecture arch;
  std::vector<double> theta;  // per layer: row-major weights, then biases
};

struct TrainConfig {
  int epochs = 10;
  int batch_size = 64;
  double learning_rate = 0.01;
  double momentum = 0.5;

  void validate() const;  // throws std::invalid_argument
};

// Weights uniform in (-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
ModelParams init_model(const Architecture& arch, std::uint64_t seed);

// Mean cross-entropy over the whole dataset.
double dataset_loss(const ModelParams& model, const ClientDataset& data);

// Mean cross-entropy and its gradient w.r.t. theta over the whole dataset.
std::pair<double, std::vector<double>> loss_and_gradient(const ModelParams& model,
                                                         const ClientDataset& data);

struct TrainResult {
  ModelParams params;
  double final_mean_loss = 0.0;  // sample-weighted mean over the last epoch
  double flops = 0.0;
};

// E epochs of seeded-shuffle mini-batch SGD with heavy-ball momentum
// (v <- mu*v - eta*grad; theta <- theta + v) on cross-entropy.
TrainResult local_train(const ModelParams& model, const ClientDataset& data,
                        const TrainConfig& cfg, std::uint64_t seed);

// Size-weighted average of the updates, reduced in the order given.
ModelParams fedavg_aggregate(
    const std::vector<std::pair<ModelParams, std::int64_t>>& updates);

struct EvalResult {
  double accuracy = 0.0;
  double mean_loss = 0.0;
};

// Argmax accuracy (ties to the lowest class) and mean cross-entropy.
EvalResult evaluate(const ModelParams& model, const ClientDataset& test);

// Counting rule: 6 flops per parameter per sample (2 forward + 4 backward).
double count_flops_per_sample(const Architecture& arch);

// Forward-only cost, used for selection-time loss probes.
double forward_flops_per_sample(const Architecture& arch);

}  // namespace fedsim
