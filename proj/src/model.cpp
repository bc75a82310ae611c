#include "fedsim/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "fedsim/rng.hpp"

namespace fedsim {

std::size_t Architecture::param_count() const {
  std::size_t count = 0;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    count += layer_sizes[l] * layer_sizes[l + 1] + layer_sizes[l + 1];
  }
  return count;
}

std::string Architecture::describe() const {
  std::ostringstream out;
  out << (num_weight_layers() == 1 ? "softmax-regression" : "mlp") << "(";
  for (std::size_t i = 0; i < layer_sizes.size(); ++i) {
    if (i > 0) out << "-";
    out << layer_sizes[i];
  }
  out << ")";
  return out.str();
}

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  // zero is allowed as a degenerate no-op (update stays exactly zero)
  if (!(learning_rate >= 0.0)) throw std::invalid_argument("train: learning_rate must be >= 0");
  if (momentum < 0.0) throw std::invalid_argument("train: momentum must be >= 0");
}

ModelParams init_model(const Architecture& arch, std::uint64_t seed) {
  if (arch.layer_sizes.size() < 2) {
    throw std::invalid_argument("init_model: need input and output widths");
  }
  for (std::size_t w : arch.layer_sizes) {
    if (w == 0) throw std::invalid_argument("init_model: zero-width layer");
  }
  ModelParams model{arch, std::vector<double>(arch.param_count(), 0.0)};
  rng::Stream stream(seed, "init");
  std::size_t pos = 0;
  for (std::size_t l = 0; l + 1 < arch.layer_sizes.size(); ++l) {
    const std::size_t fan_in = arch.layer_sizes[l];
    const std::size_t fan_out = arch.layer_sizes[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (std::size_t k = 0; k < fan_in * fan_out; ++k) {
      model.theta[pos++] = stream.uniform(-bound, bound);
    }
    pos += fan_out;  // biases stay zero
  }
  return model;
}

namespace {

constexpr double kProbFloor = 1e-300;

struct Workspace {
  // activations[l] holds the batch outputs of layer l (activations[0] = input)
  std::vector<std::vector<double>> activations;
  std::vector<std::vector<double>> deltas;
};

// logits for one sample; activations recorded when ws is non-null
void forward_sample(const ModelParams& model, const double* x,
                    std::vector<double>& logits, Workspace* ws) {
  const auto& sizes = model.arch.layer_sizes;
  std::vector<double> current(x, x + sizes.front());
  if (ws != nullptr) ws->activations[0] = current;
  std::size_t pos = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const std::size_t fan_in = sizes[l];
    const std::size_t fan_out = sizes[l + 1];
    std::vector<double> next(fan_out, 0.0);
    const double* W = model.theta.data() + pos;
    const double* b = W + fan_in * fan_out;
    for (std::size_t o = 0; o < fan_out; ++o) {
      double z = b[o];
      const double* row = W + o * fan_in;
      for (std::size_t i = 0; i < fan_in; ++i) z += row[i] * current[i];
      next[o] = z;
    }
    const bool hidden = l + 2 < sizes.size();
    if (hidden) {
      for (double& v : next) v = std::max(0.0, v);  // ReLU
    }
    current = std::move(next);
    if (ws != nullptr) ws->activations[l + 1] = current;
    pos += fan_in * fan_out + fan_out;
  }
  logits = std::move(current);
}

// softmax probabilities in place; returns -log p[label]
double softmax_ce(std::vector<double>& logits, int label) {
  const double peak = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double& v : logits) {
    v = std::exp(v - peak);
    sum += v;
  }
  for (double& v : logits) v /= sum;
  return -std::log(std::max(logits[static_cast<std::size_t>(label)], kProbFloor));
}

// accumulates the per-sample gradient, scaled by 1/batch_n, into grad
void backward_sample(const ModelParams& model, const std::vector<double>& probs,
                     int label, const Workspace& ws, double inv_n,
                     std::vector<double>& grad) {
  const auto& sizes = model.arch.layer_sizes;
  const std::size_t layers = sizes.size() - 1;

  std::vector<double> delta = probs;
  delta[static_cast<std::size_t>(label)] -= 1.0;

  // layer offsets into theta
  std::vector<std::size_t> offsets(layers, 0);
  std::size_t pos = 0;
  for (std::size_t l = 0; l < layers; ++l) {
    offsets[l] = pos;
    pos += sizes[l] * sizes[l + 1] + sizes[l + 1];
  }

  for (std::size_t l = layers; l-- > 0;) {
    const std::size_t fan_in = sizes[l];
    const std::size_t fan_out = sizes[l + 1];
    const std::vector<double>& input = ws.activations[l];
    double* gW = grad.data() + offsets[l];
    double* gb = gW + fan_in * fan_out;
    for (std::size_t o = 0; o < fan_out; ++o) {
      const double d = delta[o] * inv_n;
      double* row = gW + o * fan_in;
      for (std::size_t i = 0; i < fan_in; ++i) row[i] += d * input[i];
      gb[o] += d;
    }
    if (l == 0) break;
    const double* W = model.theta.data() + offsets[l];
    std::vector<double> prev(fan_in, 0.0);
    for (std::size_t i = 0; i < fan_in; ++i) {
      if (ws.activations[l][i] <= 0.0) continue;  // ReLU gate
      double acc = 0.0;
      for (std::size_t o = 0; o < fan_out; ++o) acc += W[o * fan_in + i] * delta[o];
      prev[i] = acc;
    }
    delta = std::move(prev);
  }
}

// mean loss over the index subset; gradient accumulated when grad != nullptr
double batch_pass(const ModelParams& model, const ClientDataset& data,
                  const std::vector<std::size_t>& indices, std::vector<double>* grad) {
  const double inv_n = 1.0 / static_cast<double>(indices.size());
  Workspace ws;
  ws.activations.resize(model.arch.layer_sizes.size());
  double loss = 0.0;
  std::vector<double> logits;
  for (std::size_t idx : indices) {
    const double* x = data.features.data() + idx * data.feature_dim;
    forward_sample(model, x, logits, grad != nullptr ? &ws : nullptr);
    loss += softmax_ce(logits, data.labels[idx]) * inv_n;
    if (grad != nullptr) {
      backward_sample(model, logits, data.labels[idx], ws, inv_n, *grad);
    }
  }
  return loss;
}

void require_compatible(const ModelParams& model, const ClientDataset& data) {
  if (data.n_samples() == 0) throw std::invalid_argument("model: empty dataset");
  if (data.feature_dim != model.arch.input_dim()) {
    throw std::invalid_argument("model: feature_dim does not match input width");
  }
  for (int y : data.labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= model.arch.num_classes()) {
      throw std::invalid_argument("model: label out of range");
    }
  }
}

}  // namespace

double dataset_loss(const ModelParams& model, const ClientDataset& data) {
  require_compatible(model, data);
  std::vector<std::size_t> all(data.n_samples());
  std::iota(all.begin(), all.end(), 0);
  return batch_pass(model, data, all, nullptr);
}

std::pair<double, std::vector<double>> loss_and_gradient(const ModelParams& model,
                                                         const ClientDataset& data) {
  require_compatible(model, data);
  std::vector<std::size_t> all(data.n_samples());
  std::iota(all.begin(), all.end(), 0);
  std::vector<double> grad(model.theta.size(), 0.0);
  const double loss = batch_pass(model, data, all, &grad);
  return {loss, std::move(grad)};
}

TrainResult local_train(const ModelParams& model, const ClientDataset& data,
                        const TrainConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  require_compatible(model, data);
  const std::size_t n = data.n_samples();

  TrainResult result;
  result.params = model;
  std::vector<double> velocity(model.theta.size(), 0.0);
  std::vector<double> grad(model.theta.size(), 0.0);
  rng::Stream stream(seed, "shuffle");

  std::vector<std::size_t> indices(n);
  std::iota(indices.begin(), indices.end(), 0);
  double epoch_loss = 0.0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    stream.shuffle(indices);
    epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(n, start + static_cast<std::size_t>(cfg.batch_size));
      const std::vector<std::size_t> batch(indices.begin() + static_cast<std::ptrdiff_t>(start),
                                           indices.begin() + static_cast<std::ptrdiff_t>(stop));
      std::fill(grad.begin(), grad.end(), 0.0);
      const double loss = batch_pass(result.params, data, batch, &grad);
      epoch_loss += loss * static_cast<double>(batch.size());
      for (std::size_t k = 0; k < velocity.size(); ++k) {
        velocity[k] = cfg.momentum * velocity[k] - cfg.learning_rate * grad[k];
        result.params.theta[k] += velocity[k];
      }
    }
  }
  result.final_mean_loss = epoch_loss / static_cast<double>(n);
  result.flops = count_flops_per_sample(model.arch) * static_cast<double>(n) *
                 static_cast<double>(cfg.epochs);
  return result;
}

ModelParams fedavg_aggregate(
    const std::vector<std::pair<ModelParams, std::int64_t>>& updates) {
  if (updates.empty()) throw std::invalid_argument("fedavg: no updates");
  const Architecture& arch = updates.front().first.arch;
  double total = 0.0;
  for (const auto& [params, count] : updates) {
    if (!(params.arch == arch)) throw std::invalid_argument("fedavg: mixed architectures");
    if (count <= 0) throw std::invalid_argument("fedavg: non-positive sample count");
    total += static_cast<double>(count);
  }
  ModelParams out{arch, std::vector<double>(updates.front().first.theta.size(), 0.0)};
  for (const auto& [params, count] : updates) {
    const double w = static_cast<double>(count) / total;
    for (std::size_t k = 0; k < out.theta.size(); ++k) {
      out.theta[k] += w * params.theta[k];
    }
  }
  return out;
}

EvalResult evaluate(const ModelParams& model, const ClientDataset& test) {
  require_compatible(model, test);
  const std::size_t n = test.n_samples();
  std::vector<double> logits;
  double loss = 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* x = test.features.data() + i * test.feature_dim;
    forward_sample(model, x, logits, nullptr);
    std::size_t arg = 0;
    for (std::size_t c = 1; c < logits.size(); ++c) {
      if (logits[c] > logits[arg]) arg = c;
    }
    if (arg == static_cast<std::size_t>(test.labels[i])) ++correct;
    loss += softmax_ce(logits, test.labels[i]);
  }
  return {static_cast<double>(correct) / static_cast<double>(n),
          loss / static_cast<double>(n)};
}

double count_flops_per_sample(const Architecture& arch) {
  return 6.0 * static_cast<double>(arch.param_count());
}

double forward_flops_per_sample(const Architecture& arch) {
  return 2.0 * static_cast<double>(arch.param_count());
}

}  // namespace fedsim
