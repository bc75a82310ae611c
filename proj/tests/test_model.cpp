#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "fedsim/model.hpp"
#include "fedsim/rng.hpp"

using fedsim::Architecture;
using fedsim::ClientDataset;
using fedsim::ModelParams;
using fedsim::TrainConfig;

namespace {

ClientDataset random_dataset(std::uint64_t seed, std::size_t n, std::size_t d,
                             std::size_t M) {
  fedsim::rng::Stream s(seed);
  ClientDataset ds;
  ds.client_id = 0;
  ds.feature_dim = d;
  ds.label_counts.assign(M, 0);
  std::vector<std::vector<double>> by_class(M);
  std::vector<int> labels;
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(s.below(M));
    for (std::size_t k = 0; k < d; ++k) by_class[label].push_back(s.normal());
    ++ds.label_counts[label];
  }
  for (std::size_t m = 0; m < M; ++m) {
    for (std::int64_t c = 0; c < ds.label_counts[m]; ++c) {
      ds.labels.push_back(static_cast<int>(m));
    }
    ds.features.insert(ds.features.end(), by_class[m].begin(), by_class[m].end());
  }
  return ds;
}

// two-class blobs far enough apart to be linearly separable
ClientDataset separable_blobs(std::size_t per_class, std::size_t d) {
  fedsim::rng::Stream s(4242);
  ClientDataset ds;
  ds.feature_dim = d;
  ds.label_counts = {static_cast<std::int64_t>(per_class),
                     static_cast<std::int64_t>(per_class)};
  for (int m = 0; m < 2; ++m) {
    const double mean = m == 0 ? -5.0 : 5.0;
    for (std::size_t i = 0; i < per_class; ++i) {
      ds.labels.push_back(m);
      for (std::size_t k = 0; k < d; ++k) ds.features.push_back(mean + s.normal());
    }
  }
  return ds;
}

}  // namespace

TEST_CASE("parameter counts follow the dense-layer formula") {
  CHECK(Architecture::softmax_regression(8, 4).param_count() == 36);
  CHECK(Architecture::mlp(784, {64, 30}, 10).param_count() == 52500);
  CHECK(Architecture::mlp(6, {}, 3).param_count() ==
        Architecture::softmax_regression(6, 3).param_count());
}

TEST_CASE("initialization is seeded, fan-in bounded, with zero biases") {
  const auto arch = Architecture::mlp(5, {4}, 3);
  const auto a = fedsim::init_model(arch, 31);
  const auto b = fedsim::init_model(arch, 31);
  CHECK(a.theta == b.theta);
  const auto c = fedsim::init_model(arch, 32);
  CHECK(a.theta != c.theta);

  // layer 1: 5*4 weights bounded by 1/sqrt(5), then 4 zero biases
  const double bound1 = 1.0 / std::sqrt(5.0);
  for (std::size_t i = 0; i < 20; ++i) CHECK(std::abs(a.theta[i]) < bound1);
  for (std::size_t i = 20; i < 24; ++i) CHECK(a.theta[i] == 0.0);
  const double bound2 = 1.0 / std::sqrt(4.0);
  for (std::size_t i = 24; i < 36; ++i) CHECK(std::abs(a.theta[i]) < bound2);
  for (std::size_t i = 36; i < 39; ++i) CHECK(a.theta[i] == 0.0);
}

TEST_CASE("zero learning rate is an exact no-op") {
  const auto ds = random_dataset(1, 30, 6, 3);
  const auto model = fedsim::init_model(Architecture::softmax_regression(6, 3), 7);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 8;
  cfg.learning_rate = 0.0;
  const auto result = fedsim::local_train(model, ds, cfg, 5);
  CHECK(result.params.theta == model.theta);
}

TEST_CASE("one step on one sample matches the closed-form softmax gradient") {
  const std::size_t d = 4, M = 3;
  ClientDataset ds;
  ds.feature_dim = d;
  ds.features = {0.5, -1.0, 2.0, 0.25};
  ds.labels = {1};
  ds.label_counts = {0, 1, 0};
  const auto model = fedsim::init_model(Architecture::softmax_regression(d, M), 3);

  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 1;
  cfg.learning_rate = 0.1;
  cfg.momentum = 0.5;  // irrelevant on the very first step
  const auto result = fedsim::local_train(model, ds, cfg, 1);

  // z = Wx + b, p = softmax(z), dW[o][i] = (p_o - 1{o=y}) x_i, db_o = p_o - 1{o=y}
  std::vector<double> z(M, 0.0);
  for (std::size_t o = 0; o < M; ++o) {
    z[o] = model.theta[M * d + o];
    for (std::size_t i = 0; i < d; ++i) z[o] += model.theta[o * d + i] * ds.features[i];
  }
  const double peak = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - peak);
    sum += v;
  }
  for (double& v : z) v /= sum;
  z[1] -= 1.0;  // p - onehot(y)
  for (std::size_t o = 0; o < M; ++o) {
    for (std::size_t i = 0; i < d; ++i) {
      const double expected = model.theta[o * d + i] - 0.1 * z[o] * ds.features[i];
      CHECK(result.params.theta[o * d + i] == doctest::Approx(expected).epsilon(1e-10));
    }
    const double expected_b = model.theta[M * d + o] - 0.1 * z[o];
    CHECK(result.params.theta[M * d + o] == doctest::Approx(expected_b).epsilon(1e-10));
  }
}

TEST_CASE("flop counts scale linearly with epochs") {
  const auto ds = random_dataset(2, 25, 5, 4);
  const auto model = fedsim::init_model(Architecture::softmax_regression(5, 4), 7);
  TrainConfig cfg;
  cfg.epochs = 1;
  const double once = fedsim::local_train(model, ds, cfg, 9).flops;
  cfg.epochs = 2;
  const double twice = fedsim::local_train(model, ds, cfg, 9).flops;
  CHECK(twice == 2.0 * once);
  CHECK(once == 6.0 * 24.0 * 25.0);  // 6 * params * samples
}

TEST_CASE("training is deterministic per seed") {
  const auto ds = random_dataset(3, 40, 5, 4);
  const auto model = fedsim::init_model(Architecture::mlp(5, {6}, 4), 11);
  TrainConfig cfg;
  const auto a = fedsim::local_train(model, ds, cfg, 21);
  const auto b = fedsim::local_train(model, ds, cfg, 21);
  CHECK(a.params.theta == b.params.theta);
  CHECK(a.final_mean_loss == b.final_mean_loss);
}

TEST_CASE("aggregation takes the size-weighted mean") {
  const auto arch = Architecture::softmax_regression(2, 2);
  ModelParams w1{arch, std::vector<double>(arch.param_count(), 1.0)};
  ModelParams w2{arch, std::vector<double>(arch.param_count(), 3.0)};

  const auto equal = fedsim::fedavg_aggregate({{w1, 5}, {w2, 5}});
  for (double v : equal.theta) CHECK(v == doctest::Approx(2.0).epsilon(1e-12));

  const auto skewed = fedsim::fedavg_aggregate({{w1, 1}, {w2, 3}});
  for (double v : skewed.theta) CHECK(v == doctest::Approx(2.5).epsilon(1e-12));

  const auto single = fedsim::fedavg_aggregate({{w1, 7}});
  CHECK(single.theta == w1.theta);
}

TEST_CASE("aggregation matches a direct weighted sum on random updates") {
  fedsim::rng::Stream s(63);
  const auto arch = Architecture::softmax_regression(3, 3);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t count = 1 + s.below(6);
    std::vector<std::pair<ModelParams, std::int64_t>> updates;
    double total = 0.0;
    for (std::size_t j = 0; j < count; ++j) {
      ModelParams m{arch, {}};
      for (std::size_t k = 0; k < arch.param_count(); ++k) m.theta.push_back(s.normal());
      const auto n = static_cast<std::int64_t>(1 + s.below(100));
      total += static_cast<double>(n);
      updates.emplace_back(std::move(m), n);
    }
    const auto combined = fedsim::fedavg_aggregate(updates);
    for (std::size_t k = 0; k < arch.param_count(); ++k) {
      double expect = 0.0;
      for (const auto& [m, n] : updates) {
        expect += static_cast<double>(n) / total * m.theta[k];
      }
      CHECK(combined.theta[k] == doctest::Approx(expect).epsilon(1e-12));
    }
  }
}

TEST_CASE("aggregation rejects mixed architectures and empty input") {
  const auto a = fedsim::init_model(Architecture::softmax_regression(2, 2), 1);
  const auto b = fedsim::init_model(Architecture::softmax_regression(3, 2), 1);
  CHECK_THROWS_AS(fedsim::fedavg_aggregate({{a, 1}, {b, 1}}), std::invalid_argument);
  CHECK_THROWS_AS(fedsim::fedavg_aggregate({}), std::invalid_argument);
}

TEST_CASE("an all-zero model predicts one class; balanced data scores 1/M") {
  const std::size_t M = 10;
  const auto arch = Architecture::softmax_regression(4, M);
  ModelParams zero{arch, std::vector<double>(arch.param_count(), 0.0)};
  ClientDataset test;
  test.feature_dim = 4;
  test.label_counts.assign(M, 20);
  fedsim::rng::Stream s(17);
  for (std::size_t m = 0; m < M; ++m) {
    for (int i = 0; i < 20; ++i) {
      test.labels.push_back(static_cast<int>(m));
      for (int k = 0; k < 4; ++k) test.features.push_back(s.normal());
    }
  }
  const auto eval = fedsim::evaluate(zero, test);
  CHECK(eval.accuracy == 0.1);  // uniform logits, argmax tie to class 0
  CHECK(eval.mean_loss == doctest::Approx(std::log(10.0)).epsilon(1e-12));
}

TEST_CASE("separable blobs are learned to perfect accuracy") {
  const auto ds = separable_blobs(50, 3);
  auto model = fedsim::init_model(Architecture::softmax_regression(3, 2), 2);
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.batch_size = 16;
  cfg.learning_rate = 0.1;
  model = fedsim::local_train(model, ds, cfg, 8).params;
  CHECK(fedsim::evaluate(model, ds).accuracy == 1.0);
}

TEST_CASE("a relabeled test set scores zero") {
  const auto ds = separable_blobs(20, 3);
  auto model = fedsim::init_model(Architecture::softmax_regression(3, 2), 2);
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.batch_size = 16;
  cfg.learning_rate = 0.1;
  model = fedsim::local_train(model, ds, cfg, 8).params;
  ClientDataset flipped = ds;
  for (int& label : flipped.labels) label = 1 - label;
  CHECK(fedsim::evaluate(model, flipped).accuracy == 0.0);
}

TEST_CASE("per-sample flop rule is six units per parameter") {
  CHECK(fedsim::count_flops_per_sample(Architecture::softmax_regression(8, 4)) == 216.0);
  CHECK(fedsim::count_flops_per_sample(Architecture::mlp(784, {64, 30}, 10)) == 315000.0);
  CHECK(fedsim::count_flops_per_sample(Architecture::mlp(8, {}, 4)) == 216.0);
  CHECK(fedsim::forward_flops_per_sample(Architecture::softmax_regression(8, 4)) == 72.0);
}

TEST_CASE("gradients match central finite differences") {
  fedsim::rng::Stream s(90);
  const double h = 1e-5;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d = 2 + s.below(9);   // <= 10
    const std::size_t M = 2 + s.below(4);   // <= 5
    const std::size_t n = 1 + s.below(20);  // <= 20
    const bool deep = trial % 2 == 1;
    const auto arch = deep ? Architecture::mlp(d, {3 + s.below(4)}, M)
                           : Architecture::softmax_regression(d, M);
    const auto ds = random_dataset(1000 + trial, n, d, M);
    auto model = fedsim::init_model(arch, trial);
    // move off the ReLU kinks that break the two-sided difference
    for (double& v : model.theta) v += 0.01;

    const auto [loss, grad] = fedsim::loss_and_gradient(model, ds);
    CHECK(loss == doctest::Approx(fedsim::dataset_loss(model, ds)).epsilon(1e-12));
    for (std::size_t k = 0; k < model.theta.size(); ++k) {
      ModelParams plus = model, minus = model;
      plus.theta[k] += h;
      minus.theta[k] -= h;
      const double fd =
          (fedsim::dataset_loss(plus, ds) - fedsim::dataset_loss(minus, ds)) / (2.0 * h);
      const double scale = std::max({1.0, std::abs(fd), std::abs(grad[k])});
      CHECK(std::abs(grad[k] - fd) / scale < 1e-4);
    }
  }
}

TEST_CASE("a small convex step cannot increase the loss") {
  const auto ds = random_dataset(55, 30, 5, 3);
  const auto model = fedsim::init_model(Architecture::softmax_regression(5, 3), 5);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 1000;  // full batch
  cfg.learning_rate = 1e-3;
  cfg.momentum = 0.0;
  const auto result = fedsim::local_train(model, ds, cfg, 1);
  CHECK(fedsim::dataset_loss(result.params, ds) <= fedsim::dataset_loss(model, ds));
}

TEST_CASE("full participation with one full-batch epoch equals a central step") {
  // FedAvg over clients doing theta - eta*grad(L_j) averages to the
  // size-weighted central gradient step on the pooled data
  const std::size_t d = 4, M = 3;
  const auto arch = Architecture::softmax_regression(d, M);
  const auto model = fedsim::init_model(arch, 44);
  std::vector<ClientDataset> clients;
  clients.push_back(random_dataset(70, 10, d, M));
  clients.push_back(random_dataset(71, 25, d, M));
  clients.push_back(random_dataset(72, 15, d, M));

  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 1 << 20;
  cfg.learning_rate = 0.05;
  cfg.momentum = 0.0;
  std::vector<std::pair<ModelParams, std::int64_t>> updates;
  for (const auto& c : clients) {
    updates.emplace_back(fedsim::local_train(model, c, cfg, 1).params,
                         static_cast<std::int64_t>(c.n_samples()));
  }
  const auto federated = fedsim::fedavg_aggregate(updates);

  const auto pooled = fedsim::merge_datasets(clients);
  const auto [loss, grad] = fedsim::loss_and_gradient(model, pooled);
  for (std::size_t k = 0; k < model.theta.size(); ++k) {
    const double central = model.theta[k] - 0.05 * grad[k];
    CHECK(federated.theta[k] == doctest::Approx(central).epsilon(1e-8));
  }
}

TEST_CASE("train config validation rejects nonsense") {
  TrainConfig cfg;
  cfg.epochs = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = TrainConfig{};
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = TrainConfig{};
  cfg.learning_rate = -0.1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
