#pragma once

#include <cstddef>
#include <vector>

#include "fedsim/flops.hpp"

namespace fedsim {

inline constexpr double kEpsFloor = 1e-12;
inline constexpr double kSimplexTol = 1e-9;

// Point on the M-class probability simplex.
struct LabelDistribution {
  std::vector<double> probs;

  LabelDistribution() = default;
  explicit LabelDistribution(std::vector<double> p) : probs(std::move(p)) {}

  std::size_t num_classes() const { return probs.size(); }
};

bool is_valid_simplex(const LabelDistribution& p, double tol = kSimplexTol);

// Throws std::invalid_argument when p is not a valid simplex point.
void require_valid_simplex(const LabelDistribution& p);

// Clamps entries below kEpsFloor up to kEpsFloor, then renormalizes to sum 1.
std::vector<double> floor_and_renormalize(std::vector<double> v);

// Jeffreys divergence KL(p||q) + KL(q||p) in nats, computed on floored and
// renormalized copies so zero entries stay finite.
double symmetrized_kl(const LabelDistribution& p, const LabelDistribution& q);

// Elementwise arithmetic mean of member distributions.
LabelDistribution mean_distribution(const std::vector<LabelDistribution>& members);

// Symmetric matrix of pairwise divergences, zero diagonal.
struct DistanceMatrix {
  std::size_t n = 0;
  std::vector<double> data;  // row-major n*n

  DistanceMatrix() = default;
  explicit DistanceMatrix(std::size_t size) : n(size), data(size * size, 0.0) {}

  double at(std::size_t i, std::size_t j) const { return data[i * n + j]; }
  double& at(std::size_t i, std::size_t j) { return data[i * n + j]; }
};

// Charges n*(n-1)/2 divergence evaluations to the counter.
DistanceMatrix pairwise_distances(const std::vector<LabelDistribution>& dists,
                                  FlopCounter* counter = nullptr);

}  // namespace fedsim
