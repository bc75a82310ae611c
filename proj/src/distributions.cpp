#include "fedsim/distributions.hpp"

#include <cmath>
#include <stdexcept>

namespace fedsim {

bool is_valid_simplex(const LabelDistribution& p, double tol) {
  if (p.probs.empty()) return false;
  double sum = 0.0;
  for (double v : p.probs) {
    if (!(v >= 0.0)) return false;  // also rejects NaN
    sum += v;
  }
  return std::abs(sum - 1.0) <= tol;
}

void require_valid_simplex(const LabelDistribution& p) {
  if (!is_valid_simplex(p)) {
    throw std::invalid_argument("not a valid probability simplex point");
  }
}

std::vector<double> floor_and_renormalize(std::vector<double> v) {
  double sum = 0.0;
  for (double& x : v) {
    if (x < kEpsFloor) x = kEpsFloor;
    sum += x;
  }
  for (double& x : v) x /= sum;
  return v;
}

double symmetrized_kl(const LabelDistribution& p, const LabelDistribution& q) {
  require_valid_simplex(p);
  require_valid_simplex(q);
  if (p.num_classes() != q.num_classes()) {
    throw std::invalid_argument("symmetrized_kl: dimension mismatch");
  }
  const std::vector<double> a = floor_and_renormalize(p.probs);
  const std::vector<double> b = floor_and_renormalize(q.probs);
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == b[i]) continue;
    // (a-b)*log(a/b) with the larger entry on top, so the result is bitwise
    // identical under argument swap
    const double hi = std::max(a[i], b[i]);
    const double lo = std::min(a[i], b[i]);
    d += (hi - lo) * std::log(hi / lo);
  }
  return d;
}

LabelDistribution mean_distribution(const std::vector<LabelDistribution>& members) {
  if (members.empty()) {
    throw std::invalid_argument("mean_distribution: empty member list");
  }
  const std::size_t m = members.front().num_classes();
  std::vector<double> out(m, 0.0);
  for (const auto& p : members) {
    if (p.num_classes() != m) {
      throw std::invalid_argument("mean_distribution: dimension mismatch");
    }
    for (std::size_t i = 0; i < m; ++i) out[i] += p.probs[i];
  }
  for (double& x : out) x /= static_cast<double>(members.size());
  return LabelDistribution(std::move(out));
}

DistanceMatrix pairwise_distances(const std::vector<LabelDistribution>& dists,
                                  FlopCounter* counter) {
  const std::size_t n = dists.size();
  if (n < 2) {
    throw std::invalid_argument("pairwise_distances: need at least 2 distributions");
  }
  DistanceMatrix out(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = symmetrized_kl(dists[i], dists[j]);
      out.at(i, j) = d;
      out.at(j, i) = d;
      charge(counter, kl_eval_flops(dists[i].num_classes()));
    }
  }
  return out;
}

}  // namespace fedsim
