#include "fedsim/privacy.hpp"

#include <cmath>
#include <stdexcept>

#include "fedsim/rng.hpp"

namespace fedsim {

double dp_sigma(double gamma, std::size_t num_classes,
                const std::vector<LabelDistribution>& dists) {
  if (gamma < 0.0) throw std::invalid_argument("dp_sigma: gamma must be >= 0");
  if (num_classes == 0 || dists.empty()) {
    throw std::invalid_argument("dp_sigma: need at least one distribution");
  }
  double l1_sum = 0.0;
  for (const auto& p : dists) {
    for (double v : p.probs) l1_sum += std::abs(v);
  }
  return gamma / (static_cast<double>(num_classes) * static_cast<double>(dists.size())) *
         l1_sum;
}

std::vector<double> perturb(const LabelDistribution& dist, double sigma,
                            std::uint64_t seed) {
  if (sigma < 0.0) throw std::invalid_argument("perturb: sigma must be >= 0");
  std::vector<double> out = dist.probs;
  if (sigma == 0.0) return out;
  rng::Stream stream(seed, "perturb");
  for (double& v : out) v += stream.normal(0.0, sigma);
  return out;
}

LabelDistribution sanitize(const std::vector<double>& raw) {
  if (raw.empty()) throw std::invalid_argument("sanitize: empty input");
  bool any_positive = false;
  for (double v : raw) {
    if (v > 0.0) {
      any_positive = true;
      break;
    }
  }
  if (!any_positive) {
    return LabelDistribution(
        std::vector<double>(raw.size(), 1.0 / static_cast<double>(raw.size())));
  }
  return LabelDistribution(floor_and_renormalize(raw));
}

}  // namespace fedsim
