#pragma once

#include <cstdint>
#include <vector>

#include "fedsim/distributions.hpp"

namespace fedsim {

// Gaussian-mechanism noise scale gamma/(M*L) * sum_j ||p_j||_1; equals
// gamma/M exactly for valid simplex inputs.
double dp_sigma(double gamma, std::size_t num_classes,
                const std::vector<LabelDistribution>& dists);

// Adds i.i.d. N(0, sigma^2) per coordinate; the result may leave the simplex.
std::vector<double> perturb(const LabelDistribution& dist, double sigma,
                            std::uint64_t seed);

// Clamp-below-floor-and-renormalize repair; all-non-positive input falls back
// to the uniform distribution.
LabelDistribution sanitize(const std::vector<double>& raw);

}  // namespace fedsim
