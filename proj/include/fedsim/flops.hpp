#pragma once

#include <cstddef>

namespace fedsim {

// Abstract flop-unit accumulator. Algorithms charge their counted work here;
// the energy module converts units to joules.
struct FlopCounter {
  double flops = 0.0;
  void add(double f) { flops += f; }
};

// Null-safe charge helper for optional counters.
inline void charge(FlopCounter* c, double f) {
  if (c != nullptr) c->flops += f;
}

// Counting rule: one symmetrized-KL evaluation over M classes costs 10*M units.
inline double kl_eval_flops(std::size_t num_classes) {
  return 10.0 * static_cast<double>(num_classes);
}

// Counting rule: one elementary selection draw costs one unit.
inline constexpr double kSelectionDrawFlops = 1.0;

}  // namespace fedsim
