#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string_view>
#include <vector>

namespace fedsim::rng {

// splitmix64 finalizer; stateless mixing step for seed derivation.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Deterministic sub-seed for a named stream: (seed, purpose, a, b) -> 64 bits.
inline std::uint64_t derive(std::uint64_t seed, std::string_view purpose,
                            std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t h = mix64(seed);
  h = mix64(h ^ fnv1a(purpose));
  h = mix64(h ^ a);
  h = mix64(h ^ b);
  return h;
}

// Seeded stream with hand-rolled draw algorithms so sequences are identical
// across standard libraries and platforms.
class Stream {
 public:
  explicit Stream(std::uint64_t seed) : eng_(seed) {}
  Stream(std::uint64_t seed, std::string_view purpose, std::uint64_t a = 0,
         std::uint64_t b = 0)
      : eng_(derive(seed, purpose, a, b)) {}

  std::uint64_t bits() { return eng_(); }

  // [0, 1) with 53-bit resolution
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // unbiased integer in [0, n)
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
    const std::uint64_t limit = max - max % n;
    std::uint64_t v = eng_();
    while (v >= limit) v = eng_();
    return v % n;
  }

  // standard normal via Marsaglia polar method, spare cached
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Gamma(shape, 1) via Marsaglia-Tsang, with the shape<1 boost
  double gamma(double shape) {
    if (shape < 1.0) {
      double u = uniform();
      while (u == 0.0) u = uniform();
      return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v)))
        return d * v;
    }
  }

  // symmetric Dirichlet(alpha, ..., alpha) over k categories
  std::vector<double> dirichlet(double alpha, std::size_t k) {
    std::vector<double> out(k);
    double sum = 0.0;
    for (auto& g : out) {
      g = gamma(alpha);
      sum += g;
    }
    if (sum <= 0.0) {
      for (auto& g : out) g = 1.0 / static_cast<double>(k);
      return out;
    }
    for (auto& g : out) g /= sum;
    return out;
  }

  // Fisher-Yates
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace fedsim::rng
