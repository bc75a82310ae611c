#pragma once

#include <cstdint>
#include <vector>

#include "fedsim/clustering.hpp"
#include "fedsim/flops.hpp"

namespace fedsim {

// Immutable per-round inputs to a selection strategy. Each strategy derives
// its RNG stream from (seed, round) so draw counts cannot leak across rounds.
struct SelectionContext {
  int round = 1;
  int K = 10;
  std::vector<std::int64_t> sizes;  // |D_j| per client
  const ClusterAssignment* clusters = nullptr;
  int d = 0;  // PowerD candidate width
  std::uint64_t seed = 0;

  std::size_t num_clients() const { return sizes.size(); }
  void validate() const;  // throws std::invalid_argument
};

// K distinct ids, drawn sequentially without replacement with probability
// proportional to |D_j| within the remaining pool. Sorted ascending.
std::vector<int> select_random(const SelectionContext& ctx,
                               FlopCounter* counter = nullptr);

// The d-candidate pool for PowerD, drawn like select_random.
std::vector<int> powerd_candidates(const SelectionContext& ctx,
                                   FlopCounter* counter = nullptr);

// The K candidates with the largest local losses; ties to the lower id.
std::vector<int> select_powerd(const SelectionContext& ctx,
                               const std::vector<int>& candidates,
                               const std::vector<double>& losses,
                               FlopCounter* counter = nullptr);

// G >= K: one uniform member from each of K uniformly chosen groups.
// K > G: quota floor(K/G) per group plus remainder spread uniformly, capped
// at group size with shortfall pushed to the largest remaining groups.
std::vector<int> select_simclust(const SelectionContext& ctx,
                                 FlopCounter* counter = nullptr);

// One uniform group; subsample if larger than K, accumulate further whole
// groups and trim uniformly if smaller.
std::vector<int> select_repclust(const SelectionContext& ctx,
                                 FlopCounter* counter = nullptr);

}  // namespace fedsim
