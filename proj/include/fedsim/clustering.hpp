#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fedsim/distributions.hpp"

namespace fedsim {

struct ClusterAssignment {
  std::vector<int> assignment;  // group id per client, in [0, G)
  int G = 0;

  ClusterAssignment() = default;
  ClusterAssignment(std::vector<int> a, int groups)
      : assignment(std::move(a)), G(groups) {}

  std::size_t num_clients() const { return assignment.size(); }
  std::vector<std::vector<int>> groups() const;
  void validate() const;  // throws std::invalid_argument
};

// Composite diversity score: high intra-group spread, similar group means.
struct DiversityObjective {
  double intra = 0.0;   // mean within-group pairwise distance (nats)
  double inter = 0.0;   // mean pairwise distance between group means (nats)
  double lambda = 1.0;  // trade-off weight
  double scalar = 0.0;  // intra - lambda * inter
};

struct SimclustResult {
  ClusterAssignment assignment;
  int iterations = 0;
  // total within-cluster divergence after each assignment step
  std::vector<double> objective_history;
};

// k-means under symmetrized KL: farthest-point init, Lloyd iteration with
// arithmetic-mean centroids, empty-cluster repair, at most 100 iterations.
// Stops early (reverting the last step) if the objective would increase.
SimclustResult simclust(const std::vector<LabelDistribution>& dists, int G,
                        std::uint64_t seed, FlopCounter* counter = nullptr);

// intra: mean over groups of the mean ordered-pair distance within the group
// (singletons contribute 0); inter: mean distance over unordered pairs of
// group mean distributions; scalar: intra - lambda * inter.
DiversityObjective diversity_objective(const ClusterAssignment& assignment,
                                       const DistanceMatrix& D,
                                       const std::vector<LabelDistribution>& dists,
                                       double lambda,
                                       FlopCounter* counter = nullptr);

struct RepclustResult {
  ClusterAssignment assignment;
  double initial_scalar = 0.0;
  double final_scalar = 0.0;
  int sweeps = 0;
};

// Diverse-grouping local search: random equal-size init; each sweep finds the
// closest pair inside every group, sorts groups by that distance, and tries
// swapping the first pair member between the top-S groups, committing only
// strict improvements; repeats while improving, up to max_iters sweeps.
RepclustResult repclust(const std::vector<LabelDistribution>& dists, int G, int S,
                        int max_iters, double lambda, std::uint64_t seed,
                        FlopCounter* counter = nullptr);

// Exhaustive equal-size-partition maximizer for tiny instances (G must divide
// L; at most 1e6 candidate partitions). Ties resolved toward the
// lexicographically smallest canonical assignment vector.
std::pair<ClusterAssignment, DiversityObjective> brute_force_diverse_grouping(
    const std::vector<LabelDistribution>& dists, int G, double lambda);

std::size_t count_equal_partitions(std::size_t L, int G);

double adjusted_rand_index(const ClusterAssignment& a, const ClusterAssignment& b);

// CSV layout: client_id, group_id
void export_assignment_csv(const ClusterAssignment& assignment, const std::string& path);

}  // namespace fedsim
