#include "fedsim/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "fedsim/rng.hpp"

namespace fedsim {

std::vector<std::vector<int>> ClusterAssignment::groups() const {
  std::vector<std::vector<int>> out(static_cast<std::size_t>(G));
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    const int g = assignment[i];
    if (g < 0 || g >= G) throw std::invalid_argument("assignment: group id out of range");
    out[static_cast<std::size_t>(g)].push_back(static_cast<int>(i));
  }
  return out;
}

void ClusterAssignment::validate() const {
  if (G <= 0) throw std::invalid_argument("assignment: G must be positive");
  std::vector<int> sizes(static_cast<std::size_t>(G), 0);
  for (int g : assignment) {
    if (g < 0 || g >= G) throw std::invalid_argument("assignment: group id out of range");
    sizes[static_cast<std::size_t>(g)] += 1;
  }
  for (int s : sizes) {
    if (s == 0) throw std::invalid_argument("assignment: empty group");
  }
}

namespace {

double charged_kl(const LabelDistribution& p, const LabelDistribution& q,
                  FlopCounter* counter) {
  charge(counter, kl_eval_flops(p.num_classes()));
  return symmetrized_kl(p, q);
}

}  // namespace

SimclustResult simclust(const std::vector<LabelDistribution>& dists, int G,
                        std::uint64_t seed, FlopCounter* counter) {
  const std::size_t L = dists.size();
  if (G < 2 || static_cast<std::size_t>(G) > L) {
    throw std::invalid_argument("simclust: need 2 <= G <= L");
  }
  const std::size_t g_count = static_cast<std::size_t>(G);
  rng::Stream stream(seed, "simclust");

  // farthest-point initialization, first centroid drawn uniformly
  std::vector<LabelDistribution> centroids;
  centroids.reserve(g_count);
  centroids.push_back(dists[stream.below(L)]);
  std::vector<double> min_dist(L, std::numeric_limits<double>::infinity());
  while (centroids.size() < g_count) {
    std::size_t best = 0;
    double best_dist = -1.0;
    for (std::size_t i = 0; i < L; ++i) {
      const double d = charged_kl(dists[i], centroids.back(), counter);
      if (d < min_dist[i]) min_dist[i] = d;
      if (min_dist[i] > best_dist) {
        best_dist = min_dist[i];
        best = i;
      }
    }
    centroids.push_back(dists[best]);
  }

  SimclustResult result;
  std::vector<int> assignment(L, 0);
  std::vector<int> previous;
  double prev_objective = std::numeric_limits<double>::infinity();

  for (int iter = 0; iter < 100; ++iter) {
    // assignment step; keep each point's distance to its centroid
    std::vector<double> own_dist(L, 0.0);
    std::vector<int> sizes(g_count, 0);
    double objective = 0.0;
    std::vector<int> next(L, 0);
    for (std::size_t i = 0; i < L; ++i) {
      int arg = 0;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t g = 0; g < g_count; ++g) {
        const double d = charged_kl(dists[i], centroids[g], counter);
        if (d < best) {
          best = d;
          arg = static_cast<int>(g);
        }
      }
      next[i] = arg;
      own_dist[i] = best;
      objective += best;
      sizes[static_cast<std::size_t>(arg)] += 1;
    }

    // empty-cluster repair: steal the point farthest from its own centroid
    for (std::size_t g = 0; g < g_count; ++g) {
      if (sizes[g] > 0) continue;
      std::size_t victim = L;
      double worst = -1.0;
      for (std::size_t i = 0; i < L; ++i) {
        if (sizes[static_cast<std::size_t>(next[i])] < 2) continue;
        if (own_dist[i] > worst) {
          worst = own_dist[i];
          victim = i;
        }
      }
      if (victim == L) break;  // all clusters singleton; nothing to steal
      sizes[static_cast<std::size_t>(next[victim])] -= 1;
      next[victim] = static_cast<int>(g);
      sizes[g] += 1;
      const double d = charged_kl(dists[victim], centroids[g], counter);
      objective += d - own_dist[victim];
      own_dist[victim] = d;
    }

    // stop if the objective would rise (mean centroids are not exact
    // sym-KL barycenters, so this is not automatic)
    if (objective > prev_objective + 1e-12) break;

    assignment = next;
    result.iterations = iter + 1;
    result.objective_history.push_back(objective);
    prev_objective = objective;

    if (assignment == previous) break;
    previous = assignment;

    // centroid update
    std::vector<std::vector<int>> members(g_count);
    for (std::size_t i = 0; i < L; ++i) {
      members[static_cast<std::size_t>(assignment[i])].push_back(static_cast<int>(i));
    }
    for (std::size_t g = 0; g < g_count; ++g) {
      std::vector<LabelDistribution> group;
      group.reserve(members[g].size());
      for (int i : members[g]) group.push_back(dists[static_cast<std::size_t>(i)]);
      if (!group.empty()) centroids[g] = mean_distribution(group);
    }
  }

  result.assignment = ClusterAssignment(std::move(assignment), G);
  return result;
}

DiversityObjective diversity_objective(const ClusterAssignment& assignment,
                                       const DistanceMatrix& D,
                                       const std::vector<LabelDistribution>& dists,
                                       double lambda, FlopCounter* counter) {
  if (assignment.num_clients() != D.n || dists.size() != D.n) {
    throw std::invalid_argument("diversity_objective: size mismatch");
  }
  const auto groups = assignment.groups();
  const std::size_t G = groups.size();

  double intra = 0.0;
  for (const auto& g : groups) {
    const std::size_t s = g.size();
    if (s < 2) continue;
    double sum = 0.0;
    for (std::size_t a = 0; a < s; ++a) {
      for (std::size_t b = a + 1; b < s; ++b) {
        sum += D.at(static_cast<std::size_t>(g[a]), static_cast<std::size_t>(g[b]));
      }
    }
    intra += 2.0 * sum / (static_cast<double>(s) * static_cast<double>(s - 1));
  }
  intra /= static_cast<double>(G);

  std::vector<LabelDistribution> means;
  means.reserve(G);
  for (const auto& g : groups) {
    std::vector<LabelDistribution> group;
    group.reserve(g.size());
    for (int i : g) group.push_back(dists[static_cast<std::size_t>(i)]);
    means.push_back(mean_distribution(group));
  }
  double inter = 0.0;
  if (G > 1) {
    for (std::size_t a = 0; a < G; ++a) {
      for (std::size_t b = a + 1; b < G; ++b) {
        inter += charged_kl(means[a], means[b], counter);
      }
    }
    inter *= 2.0 / (static_cast<double>(G) * static_cast<double>(G - 1));
  }

  DiversityObjective out;
  out.intra = intra;
  out.inter = inter;
  out.lambda = lambda;
  out.scalar = intra - lambda * inter;
  return out;
}

namespace {

// Equal-size assignment of shuffled ids; the first L%G groups take the extra.
std::vector<int> dealt_assignment(std::size_t L, int G, rng::Stream& stream) {
  std::vector<int> ids(L);
  std::iota(ids.begin(), ids.end(), 0);
  stream.shuffle(ids);
  std::vector<int> assignment(L, 0);
  const std::size_t base = L / static_cast<std::size_t>(G);
  const std::size_t extra = L % static_cast<std::size_t>(G);
  std::size_t slot = 0;
  for (int g = 0; g < G; ++g) {
    const std::size_t size = base + (static_cast<std::size_t>(g) < extra ? 1 : 0);
    for (std::size_t k = 0; k < size; ++k) {
      assignment[static_cast<std::size_t>(ids[slot++])] = g;
    }
  }
  return assignment;
}

}  // namespace

RepclustResult repclust(const std::vector<LabelDistribution>& dists, int G, int S,
                        int max_iters, double lambda, std::uint64_t seed,
                        FlopCounter* counter) {
  const std::size_t L = dists.size();
  if (G < 2 || static_cast<std::size_t>(2 * G) > L) {
    throw std::invalid_argument("repclust: need 2 <= G <= L/2");
  }
  if (S < 1 || S > G) throw std::invalid_argument("repclust: need 1 <= S <= G");
  if (max_iters < 1) throw std::invalid_argument("repclust: max_iters must be >= 1");

  rng::Stream stream(seed, "repclust");
  std::vector<int> assignment = dealt_assignment(L, G, stream);
  const DistanceMatrix D = pairwise_distances(dists, counter);

  ClusterAssignment current(assignment, G);
  DiversityObjective cur = diversity_objective(current, D, dists, lambda, counter);

  RepclustResult result;
  result.initial_scalar = cur.scalar;

  const std::size_t top = static_cast<std::size_t>(std::min(S, G));
  bool improved = true;
  while (improved && result.sweeps < max_iters) {
    improved = false;
    result.sweeps += 1;

    // per group: the closest pair of members, ties to lowest client ids
    const auto groups = current.groups();
    std::vector<int> rep_first(groups.size(), -1);
    std::vector<double> min_pair(groups.size(), std::numeric_limits<double>::infinity());
    for (std::size_t g = 0; g < groups.size(); ++g) {
      const auto& members = groups[g];
      for (std::size_t a = 0; a < members.size(); ++a) {
        for (std::size_t b = a + 1; b < members.size(); ++b) {
          const double d = D.at(static_cast<std::size_t>(members[a]),
                                static_cast<std::size_t>(members[b]));
          if (d < min_pair[g]) {
            min_pair[g] = d;
            rep_first[g] = members[a];
          }
        }
      }
    }

    // groups ordered by ascending closest-pair distance
    std::vector<std::size_t> order(groups.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return min_pair[a] < min_pair[b];
    });

    for (std::size_t k = 0; k < top; ++k) {
      for (std::size_t l = k + 1; l < top; ++l) {
        const int a = rep_first[order[k]];
        const int b = rep_first[order[l]];
        if (a < 0 || b < 0) continue;
        std::vector<int>& asg = current.assignment;
        const std::size_t ia = static_cast<std::size_t>(a);
        const std::size_t ib = static_cast<std::size_t>(b);
        if (asg[ia] == asg[ib]) continue;  // an earlier commit merged their groups' reps
        std::swap(asg[ia], asg[ib]);
        const DiversityObjective trial =
            diversity_objective(current, D, dists, lambda, counter);
        if (trial.scalar > cur.scalar) {
          cur = trial;
          improved = true;
        } else {
          std::swap(asg[ia], asg[ib]);
        }
      }
    }
  }

  result.final_scalar = cur.scalar;
  result.assignment = std::move(current);
  return result;
}

std::size_t count_equal_partitions(std::size_t L, int G) {
  // L! / ((s!)^G * G!) computed incrementally as a product of binomials / G!
  const std::size_t s = L / static_cast<std::size_t>(G);
  long double count = 1.0L;
  std::size_t remaining = L;
  for (int g = 0; g < G; ++g) {
    // C(remaining - 1, s - 1): the lowest remaining id anchors its group
    long double c = 1.0L;
    for (std::size_t k = 1; k < s; ++k) {
      c = c * static_cast<long double>(remaining - k) / static_cast<long double>(k);
    }
    count *= c;
    remaining -= s;
    if (count > 1e18L) return std::numeric_limits<std::size_t>::max();
  }
  return static_cast<std::size_t>(count + 0.5L);
}

namespace {

void enumerate_partitions(std::size_t next, std::vector<int>& assignment,
                          std::vector<std::size_t>& sizes, std::size_t s, int G,
                          int used, const DistanceMatrix& D,
                          const std::vector<LabelDistribution>& dists, double lambda,
                          double& best_scalar, std::vector<int>& best,
                          DiversityObjective& best_obj, std::size_t& visited) {
  const std::size_t L = assignment.size();
  if (next == L) {
    ++visited;
    const ClusterAssignment cand(assignment, G);
    const DiversityObjective obj = diversity_objective(cand, D, dists, lambda, nullptr);
    if (obj.scalar > best_scalar) {
      best_scalar = obj.scalar;
      best = assignment;
      best_obj = obj;
    }
    return;
  }
  const int limit = std::min(used + 1, G);
  for (int g = 0; g < limit; ++g) {
    if (sizes[static_cast<std::size_t>(g)] == s) continue;
    assignment[next] = g;
    sizes[static_cast<std::size_t>(g)] += 1;
    enumerate_partitions(next + 1, assignment, sizes, s, G, std::max(used, g + 1), D,
                         dists, lambda, best_scalar, best, best_obj, visited);
    sizes[static_cast<std::size_t>(g)] -= 1;
  }
}

}  // namespace

std::pair<ClusterAssignment, DiversityObjective> brute_force_diverse_grouping(
    const std::vector<LabelDistribution>& dists, int G, double lambda) {
  const std::size_t L = dists.size();
  if (G < 2 || static_cast<std::size_t>(G) > L) {
    throw std::invalid_argument("brute_force: need 2 <= G <= L");
  }
  if (L % static_cast<std::size_t>(G) != 0) {
    throw std::invalid_argument("brute_force: G must divide L");
  }
  if (count_equal_partitions(L, G) > 1000000) {
    throw std::invalid_argument("brute_force: instance too large");
  }
  const std::size_t s = L / static_cast<std::size_t>(G);
  const DistanceMatrix D = pairwise_distances(dists, nullptr);

  std::vector<int> assignment(L, 0);
  std::vector<std::size_t> sizes(static_cast<std::size_t>(G), 0);
  std::vector<int> best;
  DiversityObjective best_obj;
  double best_scalar = -std::numeric_limits<double>::infinity();
  std::size_t visited = 0;
  enumerate_partitions(0, assignment, sizes, s, G, 0, D, dists, lambda, best_scalar,
                       best, best_obj, visited);
  return {ClusterAssignment(std::move(best), G), best_obj};
}

double adjusted_rand_index(const ClusterAssignment& a, const ClusterAssignment& b) {
  if (a.num_clients() != b.num_clients()) {
    throw std::invalid_argument("adjusted_rand_index: length mismatch");
  }
  const std::size_t n = a.num_clients();
  const std::size_t ga = static_cast<std::size_t>(a.G);
  const std::size_t gb = static_cast<std::size_t>(b.G);
  std::vector<double> table(ga * gb, 0.0);
  std::vector<double> rows(ga, 0.0), cols(gb, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t x = static_cast<std::size_t>(a.assignment[i]);
    const std::size_t y = static_cast<std::size_t>(b.assignment[i]);
    table[x * gb + y] += 1.0;
    rows[x] += 1.0;
    cols[y] += 1.0;
  }
  auto choose2 = [](double v) { return v * (v - 1.0) / 2.0; };
  double index = 0.0, row_sum = 0.0, col_sum = 0.0;
  for (double v : table) index += choose2(v);
  for (double v : rows) row_sum += choose2(v);
  for (double v : cols) col_sum += choose2(v);
  const double total = choose2(static_cast<double>(n));
  const double expected = row_sum * col_sum / total;
  const double max_index = 0.5 * (row_sum + col_sum);
  const double denom = max_index - expected;
  if (denom == 0.0) return 1.0;  // both partitions trivial, necessarily equal
  return (index - expected) / denom;
}

void export_assignment_csv(const ClusterAssignment& assignment, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "client_id,group_id\n";
  for (std::size_t i = 0; i < assignment.assignment.size(); ++i) {
    out << i << "," << assignment.assignment[i] << "\n";
  }
}

}  // namespace fedsim
