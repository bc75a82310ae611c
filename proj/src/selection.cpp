#include "fedsim/selection.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "fedsim/rng.hpp"

namespace fedsim {

void SelectionContext::validate() const {
  if (sizes.empty()) throw std::invalid_argument("selection: no clients");
  if (K < 1 || static_cast<std::size_t>(K) > sizes.size()) {
    throw std::invalid_argument("selection: need 1 <= K <= L");
  }
  for (auto s : sizes) {
    if (s <= 0) throw std::invalid_argument("selection: client sizes must be positive");
  }
  if (d != 0 && (d < K || static_cast<std::size_t>(d) > sizes.size())) {
    throw std::invalid_argument("selection: need K <= d <= L");
  }
}

namespace {

rng::Stream round_stream(const SelectionContext& ctx) {
  return rng::Stream(ctx.seed, "select", static_cast<std::uint64_t>(ctx.round));
}

// One size-proportional draw from the pool; erases and returns the winner.
int weighted_draw(std::vector<int>& pool, const std::vector<std::int64_t>& sizes,
                  rng::Stream& stream, FlopCounter* counter) {
  double total = 0.0;
  for (int id : pool) total += static_cast<double>(sizes[static_cast<std::size_t>(id)]);
  const double target = stream.uniform() * total;
  charge(counter, kSelectionDrawFlops);
  double cum = 0.0;
  for (std::size_t k = 0; k < pool.size(); ++k) {
    cum += static_cast<double>(sizes[static_cast<std::size_t>(pool[k])]);
    if (target < cum) {
      const int id = pool[k];
      pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(k));
      return id;
    }
  }
  const int id = pool.back();  // numeric edge: target landed on the total
  pool.pop_back();
  return id;
}

// k uniform picks without replacement from ids; consumes the working copy.
std::vector<int> uniform_subset(std::vector<int> ids, std::size_t k,
                                rng::Stream& stream, FlopCounter* counter) {
  std::vector<int> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t pick = stream.below(ids.size());
    charge(counter, kSelectionDrawFlops);
    out.push_back(ids[pick]);
    ids[pick] = ids.back();
    ids.pop_back();
  }
  return out;
}

std::vector<int> weighted_without_replacement(const SelectionContext& ctx, std::size_t k,
                                              FlopCounter* counter) {
  ctx.validate();
  rng::Stream stream = round_stream(ctx);
  std::vector<int> pool(ctx.num_clients());
  std::iota(pool.begin(), pool.end(), 0);
  std::vector<int> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    out.push_back(weighted_draw(pool, ctx.sizes, stream, counter));
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

std::vector<int> select_random(const SelectionContext& ctx, FlopCounter* counter) {
  return weighted_without_replacement(ctx, static_cast<std::size_t>(ctx.K), counter);
}

std::vector<int> powerd_candidates(const SelectionContext& ctx, FlopCounter* counter) {
  if (ctx.d < ctx.K || static_cast<std::size_t>(ctx.d) > ctx.sizes.size()) {
    throw std::invalid_argument("powerd: need K <= d <= L");
  }
  return weighted_without_replacement(ctx, static_cast<std::size_t>(ctx.d), counter);
}

std::vector<int> select_powerd(const SelectionContext& ctx,
                               const std::vector<int>& candidates,
                               const std::vector<double>& losses, FlopCounter*) {
  ctx.validate();
  if (candidates.size() != losses.size()) {
    throw std::invalid_argument("powerd: one loss per candidate");
  }
  if (candidates.size() < static_cast<std::size_t>(ctx.K)) {
    throw std::invalid_argument("powerd: fewer candidates than K");
  }
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (losses[a] != losses[b]) return losses[a] > losses[b];
    return candidates[a] < candidates[b];
  });
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(ctx.K));
  for (int k = 0; k < ctx.K; ++k) out.push_back(candidates[order[static_cast<std::size_t>(k)]]);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<int> select_simclust(const SelectionContext& ctx, FlopCounter* counter) {
  ctx.validate();
  if (ctx.clusters == nullptr) throw std::invalid_argument("simclust selection: no clustering");
  const auto groups = ctx.clusters->groups();
  const int G = ctx.clusters->G;
  rng::Stream stream = round_stream(ctx);
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(ctx.K));

  if (G >= ctx.K) {
    // K distinct groups, one uniform member each
    std::vector<int> group_ids(static_cast<std::size_t>(G));
    std::iota(group_ids.begin(), group_ids.end(), 0);
    const std::vector<int> chosen =
        uniform_subset(std::move(group_ids), static_cast<std::size_t>(ctx.K), stream, counter);
    for (int g : chosen) {
      const auto& members = groups[static_cast<std::size_t>(g)];
      const std::size_t pick = stream.below(members.size());
      charge(counter, kSelectionDrawFlops);
      out.push_back(members[pick]);
    }
  } else {
    // quotas: floor(K/G) each, remainder to uniformly chosen groups
    std::vector<std::size_t> quota(static_cast<std::size_t>(G),
                                   static_cast<std::size_t>(ctx.K / G));
    const int remainder = ctx.K % G;
    if (remainder > 0) {
      std::vector<int> group_ids(static_cast<std::size_t>(G));
      std::iota(group_ids.begin(), group_ids.end(), 0);
      for (int g : uniform_subset(std::move(group_ids),
                                  static_cast<std::size_t>(remainder), stream, counter)) {
        quota[static_cast<std::size_t>(g)] += 1;
      }
    }
    // cap at group size; push shortfall to the groups with most spare members
    std::size_t shortfall = 0;
    for (std::size_t g = 0; g < quota.size(); ++g) {
      if (quota[g] > groups[g].size()) {
        shortfall += quota[g] - groups[g].size();
        quota[g] = groups[g].size();
      }
    }
    while (shortfall > 0) {
      std::size_t best = quota.size();
      std::size_t best_spare = 0;
      for (std::size_t g = 0; g < quota.size(); ++g) {
        const std::size_t spare = groups[g].size() - quota[g];
        if (spare > best_spare) {
          best_spare = spare;
          best = g;
        }
      }
      if (best == quota.size()) {
        throw std::invalid_argument("simclust selection: K exceeds total clients");
      }
      quota[best] += 1;
      shortfall -= 1;
    }
    for (std::size_t g = 0; g < quota.size(); ++g) {
      if (quota[g] == 0) continue;
      for (int id : uniform_subset(groups[g], quota[g], stream, counter)) {
        out.push_back(id);
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<int> select_repclust(const SelectionContext& ctx, FlopCounter* counter) {
  ctx.validate();
  if (ctx.clusters == nullptr) throw std::invalid_argument("repclust selection: no clustering");
  const auto groups = ctx.clusters->groups();
  const int G = ctx.clusters->G;
  rng::Stream stream = round_stream(ctx);

  std::vector<int> remaining(static_cast<std::size_t>(G));
  std::iota(remaining.begin(), remaining.end(), 0);
  const std::size_t first = stream.below(remaining.size());
  charge(counter, kSelectionDrawFlops);
  int g = remaining[first];
  remaining[first] = remaining.back();
  remaining.pop_back();

  const std::size_t K = static_cast<std::size_t>(ctx.K);
  std::vector<int> out = groups[static_cast<std::size_t>(g)];
  if (out.size() > K) {
    out = uniform_subset(std::move(out), K, stream, counter);
  } else {
    while (out.size() < K) {
      const std::size_t pick = stream.below(remaining.size());
      charge(counter, kSelectionDrawFlops);
      g = remaining[pick];
      remaining[pick] = remaining.back();
      remaining.pop_back();
      const auto& members = groups[static_cast<std::size_t>(g)];
      out.insert(out.end(), members.begin(), members.end());
    }
    while (out.size() > K) {
      const std::size_t drop = stream.below(out.size());
      charge(counter, kSelectionDrawFlops);
      out[drop] = out.back();
      out.pop_back();
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace fedsim
