#include "fedsim/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "fedsim/privacy.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::kRandom: return "random";
    case Strategy::kPowerD: return "powerd";
    case Strategy::kSimclust: return "simclust";
    case Strategy::kRepclust: return "repclust";
  }
  throw std::invalid_argument("unknown strategy");
}

Strategy strategy_from_string(const std::string& name) {
  if (name == "random") return Strategy::kRandom;
  if (name == "powerd") return Strategy::kPowerD;
  if (name == "simclust") return Strategy::kSimclust;
  if (name == "repclust") return Strategy::kRepclust;
  throw std::invalid_argument("unknown strategy: " + name);
}

Architecture RunConfig::architecture() const {
  if (model.arch == "softmax") {
    return Architecture::softmax_regression(partition.feature_dim, partition.M);
  }
  if (model.arch == "mlp") {
    if (model.hidden.empty()) {
      throw std::invalid_argument("run: mlp needs at least one hidden width");
    }
    return Architecture::mlp(partition.feature_dim, model.hidden, partition.M);
  }
  throw std::invalid_argument("run: unknown arch " + model.arch);
}

void RunConfig::validate() const {
  partition.validate();
  train.validate();
  if (!(train.learning_rate > 0.0)) {
    throw std::invalid_argument("run: learning_rate must be > 0");
  }
  comm.validate();
  compute.validate();
  architecture();
  if (rounds < 1) throw std::invalid_argument("run: rounds must be >= 1");
  if (!(split_ratio > 0.0 && split_ratio < 1.0)) {
    throw std::invalid_argument("run: split_ratio must be in (0, 1)");
  }
  if (seeds.empty()) throw std::invalid_argument("run: need at least one seed");
  const std::size_t L = partition.L;
  if (selection.K < 1 || static_cast<std::size_t>(selection.K) > L) {
    throw std::invalid_argument("run: need 1 <= K <= L");
  }
  switch (selection.strategy) {
    case Strategy::kRandom:
      break;
    case Strategy::kPowerD:
      if (selection.d < selection.K || static_cast<std::size_t>(selection.d) > L) {
        throw std::invalid_argument("run: powerd needs K <= d <= L");
      }
      break;
    case Strategy::kSimclust:
      if (selection.G < 2 || static_cast<std::size_t>(selection.G) > L) {
        throw std::invalid_argument("run: simclust needs 2 <= G <= L");
      }
      break;
    case Strategy::kRepclust:
      if (selection.G < 2 || static_cast<std::size_t>(2 * selection.G) > L) {
        throw std::invalid_argument("run: repclust needs 2 <= G <= L/2");
      }
      if (selection.S < 0 || selection.S > selection.G) {
        throw std::invalid_argument("run: repclust needs 0 <= S <= G");
      }
      if (selection.max_iters < 1) {
        throw std::invalid_argument("run: repclust needs max_iters >= 1");
      }
      break;
  }
  if (selection.gamma < 0.0) throw std::invalid_argument("run: gamma must be >= 0");
  if (!(selection.lambda >= 0.0)) throw std::invalid_argument("run: lambda must be >= 0");
  if (report.sustain_window < 1) {
    throw std::invalid_argument("run: sustain_window must be >= 1");
  }
  for (double t : report.accuracy_targets) {
    if (!(t > 0.0 && t < 1.0)) {
      throw std::invalid_argument("run: accuracy targets must be in (0, 1)");
    }
  }
}

namespace {

// Label distributions the server clusters on: per-client empirical histogram,
// DP-perturbed and sanitized when gamma > 0.
std::vector<LabelDistribution> server_view_distributions(
    const std::vector<ClientDataset>& datasets, double gamma, std::size_t classes,
    std::uint64_t seed) {
  std::vector<LabelDistribution> dists;
  dists.reserve(datasets.size());
  for (const auto& ds : datasets) dists.push_back(ds.empirical_distribution());
  if (gamma <= 0.0) return dists;
  const double sigma = dp_sigma(gamma, classes, dists);
  std::vector<LabelDistribution> noisy;
  noisy.reserve(dists.size());
  for (std::size_t j = 0; j < dists.size(); ++j) {
    noisy.push_back(sanitize(perturb(dists[j], sigma, rng::derive(seed, "dp", j))));
  }
  return noisy;
}

}  // namespace

RunResult run_experiment(const RunConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const std::size_t L = cfg.partition.L;

  PartitionConfig pc = cfg.partition;
  pc.seed = rng::derive(seed, "partition");
  const std::vector<LabelDistribution> drawn = draw_client_label_distributions(pc);
  const std::vector<ClientDataset> datasets = materialize_client_datasets(pc, drawn);

  const std::uint64_t split_seed = rng::derive(seed, "split");
  std::vector<ClientDataset> train_shards, test_shards;
  train_shards.reserve(L);
  test_shards.reserve(L);
  for (const auto& ds : datasets) {
    auto [train, test] = train_test_split(ds, cfg.split_ratio, split_seed);
    train_shards.push_back(std::move(train));
    test_shards.push_back(std::move(test));
  }
  const ClientDataset global_test = merge_datasets(test_shards);

  std::vector<std::int64_t> sizes(L, 0);
  for (std::size_t j = 0; j < L; ++j) {
    sizes[j] = static_cast<std::int64_t>(train_shards[j].n_samples());
  }

  RunResult result;

  // one-time clustering on the server's (possibly DP) view, charged to round 0
  const bool clustered = cfg.selection.strategy == Strategy::kSimclust ||
                         cfg.selection.strategy == Strategy::kRepclust;
  if (clustered) {
    const std::vector<LabelDistribution> view = server_view_distributions(
        datasets, cfg.selection.gamma, cfg.partition.M, seed);
    FlopCounter counter;
    const std::uint64_t cluster_seed = rng::derive(seed, "cluster");
    if (cfg.selection.strategy == Strategy::kSimclust) {
      result.clusters = simclust(view, cfg.selection.G, cluster_seed, &counter).assignment;
    } else {
      const int S = cfg.selection.S > 0 ? cfg.selection.S : cfg.selection.G;
      result.clusters = repclust(view, cfg.selection.G, S, cfg.selection.max_iters,
                                 cfg.selection.lambda, cluster_seed, &counter)
                            .assignment;
    }
    result.clustering_pre_j = compute_energy(counter.flops, cfg.compute);
    result.ledger.add(0, -1, result.clustering_pre_j, 0.0, 0.0);
  }

  const Architecture arch = cfg.architecture();
  ModelParams global = init_model(arch, rng::derive(seed, "model"));
  const auto param_count = static_cast<std::int64_t>(arch.param_count());

  for (int t = 1; t <= cfg.rounds; ++t) {
    SelectionContext ctx;
    ctx.round = t;
    ctx.K = cfg.selection.K;
    ctx.sizes = sizes;
    ctx.clusters = result.clusters ? &*result.clusters : nullptr;
    ctx.d = cfg.selection.strategy == Strategy::kPowerD ? cfg.selection.d : 0;
    ctx.seed = seed;

    FlopCounter draw_counter;
    std::vector<int> selected;
    std::vector<double> candidate_pre(L, 0.0);
    switch (cfg.selection.strategy) {
      case Strategy::kRandom:
        selected = select_random(ctx, &draw_counter);
        break;
      case Strategy::kPowerD: {
        const std::vector<int> candidates = powerd_candidates(ctx, &draw_counter);
        std::vector<double> losses;
        losses.reserve(candidates.size());
        for (int c : candidates) {
          const auto& shard = train_shards[static_cast<std::size_t>(c)];
          losses.push_back(dataset_loss(global, shard));
          const double flops =
              forward_flops_per_sample(arch) * static_cast<double>(shard.n_samples());
          candidate_pre[static_cast<std::size_t>(c)] = compute_energy(flops, cfg.compute);
        }
        selected = select_powerd(ctx, candidates, losses, &draw_counter);
        for (int c : candidates) {
          const bool picked = std::binary_search(selected.begin(), selected.end(), c);
          if (!picked) {
            result.ledger.add(t, c, candidate_pre[static_cast<std::size_t>(c)], 0.0, 0.0);
          }
        }
        break;
      }
      case Strategy::kSimclust:
        selected = select_simclust(ctx, &draw_counter);
        break;
      case Strategy::kRepclust:
        selected = select_repclust(ctx, &draw_counter);
        break;
    }
    result.ledger.add(t, -1, compute_energy(draw_counter.flops, cfg.compute), 0.0, 0.0);

    const std::vector<double> comm =
        comm_energy_round(selected, selected, param_count, cfg.comm, L);

    std::vector<std::pair<ModelParams, std::int64_t>> updates;
    updates.reserve(selected.size());
    for (int j : selected) {
      const std::size_t sj = static_cast<std::size_t>(j);
      const TrainResult tr =
          local_train(global, train_shards[sj], cfg.train,
                      rng::derive(seed, "train", static_cast<std::uint64_t>(t),
                                  static_cast<std::uint64_t>(j)));
      const double train_j = compute_energy(tr.flops, cfg.compute);
      result.ledger.add(t, j, candidate_pre[sj], train_j, comm[sj]);
      updates.emplace_back(std::move(tr.params), sizes[sj]);
    }
    global = fedavg_aggregate(updates);
    const EvalResult eval = evaluate(global, global_test);

    RoundRecord record;
    record.round = t;
    record.selected = selected;
    record.accuracy = eval.accuracy;
    record.loss = eval.mean_loss;
    for (const auto& e : result.ledger.entries()) {
      if (e.round != t) continue;
      record.pre_j += e.pre_j;
      record.train_j += e.train_j;
      record.comm_j += e.comm_j;
    }
    result.records.push_back(std::move(record));
  }

  result.final_accuracy = result.records.back().accuracy;
  return result;
}

std::optional<SustainPoint> energy_to_sustained_accuracy(
    const std::vector<RoundRecord>& records, double target, int window,
    double round0_j) {
  if (window < 1) throw std::invalid_argument("sustain: window must be >= 1");
  const std::size_t w = static_cast<std::size_t>(window);
  if (records.size() < w) return std::nullopt;

  std::vector<double> cumulative(records.size(), 0.0);
  double running = round0_j;
  for (std::size_t i = 0; i < records.size(); ++i) {
    running += records[i].pre_j + records[i].train_j + records[i].comm_j;
    cumulative[i] = running;
  }

  std::size_t streak = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    streak = records[i].accuracy >= target ? streak + 1 : 0;
    if (streak >= w) {
      return SustainPoint{cumulative[i], records[i + 1 - w].round};
    }
  }
  return std::nullopt;
}

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size()));
}

}  // namespace

void write_per_round_csv(const std::string& path,
                         const std::vector<std::pair<std::uint64_t, RunResult>>& runs,
                         Strategy strategy) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "seed,round,strategy,accuracy,loss,pre_j,train_j,comm_j,cum_total_j\n";
  const std::string name = to_string(strategy);
  for (const auto& [seed, run] : runs) {
    double cumulative = run.clustering_pre_j;
    for (const auto& r : run.records) {
      cumulative += r.pre_j + r.train_j + r.comm_j;
      out << seed << "," << r.round << "," << name << "," << fmt17(r.accuracy) << ","
          << fmt17(r.loss) << "," << fmt17(r.pre_j) << "," << fmt17(r.train_j) << ","
          << fmt17(r.comm_j) << "," << fmt17(cumulative) << "\n";
    }
  }
}

void emit_report(const std::vector<std::pair<std::uint64_t, RunResult>>& runs,
                 const RunConfig& cfg, const std::string& out_dir,
                 std::optional<double> baseline_total_j) {
  if (runs.empty()) throw std::invalid_argument("emit_report: no runs");
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  write_per_round_csv((fs::path(out_dir) / "per_round.csv").string(), runs,
                      cfg.selection.strategy);
  for (const auto& [seed, run] : runs) {
    run.ledger.write_csv(
        (fs::path(out_dir) / ("ledger_seed" + std::to_string(seed) + ".csv")).string());
    if (run.clusters) {
      export_assignment_csv(
          *run.clusters,
          (fs::path(out_dir) / ("assignment_seed" + std::to_string(seed) + ".csv"))
              .string());
    }
  }

  std::vector<double> finals, totals;
  for (const auto& [seed, run] : runs) {
    finals.push_back(run.final_accuracy);
    totals.push_back(run.ledger.total());
  }
  const double mean_total = mean_of(totals);
  const double baseline = baseline_total_j.value_or(mean_total);

  nlohmann::ordered_json summary;
  summary["strategy"] = to_string(cfg.selection.strategy);
  summary["rounds"] = cfg.rounds;
  summary["num_seeds"] = runs.size();
  summary["seeds"] = nlohmann::ordered_json::array();
  for (const auto& [seed, run] : runs) summary["seeds"].push_back(seed);
  summary["final_accuracy"] = {{"mean", mean_of(finals)}, {"std", std_of(finals)}};
  summary["total_energy_j"] = {{"mean", mean_total}, {"std", std_of(totals)}};
  summary["baseline_total_j"] = baseline;
  summary["relative_energy_pct"] = 100.0 * mean_total / baseline;

  nlohmann::ordered_json targets = nlohmann::ordered_json::array();
  for (double target : cfg.report.accuracy_targets) {
    nlohmann::ordered_json entry;
    entry["target"] = target;
    nlohmann::ordered_json per_seed = nlohmann::ordered_json::array();
    std::vector<double> rounds_hit, joules_hit;
    for (const auto& [seed, run] : runs) {
      const auto hit = energy_to_sustained_accuracy(
          run.records, target, cfg.report.sustain_window, run.clustering_pre_j);
      nlohmann::ordered_json row;
      row["seed"] = seed;
      if (hit) {
        row["first_round"] = hit->first_round;
        row["energy_j"] = hit->cumulative_j;
        rounds_hit.push_back(hit->first_round);
        joules_hit.push_back(hit->cumulative_j);
      } else {
        row["first_round"] = nullptr;
        row["energy_j"] = nullptr;
      }
      per_seed.push_back(row);
    }
    entry["attained_seeds"] = rounds_hit.size();
    if (!rounds_hit.empty()) {
      entry["mean_first_round"] = mean_of(rounds_hit);
      entry["mean_energy_j"] = mean_of(joules_hit);
    } else {
      entry["mean_first_round"] = nullptr;
      entry["mean_energy_j"] = nullptr;
    }
    entry["per_seed"] = per_seed;
    targets.push_back(entry);
  }
  summary["energy_to_target"] = targets;

  std::ofstream out(fs::path(out_dir) / "summary.json");
  if (!out) throw std::runtime_error("cannot open summary.json");
  out << summary.dump(2) << "\n";
}

std::vector<DpAriRow> dp_ari_sweep(const PartitionConfig& planted,
                                   const std::vector<double>& gammas,
                                   const std::vector<std::uint64_t>& seeds, int G_sim,
                                   int G_rep, double lambda) {
  planted.validate();
  if (!std::isinf(planted.alpha)) {
    throw std::invalid_argument("dp_ari_sweep: planted scenario needs alpha=infinity");
  }
  const std::vector<LabelDistribution> clean = draw_client_label_distributions(planted);
  const std::size_t block = planted.L / planted.rho;
  std::vector<int> truth(planted.L, 0);
  for (std::size_t j = 0; j < planted.L; ++j) {
    truth[j] = static_cast<int>(j / block);
  }
  const ClusterAssignment planted_assignment(truth, static_cast<int>(planted.rho));

  std::vector<DpAriRow> rows;
  for (std::uint64_t seed : seeds) {
    const std::uint64_t cluster_seed = rng::derive(seed, "cluster");
    const ClusterAssignment rep_clean =
        repclust(clean, G_rep, G_rep, 100, lambda, cluster_seed, nullptr).assignment;
    for (double gamma : gammas) {
      std::vector<LabelDistribution> view;
      view.reserve(planted.L);
      if (gamma <= 0.0) {
        view = clean;
      } else {
        const double sigma = dp_sigma(gamma, planted.M, clean);
        for (std::size_t j = 0; j < planted.L; ++j) {
          view.push_back(sanitize(perturb(clean[j], sigma, rng::derive(seed, "dp", j))));
        }
      }
      const ClusterAssignment sim =
          simclust(view, G_sim, cluster_seed, nullptr).assignment;
      rows.push_back(
          {gamma, seed, "simclust", adjusted_rand_index(sim, planted_assignment)});
      const ClusterAssignment rep =
          repclust(view, G_rep, G_rep, 100, lambda, cluster_seed, nullptr).assignment;
      rows.push_back({gamma, seed, "repclust", adjusted_rand_index(rep, rep_clean)});
    }
  }
  return rows;
}

void write_dp_ari_csv(const std::vector<DpAriRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "gamma,seed,method,ari\n";
  for (const auto& r : rows) {
    out << fmt17(r.gamma) << "," << r.seed << "," << r.method << "," << fmt17(r.ari)
        << "\n";
  }
}

std::vector<BenchRow> scaling_bench(const std::vector<std::size_t>& L_grid,
                                    const std::vector<std::size_t>& rho_grid,
                                    std::size_t classes, std::uint64_t seed) {
  if (L_grid.empty() || rho_grid.empty()) {
    throw std::invalid_argument("bench: grids must be non-empty");
  }
  using clock = std::chrono::steady_clock;
  std::vector<BenchRow> rows;
  for (std::size_t L : L_grid) {
    for (std::size_t rho : rho_grid) {
      BenchRow base;
      base.L = L;
      base.rho = rho;
      if (rho < 2 || classes % rho != 0 || L % rho != 0 || 2 * rho > L) {
        base.method = "-";
        base.status = "skipped: invalid (L, rho) combination";
        rows.push_back(base);
        continue;
      }
      PartitionConfig pc;
      pc.L = L;
      pc.M = classes;
      pc.alpha = std::numeric_limits<double>::infinity();
      pc.rho = rho;
      pc.samples_per_client = 1;
      pc.feature_dim = 1;
      pc.seed = seed;
      const std::vector<LabelDistribution> dists = draw_client_label_distributions(pc);

      {
        BenchRow row = base;
        row.method = "simclust";
        row.G = static_cast<int>(rho);
        FlopCounter counter;
        const auto start = clock::now();
        simclust(dists, row.G, seed, &counter);
        row.wall_seconds = std::chrono::duration<double>(clock::now() - start).count();
        row.flops = counter.flops;
        row.status = "ok";
        rows.push_back(row);
      }
      {
        BenchRow row = base;
        row.method = "repclust";
        row.G = static_cast<int>(L / rho);
        if (static_cast<std::size_t>(2 * row.G) > L) {
          row.status = "skipped: G > L/2";
          rows.push_back(row);
          continue;
        }
        FlopCounter counter;
        const auto start = clock::now();
        repclust(dists, row.G, row.G, 3, 1.0, seed, &counter);
        row.wall_seconds = std::chrono::duration<double>(clock::now() - start).count();
        row.flops = counter.flops;
        row.status = "ok";
        rows.push_back(row);
      }
    }
  }
  return rows;
}

void write_bench_csv(const std::vector<BenchRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "L,rho,method,G,flops,wall_seconds,status\n";
  for (const auto& r : rows) {
    out << r.L << "," << r.rho << "," << r.method << "," << r.G << "," << fmt17(r.flops)
        << "," << fmt17(r.wall_seconds) << "," << r.status << "\n";
  }
}

}  // namespace fedsim
