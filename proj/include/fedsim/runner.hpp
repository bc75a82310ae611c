#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fedsim/clustering.hpp"
#include "fedsim/energy.hpp"
#include "fedsim/model.hpp"
#include "fedsim/partition.hpp"
#include "fedsim/selection.hpp"

namespace fedsim {

enum class Strategy { kRandom, kPowerD, kSimclust, kRepclust };

std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& name);

struct SelectionConfig {
  Strategy strategy = Strategy::kRandom;
  int K = 10;
  int G = 10;          // cluster count for simclust/repclust
  int d = 20;          // PowerD candidate width
  double lambda = 1.0; // diversity trade-off
  double gamma = 0.0;  // DP noise level on shared label distributions
  int S = 0;           // repclust search width; 0 means use G
  int max_iters = 100; // repclust sweep cap
};

struct ReportConfig {
  std::vector<double> accuracy_targets;
  int sustain_window = 20;
};

struct ModelConfig {
  std::string arch = "softmax";     // "softmax" | "mlp"
  std::vector<std::size_t> hidden;  // mlp hidden widths
};

struct RunConfig {
  PartitionConfig partition;
  TrainConfig train;
  SelectionConfig selection;
  CommConfig comm;
  ComputeConfig compute;
  ModelConfig model;
  int rounds = 500;
  double split_ratio = 0.7;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  ReportConfig report;

  Architecture architecture() const;
  void validate() const;  // throws std::invalid_argument
};

struct RoundRecord {
  int round = 0;
  std::vector<int> selected;
  double accuracy = 0.0;
  double loss = 0.0;
  double pre_j = 0.0;
  double train_j = 0.0;
  double comm_j = 0.0;
};

struct RunResult {
  std::vector<RoundRecord> records;
  EnergyLedger ledger;
  std::optional<ClusterAssignment> clusters;
  double clustering_pre_j = 0.0;  // one-time cost, charged at round 0
  double final_accuracy = 0.0;
};

// Full pipeline: partition, split, optional DP + clustering, T rounds of
// select/train/aggregate/evaluate. Deterministic per (cfg, seed); every
// internal stream is derived from the call seed, never from partition.seed.
RunResult run_experiment(const RunConfig& cfg, std::uint64_t seed);

struct SustainPoint {
  double cumulative_j = 0.0;  // total energy through the end of the window
  int first_round = 0;        // earliest round where the window starts
};

// Earliest round r with accuracy >= target across [r, r+window); cumulative
// energy includes the round-0 clustering charge.
std::optional<SustainPoint> energy_to_sustained_accuracy(
    const std::vector<RoundRecord>& records, double target, int window = 20,
    double round0_j = 0.0);

// Per-round CSV columns: seed, round, strategy, accuracy, loss, pre_j,
// train_j, comm_j, cum_total_j. Written with %.17g so identical runs are
// byte-identical.
void write_per_round_csv(const std::string& path,
                         const std::vector<std::pair<std::uint64_t, RunResult>>& runs,
                         Strategy strategy);

// per_round.csv + summary.json (+ ledger and assignment CSVs per seed).
void emit_report(const std::vector<std::pair<std::uint64_t, RunResult>>& runs,
                 const RunConfig& cfg, const std::string& out_dir,
                 std::optional<double> baseline_total_j);

struct DpAriRow {
  double gamma = 0.0;
  std::uint64_t seed = 0;
  std::string method;
  double ari = 0.0;
};

// Privacy sweep on a homogeneous planted scenario: simclust ARI vs the
// planted partition, repclust ARI vs its own clean (gamma=0) grouping.
std::vector<DpAriRow> dp_ari_sweep(const PartitionConfig& planted,
                                   const std::vector<double>& gammas,
                                   const std::vector<std::uint64_t>& seeds, int G_sim,
                                   int G_rep, double lambda);

void write_dp_ari_csv(const std::vector<DpAriRow>& rows, const std::string& path);

struct BenchRow {
  std::size_t L = 0;
  std::size_t rho = 0;
  std::string method;
  int G = 0;
  double flops = 0.0;
  double wall_seconds = 0.0;
  std::string status;  // "ok" or a skip reason
};

// Clustering cost over (L, rho) grids on planted data: simclust with G=rho,
// repclust with G=L/rho. Counted flops plus wall time per cell.
std::vector<BenchRow> scaling_bench(const std::vector<std::size_t>& L_grid,
                                    const std::vector<std::size_t>& rho_grid,
                                    std::size_t classes, std::uint64_t seed);

void write_bench_csv(const std::vector<BenchRow>& rows, const std::string& path);

}  // namespace fedsim
