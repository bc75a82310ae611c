#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fedsim/flops.hpp"

namespace fedsim {

struct CommConfig {
  double p_up_dbm = 9.0;
  double p_down_dbm = 20.0;
  double phy_rate = 150e6;  // bits/second
  double bits_per_param = 32.0;
  double overhead_bits = 0.0;

  void validate() const;  // throws std::invalid_argument
};

struct ComputeConfig {
  double joules_per_flop = 1e-9;
  double memory_power_per_gb = 0.375;  // watts per GB
  double sample_interval = 15.0;       // seconds, trace mode

  void validate() const;
};

double dbm_to_watts(double p_dbm);

// Serialization airtime: (bits_per_param * param_count + overhead) / rate.
double airtime(std::int64_t param_count, const CommConfig& comm);

// Per-client joules for one round over L clients: airtime * (up + down powers)
// by participation; clients in neither set contribute zero.
std::vector<double> comm_energy_round(const std::vector<int>& participants_up,
                                      const std::vector<int>& participants_down,
                                      std::int64_t param_count, const CommConfig& comm,
                                      std::size_t num_clients);

double compute_energy(double flops, const ComputeConfig& compute);

// Replay of (P_cpu, P_gpu) watt samples at a fixed interval.
double trace_energy(const std::vector<std::pair<double, double>>& power_samples,
                    double dt);

// 0.375 W/GB (configurable) over memory occupancy samples.
double memory_energy(const std::vector<double>& mem_gb_samples, double dt,
                     double power_per_gb = 0.375);

struct LedgerEntry {
  int round = 0;
  int client_id = 0;  // -1 marks server-side work
  double pre_j = 0.0;
  double train_j = 0.0;
  double comm_j = 0.0;
};

// Append-only per-(round, client) energy record with running totals.
class EnergyLedger {
 public:
  void add(int round, int client_id, double pre_j, double train_j, double comm_j);

  const std::vector<LedgerEntry>& entries() const { return entries_; }
  double pre_total() const { return pre_; }
  double train_total() const { return train_; }
  double comm_total() const { return comm_; }
  double total() const { return pre_ + train_ + comm_; }

  // CSV layout: round, client_id, pre_j, train_j, comm_j
  void write_csv(const std::string& path) const;

 private:
  std::vector<LedgerEntry> entries_;
  double pre_ = 0.0;
  double train_ = 0.0;
  double comm_ = 0.0;
};

// 100 * ledger total / baseline total.
double relative_energy(const EnergyLedger& ledger, double baseline_total_j);

// Reads a trace CSV with columns (t_index, p_cpu_w, p_gpu_w, mem_gb) and
// returns the replayed units energy and memory energy in joules.
std::pair<double, double> replay_trace_csv(const std::string& path,
                                           const ComputeConfig& compute);

}  // namespace fedsim
