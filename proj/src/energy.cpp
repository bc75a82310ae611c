#include "fedsim/energy.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fedsim {

void CommConfig::validate() const {
  if (!(phy_rate > 0.0)) throw std::invalid_argument("comm: phy_rate must be > 0");
  if (bits_per_param < 0.0 || overhead_bits < 0.0) {
    throw std::invalid_argument("comm: bit counts must be >= 0");
  }
}

void ComputeConfig::validate() const {
  if (!(joules_per_flop > 0.0)) {
    throw std::invalid_argument("compute: joules_per_flop must be > 0");
  }
  if (memory_power_per_gb < 0.0) {
    throw std::invalid_argument("compute: memory_power_per_gb must be >= 0");
  }
  if (!(sample_interval > 0.0)) {
    throw std::invalid_argument("compute: sample_interval must be > 0");
  }
}

double dbm_to_watts(double p_dbm) {
  if (!std::isfinite(p_dbm)) throw std::invalid_argument("dbm_to_watts: non-finite input");
  return std::pow(10.0, p_dbm / 10.0) / 1000.0;
}

double airtime(std::int64_t param_count, const CommConfig& comm) {
  comm.validate();
  if (param_count < 0) throw std::invalid_argument("airtime: negative param count");
  return (comm.bits_per_param * static_cast<double>(param_count) + comm.overhead_bits) /
         comm.phy_rate;
}

std::vector<double> comm_energy_round(const std::vector<int>& participants_up,
                                      const std::vector<int>& participants_down,
                                      std::int64_t param_count, const CommConfig& comm,
                                      std::size_t num_clients) {
  const double dt = airtime(param_count, comm);
  const double p_up = dbm_to_watts(comm.p_up_dbm);
  const double p_down = dbm_to_watts(comm.p_down_dbm);
  std::vector<double> out(num_clients, 0.0);
  auto check = [num_clients](int id) {
    if (id < 0 || static_cast<std::size_t>(id) >= num_clients) {
      throw std::invalid_argument("comm_energy_round: client id out of range");
    }
  };
  for (int id : participants_up) {
    check(id);
    out[static_cast<std::size_t>(id)] += dt * p_up;
  }
  for (int id : participants_down) {
    check(id);
    out[static_cast<std::size_t>(id)] += dt * p_down;
  }
  return out;
}

double compute_energy(double flops, const ComputeConfig& compute) {
  compute.validate();
  if (flops < 0.0) throw std::invalid_argument("compute_energy: negative flops");
  return flops * compute.joules_per_flop;
}

double trace_energy(const std::vector<std::pair<double, double>>& power_samples,
                    double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("trace_energy: dt must be > 0");
  double total = 0.0;
  for (const auto& [cpu, gpu] : power_samples) {
    if (cpu < 0.0 || gpu < 0.0) {
      throw std::invalid_argument("trace_energy: negative power sample");
    }
    total += (cpu + gpu) * dt;
  }
  return total;
}

double memory_energy(const std::vector<double>& mem_gb_samples, double dt,
                     double power_per_gb) {
  if (!(dt > 0.0)) throw std::invalid_argument("memory_energy: dt must be > 0");
  double occupancy = 0.0;
  for (double gb : mem_gb_samples) {
    if (gb < 0.0) throw std::invalid_argument("memory_energy: negative memory sample");
    occupancy += gb;
  }
  return power_per_gb * occupancy * dt;
}

void EnergyLedger::add(int round, int client_id, double pre_j, double train_j,
                       double comm_j) {
  if (pre_j < 0.0 || train_j < 0.0 || comm_j < 0.0) {
    throw std::invalid_argument("ledger: negative energy entry");
  }
  entries_.push_back({round, client_id, pre_j, train_j, comm_j});
  pre_ += pre_j;
  train_ += train_j;
  comm_ += comm_j;
}

void EnergyLedger::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "round,client_id,pre_j,train_j,comm_j\n";
  char buf[96];
  for (const auto& e : entries_) {
    std::snprintf(buf, sizeof(buf), "%d,%d,%.17g,%.17g,%.17g\n", e.round, e.client_id,
                  e.pre_j, e.train_j, e.comm_j);
    out << buf;
  }
}

double relative_energy(const EnergyLedger& ledger, double baseline_total_j) {
  if (!(baseline_total_j > 0.0)) {
    throw std::invalid_argument("relative_energy: baseline must be positive");
  }
  return 100.0 * ledger.total() / baseline_total_j;
}

std::pair<double, double> replay_trace_csv(const std::string& path,
                                           const ComputeConfig& compute) {
  compute.validate();
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<std::pair<double, double>> power;
  std::vector<double> memory;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (line.find("t_index") != std::string::npos) continue;  // header
    }
    std::istringstream row(line);
    std::string cell;
    double values[4] = {0, 0, 0, 0};
    for (int c = 0; c < 4; ++c) {
      if (!std::getline(row, cell, ',')) {
        throw std::runtime_error("trace csv: expected 4 columns in: " + line);
      }
      values[c] = std::stod(cell);
    }
    power.emplace_back(values[1], values[2]);
    memory.push_back(values[3]);
  }
  return {trace_energy(power, compute.sample_interval),
          memory_energy(memory, compute.sample_interval, compute.memory_power_per_gb)};
}

}  // namespace fedsim
