// Command-line front end: run / sweep / dp-ari / bench / report.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fedsim/rng.hpp"
#include "fedsim/runner.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

double parse_alpha(const json& value) {
  if (value.is_string()) {
    const std::string s = value.get<std::string>();
    if (s == "infinity" || s == "inf") return std::numeric_limits<double>::infinity();
    return std::stod(s);
  }
  return value.get<double>();
}

double parse_alpha_string(const std::string& s) {
  if (s == "infinity" || s == "inf") return std::numeric_limits<double>::infinity();
  return std::stod(s);
}

template <typename T>
void maybe(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

void apply_config_json(const json& cfg, fedsim::RunConfig& run) {
  if (cfg.contains("partition")) {
    const json& p = cfg.at("partition");
    maybe(p, "L", run.partition.L);
    maybe(p, "M", run.partition.M);
    if (p.contains("alpha")) run.partition.alpha = parse_alpha(p.at("alpha"));
    maybe(p, "rho", run.partition.rho);
    maybe(p, "samples_per_client", run.partition.samples_per_client);
    maybe(p, "feature_dim", run.partition.feature_dim);
    maybe(p, "seed", run.partition.seed);
  }
  if (cfg.contains("train")) {
    const json& t = cfg.at("train");
    maybe(t, "epochs", run.train.epochs);
    maybe(t, "batch_size", run.train.batch_size);
    maybe(t, "learning_rate", run.train.learning_rate);
    maybe(t, "momentum", run.train.momentum);
  }
  if (cfg.contains("selection")) {
    const json& s = cfg.at("selection");
    if (s.contains("strategy")) {
      run.selection.strategy =
          fedsim::strategy_from_string(s.at("strategy").get<std::string>());
    }
    maybe(s, "K", run.selection.K);
    maybe(s, "G", run.selection.G);
    maybe(s, "d", run.selection.d);
    maybe(s, "lambda", run.selection.lambda);
    maybe(s, "gamma", run.selection.gamma);
    maybe(s, "S", run.selection.S);
    maybe(s, "max_iters", run.selection.max_iters);
  }
  if (cfg.contains("energy")) {
    const json& e = cfg.at("energy");
    maybe(e, "p_up_dbm", run.comm.p_up_dbm);
    maybe(e, "p_down_dbm", run.comm.p_down_dbm);
    maybe(e, "phy_rate", run.comm.phy_rate);
    maybe(e, "bits_per_param", run.comm.bits_per_param);
    maybe(e, "overhead_bits", run.comm.overhead_bits);
    maybe(e, "joules_per_flop", run.compute.joules_per_flop);
    maybe(e, "memory_power_per_gb", run.compute.memory_power_per_gb);
    maybe(e, "sample_interval", run.compute.sample_interval);
  }
  if (cfg.contains("model")) {
    const json& m = cfg.at("model");
    maybe(m, "arch", run.model.arch);
    maybe(m, "hidden", run.model.hidden);
  }
  maybe(cfg, "rounds", run.rounds);
  maybe(cfg, "split_ratio", run.split_ratio);
  maybe(cfg, "seeds", run.seeds);
  if (cfg.contains("report")) {
    const json& r = cfg.at("report");
    maybe(r, "accuracy_targets", run.report.accuracy_targets);
    maybe(r, "sustain_window", run.report.sustain_window);
  }
}

json config_to_json(const fedsim::RunConfig& run) {
  json cfg;
  cfg["partition"] = {
      {"L", run.partition.L},
      {"M", run.partition.M},
      {"alpha", std::isinf(run.partition.alpha) ? json("infinity")
                                                : json(run.partition.alpha)},
      {"rho", run.partition.rho},
      {"samples_per_client", run.partition.samples_per_client},
      {"feature_dim", run.partition.feature_dim},
      {"seed", run.partition.seed}};
  cfg["train"] = {{"epochs", run.train.epochs},
                  {"batch_size", run.train.batch_size},
                  {"learning_rate", run.train.learning_rate},
                  {"momentum", run.train.momentum}};
  cfg["selection"] = {{"strategy", fedsim::to_string(run.selection.strategy)},
                      {"K", run.selection.K},
                      {"G", run.selection.G},
                      {"d", run.selection.d},
                      {"lambda", run.selection.lambda},
                      {"gamma", run.selection.gamma},
                      {"S", run.selection.S},
                      {"max_iters", run.selection.max_iters}};
  cfg["energy"] = {{"p_up_dbm", run.comm.p_up_dbm},
                   {"p_down_dbm", run.comm.p_down_dbm},
                   {"phy_rate", run.comm.phy_rate},
                   {"bits_per_param", run.comm.bits_per_param},
                   {"overhead_bits", run.comm.overhead_bits},
                   {"joules_per_flop", run.compute.joules_per_flop},
                   {"memory_power_per_gb", run.compute.memory_power_per_gb},
                   {"sample_interval", run.compute.sample_interval}};
  cfg["model"] = {{"arch", run.model.arch}, {"hidden", run.model.hidden}};
  cfg["rounds"] = run.rounds;
  cfg["split_ratio"] = run.split_ratio;
  cfg["seeds"] = run.seeds;
  cfg["report"] = {{"accuracy_targets", run.report.accuracy_targets},
                   {"sustain_window", run.report.sustain_window}};
  return cfg;
}

// dotted-name override flags shared by the run-like subcommands
struct OverrideBinding {
  std::string alpha;
  std::string strategy;
};

void add_override_flags(CLI::App* cmd, fedsim::RunConfig& cfg, OverrideBinding& bind) {
  cmd->add_option("--partition.L", cfg.partition.L);
  cmd->add_option("--partition.M", cfg.partition.M);
  cmd->add_option("--partition.alpha", bind.alpha, "number or 'infinity'");
  cmd->add_option("--partition.rho", cfg.partition.rho);
  cmd->add_option("--partition.samples_per_client", cfg.partition.samples_per_client);
  cmd->add_option("--partition.feature_dim", cfg.partition.feature_dim);
  cmd->add_option("--partition.seed", cfg.partition.seed);
  cmd->add_option("--train.epochs", cfg.train.epochs);
  cmd->add_option("--train.batch_size", cfg.train.batch_size);
  cmd->add_option("--train.learning_rate", cfg.train.learning_rate);
  cmd->add_option("--train.momentum", cfg.train.momentum);
  cmd->add_option("--selection.strategy", bind.strategy,
                  "random|powerd|simclust|repclust");
  cmd->add_option("--selection.K", cfg.selection.K);
  cmd->add_option("--selection.G", cfg.selection.G);
  cmd->add_option("--selection.d", cfg.selection.d);
  cmd->add_option("--selection.lambda", cfg.selection.lambda);
  cmd->add_option("--selection.gamma", cfg.selection.gamma);
  cmd->add_option("--selection.S", cfg.selection.S);
  cmd->add_option("--selection.max_iters", cfg.selection.max_iters);
  cmd->add_option("--energy.p_up_dbm", cfg.comm.p_up_dbm);
  cmd->add_option("--energy.p_down_dbm", cfg.comm.p_down_dbm);
  cmd->add_option("--energy.phy_rate", cfg.comm.phy_rate);
  cmd->add_option("--energy.bits_per_param", cfg.comm.bits_per_param);
  cmd->add_option("--energy.overhead_bits", cfg.comm.overhead_bits);
  cmd->add_option("--energy.joules_per_flop", cfg.compute.joules_per_flop);
  cmd->add_option("--energy.memory_power_per_gb", cfg.compute.memory_power_per_gb);
  cmd->add_option("--energy.sample_interval", cfg.compute.sample_interval);
  cmd->add_option("--model.arch", cfg.model.arch, "softmax|mlp");
  cmd->add_option("--model.hidden", cfg.model.hidden)->delimiter(',');
  cmd->add_option("--rounds", cfg.rounds);
  cmd->add_option("--split_ratio", cfg.split_ratio);
  cmd->add_option("--seeds", cfg.seeds)->delimiter(',');
  cmd->add_option("--report.accuracy_targets", cfg.report.accuracy_targets)
      ->delimiter(',');
  cmd->add_option("--report.sustain_window", cfg.report.sustain_window);
}

void finish_overrides(const OverrideBinding& bind, fedsim::RunConfig& cfg) {
  if (!bind.alpha.empty()) cfg.partition.alpha = parse_alpha_string(bind.alpha);
  if (!bind.strategy.empty()) {
    cfg.selection.strategy = fedsim::strategy_from_string(bind.strategy);
  }
}

std::optional<double> load_baseline_total(const std::string& path) {
  if (path.empty()) return std::nullopt;
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open baseline summary: " + path);
  json summary = json::parse(in);
  return summary.at("total_energy_j").at("mean").get<double>();
}

std::vector<std::pair<std::uint64_t, fedsim::RunResult>> run_all_seeds(
    const fedsim::RunConfig& cfg) {
  std::vector<std::pair<std::uint64_t, fedsim::RunResult>> runs;
  for (std::uint64_t seed : cfg.seeds) {
    runs.emplace_back(seed, fedsim::run_experiment(cfg, seed));
  }
  return runs;
}

int cmd_run(fedsim::RunConfig cfg, const std::string& out_dir,
            const std::string& baseline_path, bool export_data) {
  cfg.validate();
  const auto runs = run_all_seeds(cfg);
  fedsim::emit_report(runs, cfg, out_dir, load_baseline_total(baseline_path));
  {
    std::ofstream out(fs::path(out_dir) / "run_config.json");
    out << config_to_json(cfg).dump(2) << "\n";
  }
  if (export_data) {
    fedsim::PartitionConfig pc = cfg.partition;
    pc.seed = fedsim::rng::derive(cfg.seeds.front(), "partition");
    const auto dists = fedsim::draw_client_label_distributions(pc);
    const auto datasets = fedsim::materialize_client_datasets(pc, dists);
    fedsim::export_datasets_csv(datasets, (fs::path(out_dir) / "data.csv").string());
  }
  std::cout << "wrote " << out_dir << "\n";
  return 0;
}

int cmd_sweep(fedsim::RunConfig cfg, const std::string& out_dir,
              std::vector<std::string> strategies, std::vector<int> g_grid,
              std::vector<double> gamma_grid) {
  if (strategies.empty()) strategies = {"random", "powerd", "simclust", "repclust"};
  if (g_grid.empty()) g_grid = {2, 5, 10, 20, 25, 50};
  if (gamma_grid.empty()) gamma_grid = {cfg.selection.gamma};
  fs::create_directories(out_dir);

  std::ofstream table(fs::path(out_dir) / "sweep_summary.csv");
  table << "strategy,G,gamma,mean_final_accuracy,std_final_accuracy,mean_total_j,"
           "relative_energy_pct\n";

  std::optional<double> baseline;
  auto run_cell = [&](const fedsim::RunConfig& cell, const std::string& tag) {
    cell.validate();
    const auto runs = run_all_seeds(cell);
    fedsim::emit_report(runs, cell, (fs::path(out_dir) / tag).string(), baseline);
    double mean_acc = 0.0, mean_total = 0.0;
    std::vector<double> finals;
    for (const auto& [seed, run] : runs) {
      finals.push_back(run.final_accuracy);
      mean_total += run.ledger.total();
    }
    mean_total /= static_cast<double>(runs.size());
    for (double f : finals) mean_acc += f;
    mean_acc /= static_cast<double>(finals.size());
    double var = 0.0;
    for (double f : finals) var += (f - mean_acc) * (f - mean_acc);
    const double stddev = std::sqrt(var / static_cast<double>(finals.size()));
    if (!baseline) baseline = mean_total;  // first cell anchors relative energy
    char line[256];
    std::snprintf(line, sizeof(line), "%s,%d,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  fedsim::to_string(cell.selection.strategy).c_str(), cell.selection.G,
                  cell.selection.gamma, mean_acc, stddev, mean_total,
                  100.0 * (mean_total / *baseline));
    table << line;
  };

  // baseline strategies first so clustering cells report against random
  std::sort(strategies.begin(), strategies.end(), [](const auto& a, const auto& b) {
    auto rank = [](const std::string& s) { return s == "random" ? 0 : s == "powerd" ? 1 : 2; };
    return rank(a) < rank(b);
  });
  for (const std::string& name : strategies) {
    fedsim::RunConfig cell = cfg;
    cell.selection.strategy = fedsim::strategy_from_string(name);
    if (name == "random" || name == "powerd") {
      run_cell(cell, name);
      continue;
    }
    for (int g : g_grid) {
      const std::size_t L = cfg.partition.L;
      const bool feasible = name == "simclust"
                                ? (g >= 2 && static_cast<std::size_t>(g) <= L)
                                : (g >= 2 && static_cast<std::size_t>(2 * g) <= L);
      if (!feasible) {
        std::cerr << "skip " << name << " G=" << g << ": infeasible for L=" << L << "\n";
        continue;
      }
      for (double gamma : gamma_grid) {
        fedsim::RunConfig c2 = cell;
        c2.selection.G = g;
        c2.selection.gamma = gamma;
        std::ostringstream tag;
        tag << name << "_G" << g << "_gamma" << gamma;
        run_cell(c2, tag.str());
      }
    }
  }
  std::cout << "wrote " << out_dir << "\n";
  return 0;
}

int cmd_dp_ari(fedsim::RunConfig cfg, const std::string& out_path,
               std::vector<double> gammas, int num_seeds) {
  if (gammas.empty()) gammas = {0.0, 0.5, 1.0, 2.0, 4.0};
  fedsim::PartitionConfig planted = cfg.partition;
  planted.alpha = std::numeric_limits<double>::infinity();  // homogeneous scenario
  std::vector<std::uint64_t> seeds = cfg.seeds;
  if (num_seeds > 0) {
    seeds.clear();
    for (int s = 1; s <= num_seeds; ++s) seeds.push_back(static_cast<std::uint64_t>(s));
  }
  const int g_sim = static_cast<int>(planted.rho);
  const int g_rep = static_cast<int>(planted.L / planted.rho);
  const auto rows = fedsim::dp_ari_sweep(planted, gammas, seeds, g_sim, g_rep,
                                         cfg.selection.lambda);
  fedsim::write_dp_ari_csv(rows, out_path);
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

int cmd_bench(const fedsim::RunConfig& cfg, const std::string& out_path,
              std::vector<std::size_t> l_grid, std::vector<std::size_t> rho_grid) {
  if (l_grid.empty()) l_grid = {50, 100, 200, 400};
  if (rho_grid.empty()) rho_grid = {5, 10};
  const auto rows = fedsim::scaling_bench(l_grid, rho_grid, cfg.partition.M,
                                          cfg.seeds.empty() ? 1 : cfg.seeds.front());
  fedsim::write_bench_csv(rows, out_path);
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

// Rebuilds per-seed round records from an existing per_round.csv.
int cmd_report(const fedsim::RunConfig& cfg, const std::string& per_round_path,
               const std::string& out_dir, const std::string& baseline_path,
               const std::string& trace_path) {
  if (!trace_path.empty()) {
    const auto [units_j, memory_j] = fedsim::replay_trace_csv(trace_path, cfg.compute);
    json out = {{"units_energy_j", units_j},
                {"memory_energy_j", memory_j},
                {"total_j", units_j + memory_j}};
    if (out_dir.empty()) {
      std::cout << out.dump(2) << "\n";
    } else {
      fs::create_directories(out_dir);
      std::ofstream f(fs::path(out_dir) / "trace_energy.json");
      f << out.dump(2) << "\n";
      std::cout << "wrote " << out_dir << "\n";
    }
    return 0;
  }

  std::ifstream in(per_round_path);
  if (!in) throw std::runtime_error("cannot open " + per_round_path);
  std::string line;
  std::getline(in, line);  // header
  std::map<std::uint64_t, fedsim::RunResult> by_seed;
  std::map<std::uint64_t, double> first_cum;
  std::string strategy_name = "random";
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    if (cells.size() != 9) throw std::runtime_error("per-round csv: bad row: " + line);
    const std::uint64_t seed = std::stoull(cells[0]);
    fedsim::RoundRecord r;
    r.round = std::stoi(cells[1]);
    strategy_name = cells[2];
    r.accuracy = std::stod(cells[3]);
    r.loss = std::stod(cells[4]);
    r.pre_j = std::stod(cells[5]);
    r.train_j = std::stod(cells[6]);
    r.comm_j = std::stod(cells[7]);
    const double cum = std::stod(cells[8]);
    auto& result = by_seed[seed];
    if (result.records.empty()) {
      first_cum[seed] = cum - (r.pre_j + r.train_j + r.comm_j);  // round-0 charge
      result.clustering_pre_j = first_cum[seed];
      if (result.clustering_pre_j > 0.0) {
        result.ledger.add(0, -1, result.clustering_pre_j, 0.0, 0.0);
      }
    }
    result.ledger.add(r.round, -1, r.pre_j, r.train_j, r.comm_j);
    result.records.push_back(std::move(r));
  }
  std::vector<std::pair<std::uint64_t, fedsim::RunResult>> runs;
  for (auto& [seed, result] : by_seed) {
    result.final_accuracy = result.records.back().accuracy;
    runs.emplace_back(seed, std::move(result));
  }
  fedsim::RunConfig rcfg = cfg;
  rcfg.selection.strategy = fedsim::strategy_from_string(strategy_name);
  rcfg.rounds = runs.empty() ? 0 : static_cast<int>(runs.front().second.records.size());
  fedsim::emit_report(runs, rcfg, out_dir, load_baseline_total(baseline_path));
  std::cout << "wrote " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic federated-learning simulator with clustering-informed "
               "client selection and energy accounting"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);

  fedsim::RunConfig cfg;
  OverrideBinding bind;

  // The config file is applied before CLI parsing so flags override it.
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    std::string path;
    if (arg == "--config" && i + 1 < argc) {
      path = argv[i + 1];
    } else if (arg.rfind("--config=", 0) == 0) {
      path = arg.substr(9);
    } else {
      continue;
    }
    std::ifstream in(path);
    if (!in) {
      std::cerr << "error: cannot open config: " << path << "\n";
      return 1;
    }
    try {
      apply_config_json(json::parse(in), cfg);
    } catch (const std::exception& e) {
      std::cerr << "error: bad config " << path << ": " << e.what() << "\n";
      return 1;
    }
    break;
  }

  std::string out_dir = "out";
  std::string baseline_path;
  bool export_data = false;
  std::vector<std::string> strategies;
  std::vector<int> g_grid;
  std::vector<double> gamma_grid;
  std::vector<double> gammas;
  int num_seeds = 0;
  std::vector<std::size_t> l_grid, rho_grid;
  std::string per_round_path, trace_path, report_out;

  CLI::App* run = app.add_subcommand("run", "single experiment over the config seeds");
  run->add_option("--out", out_dir, "output directory");
  run->add_option("--baseline", baseline_path, "summary.json of a baseline run");
  run->add_flag("--export-data", export_data, "also write the client datasets CSV");
  add_override_flags(run, cfg, bind);

  CLI::App* sweep = app.add_subcommand("sweep", "grid over strategies, G and gamma");
  sweep->add_option("--out", out_dir, "output directory");
  sweep->add_option("--strategies", strategies)->delimiter(',');
  sweep->add_option("--G-grid", g_grid)->delimiter(',');
  sweep->add_option("--gamma-grid", gamma_grid)->delimiter(',');
  add_override_flags(sweep, cfg, bind);

  CLI::App* dp = app.add_subcommand("dp-ari", "ARI vs privacy level on planted data");
  dp->add_option("--out", out_dir, "output csv path");
  dp->add_option("--gammas", gammas)->delimiter(',');
  dp->add_option("--num-seeds", num_seeds, "use seeds 1..N");
  add_override_flags(dp, cfg, bind);

  CLI::App* bench = app.add_subcommand("bench", "clustering cost scaling grid");
  bench->add_option("--out", out_dir, "output csv path");
  bench->add_option("--L-grid", l_grid)->delimiter(',');
  bench->add_option("--rho-grid", rho_grid)->delimiter(',');
  add_override_flags(bench, cfg, bind);

  CLI::App* report = app.add_subcommand("report", "re-summarize CSVs or replay a trace");
  report->add_option("--per-round", per_round_path, "existing per_round.csv");
  report->add_option("--out", report_out, "output directory (or stdout for --trace)");
  report->add_option("--baseline", baseline_path, "summary.json of a baseline run");
  report->add_option("--trace", trace_path,
                     "power/memory trace csv (t_index,p_cpu_w,p_gpu_w,mem_gb)");
  add_override_flags(report, cfg, bind);

  CLI11_PARSE(app, argc, argv);

  try {
    finish_overrides(bind, cfg);
    if (run->parsed()) return cmd_run(cfg, out_dir, baseline_path, export_data);
    if (sweep->parsed()) return cmd_sweep(cfg, out_dir, strategies, g_grid, gamma_grid);
    if (dp->parsed()) {
      const std::string path = out_dir == "out" ? "dp_ari.csv" : out_dir;
      return cmd_dp_ari(cfg, path, gammas, num_seeds);
    }
    if (bench->parsed()) {
      const std::string path = out_dir == "out" ? "bench.csv" : out_dir;
      return cmd_bench(cfg, path, l_grid, rho_grid);
    }
    if (report->parsed()) {
      if (trace_path.empty() && per_round_path.empty()) {
        throw std::runtime_error("report: need --per-round or --trace");
      }
      return cmd_report(cfg, per_round_path, report_out, baseline_path, trace_path);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
