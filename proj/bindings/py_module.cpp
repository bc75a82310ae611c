#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "fedsim/clustering.hpp"
#include "fedsim/energy.hpp"
#include "fedsim/model.hpp"
#include "fedsim/partition.hpp"
#include "fedsim/privacy.hpp"
#include "fedsim/rng.hpp"
#include "fedsim/runner.hpp"
#include "fedsim/selection.hpp"

namespace py = pybind11;

namespace {

// Distributions cross the boundary as plain lists of floats.
std::vector<fedsim::LabelDistribution> wrap_dists(
    const std::vector<std::vector<double>>& raw) {
  std::vector<fedsim::LabelDistribution> out;
  out.reserve(raw.size());
  for (const auto& p : raw) out.emplace_back(p);
  return out;
}

std::vector<std::vector<double>> unwrap_dists(
    const std::vector<fedsim::LabelDistribution>& dists) {
  std::vector<std::vector<double>> out;
  out.reserve(dists.size());
  for (const auto& p : dists) out.push_back(p.probs);
  return out;
}

std::vector<std::vector<double>> matrix_rows(const fedsim::DistanceMatrix& D) {
  std::vector<std::vector<double>> rows(D.n, std::vector<double>(D.n));
  for (std::size_t i = 0; i < D.n; ++i) {
    for (std::size_t j = 0; j < D.n; ++j) rows[i][j] = D.at(i, j);
  }
  return rows;
}

fedsim::SelectionContext make_context(const std::vector<std::int64_t>& sizes, int K,
                                      int round, std::uint64_t seed,
                                      const fedsim::ClusterAssignment* clusters,
                                      int d) {
  fedsim::SelectionContext ctx;
  ctx.round = round;
  ctx.K = K;
  ctx.sizes = sizes;
  ctx.seed = seed;
  ctx.clusters = clusters;
  ctx.d = d;
  return ctx;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() =
      "Deterministic federated-learning simulator: non-IID partitioning, "
      "clustering-informed client selection, and per-round energy accounting.";
  m.attr("__version__") = "0.1.0";
  m.attr("EPS_FLOOR") = fedsim::kEpsFloor;

  // label distributions
  m.def("floor_and_renormalize", &fedsim::floor_and_renormalize, py::arg("v"),
        "Clamp entries below the floor and renormalize to sum 1.");
  m.def(
      "symmetrized_kl",
      [](const std::vector<double>& p, const std::vector<double>& q) {
        return fedsim::symmetrized_kl(fedsim::LabelDistribution{p},
                                      fedsim::LabelDistribution{q});
      },
      py::arg("p"), py::arg("q"), "Jeffreys divergence KL(p||q) + KL(q||p) in nats.");
  m.def(
      "mean_distribution",
      [](const std::vector<std::vector<double>>& members) {
        return fedsim::mean_distribution(wrap_dists(members)).probs;
      },
      py::arg("members"));
  m.def(
      "pairwise_distances",
      [](const std::vector<std::vector<double>>& dists) {
        return matrix_rows(fedsim::pairwise_distances(wrap_dists(dists)));
      },
      py::arg("dists"), "Symmetric matrix of pairwise divergences as nested lists.");

  // data partitioning
  py::class_<fedsim::PartitionConfig>(m, "PartitionConfig")
      .def(py::init<>())
      .def_readwrite("L", &fedsim::PartitionConfig::L)
      .def_readwrite("M", &fedsim::PartitionConfig::M)
      .def_readwrite("alpha", &fedsim::PartitionConfig::alpha)
      .def_readwrite("rho", &fedsim::PartitionConfig::rho)
      .def_readwrite("samples_per_client", &fedsim::PartitionConfig::samples_per_client)
      .def_readwrite("feature_dim", &fedsim::PartitionConfig::feature_dim)
      .def_readwrite("seed", &fedsim::PartitionConfig::seed)
      .def("validate", &fedsim::PartitionConfig::validate);

  py::class_<fedsim::ClientDataset>(m, "ClientDataset")
      .def(py::init<>())
      .def_readwrite("client_id", &fedsim::ClientDataset::client_id)
      .def_readwrite("feature_dim", &fedsim::ClientDataset::feature_dim)
      .def_readwrite("features", &fedsim::ClientDataset::features)
      .def_readwrite("labels", &fedsim::ClientDataset::labels)
      .def_readwrite("label_counts", &fedsim::ClientDataset::label_counts)
      .def("n_samples", &fedsim::ClientDataset::n_samples)
      .def("empirical_distribution", [](const fedsim::ClientDataset& ds) {
        return ds.empirical_distribution().probs;
      });

  m.def("largest_remainder_counts", &fedsim::largest_remainder_counts,
        py::arg("probs"), py::arg("total"));
  m.def(
      "draw_client_label_distributions",
      [](const fedsim::PartitionConfig& cfg) {
        return unwrap_dists(fedsim::draw_client_label_distributions(cfg));
      },
      py::arg("cfg"));
  m.def(
      "materialize_client_datasets",
      [](const fedsim::PartitionConfig& cfg,
         const std::vector<std::vector<double>>& dists) {
        return fedsim::materialize_client_datasets(cfg, wrap_dists(dists));
      },
      py::arg("cfg"), py::arg("dists"));
  m.def("train_test_split", &fedsim::train_test_split, py::arg("ds"), py::arg("ratio"),
        py::arg("seed"));
  m.def("merge_datasets", &fedsim::merge_datasets, py::arg("shards"));

  // models and local training
  py::class_<fedsim::Architecture>(m, "Architecture")
      .def_static("softmax_regression", &fedsim::Architecture::softmax_regression,
                  py::arg("input_dim"), py::arg("classes"))
      .def_static("mlp", &fedsim::Architecture::mlp, py::arg("input_dim"),
                  py::arg("hidden"), py::arg("classes"))
      .def_readwrite("layer_sizes", &fedsim::Architecture::layer_sizes)
      .def("param_count", &fedsim::Architecture::param_count)
      .def("input_dim", &fedsim::Architecture::input_dim)
      .def("num_classes", &fedsim::Architecture::num_classes)
      .def("__repr__", &fedsim::Architecture::describe);

  py::class_<fedsim::ModelParams>(m, "ModelParams")
      .def(py::init<>())
      .def_readwrite("arch", &fedsim::ModelParams::arch)
      .def_readwrite("theta", &fedsim::ModelParams::theta);

  py::class_<fedsim::TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("epochs", &fedsim::TrainConfig::epochs)
      .def_readwrite("batch_size", &fedsim::TrainConfig::batch_size)
      .def_readwrite("learning_rate", &fedsim::TrainConfig::learning_rate)
      .def_readwrite("momentum", &fedsim::TrainConfig::momentum)
      .def("validate", &fedsim::TrainConfig::validate);

  py::class_<fedsim::TrainResult>(m, "TrainResult")
      .def_readonly("params", &fedsim::TrainResult::params)
      .def_readonly("final_mean_loss", &fedsim::TrainResult::final_mean_loss)
      .def_readonly("flops", &fedsim::TrainResult::flops);

  py::class_<fedsim::EvalResult>(m, "EvalResult")
      .def_readonly("accuracy", &fedsim::EvalResult::accuracy)
      .def_readonly("mean_loss", &fedsim::EvalResult::mean_loss);

  m.def("init_model", &fedsim::init_model, py::arg("arch"), py::arg("seed"));
  m.def("dataset_loss", &fedsim::dataset_loss, py::arg("model"), py::arg("data"));
  m.def("loss_and_gradient", &fedsim::loss_and_gradient, py::arg("model"),
        py::arg("data"));
  m.def("local_train", &fedsim::local_train, py::arg("model"), py::arg("data"),
        py::arg("cfg"), py::arg("seed"), py::call_guard<py::gil_scoped_release>());
  m.def("fedavg_aggregate", &fedsim::fedavg_aggregate, py::arg("updates"),
        "Size-weighted average of (params, n_samples) updates.");
  m.def("evaluate", &fedsim::evaluate, py::arg("model"), py::arg("test"));
  m.def("count_flops_per_sample", &fedsim::count_flops_per_sample, py::arg("arch"));
  m.def("forward_flops_per_sample", &fedsim::forward_flops_per_sample, py::arg("arch"));

  // clustering
  py::class_<fedsim::ClusterAssignment>(m, "ClusterAssignment")
      .def(py::init<>())
      .def(py::init<std::vector<int>, int>(), py::arg("assignment"), py::arg("G"))
      .def_readwrite("assignment", &fedsim::ClusterAssignment::assignment)
      .def_readwrite("G", &fedsim::ClusterAssignment::G)
      .def("num_clients", &fedsim::ClusterAssignment::num_clients)
      .def("groups", &fedsim::ClusterAssignment::groups)
      .def("validate", &fedsim::ClusterAssignment::validate);

  py::class_<fedsim::DiversityObjective>(m, "DiversityObjective")
      .def_readonly("intra", &fedsim::DiversityObjective::intra)
      .def_readonly("inter", &fedsim::DiversityObjective::inter)
      .def_readonly("lambda_", &fedsim::DiversityObjective::lambda)
      .def_readonly("scalar", &fedsim::DiversityObjective::scalar);

  py::class_<fedsim::SimclustResult>(m, "SimclustResult")
      .def_readonly("assignment", &fedsim::SimclustResult::assignment)
      .def_readonly("iterations", &fedsim::SimclustResult::iterations)
      .def_readonly("objective_history", &fedsim::SimclustResult::objective_history);

  py::class_<fedsim::RepclustResult>(m, "RepclustResult")
      .def_readonly("assignment", &fedsim::RepclustResult::assignment)
      .def_readonly("initial_scalar", &fedsim::RepclustResult::initial_scalar)
      .def_readonly("final_scalar", &fedsim::RepclustResult::final_scalar)
      .def_readonly("sweeps", &fedsim::RepclustResult::sweeps);

  m.def(
      "simclust",
      [](const std::vector<std::vector<double>>& dists, int G, std::uint64_t seed) {
        return fedsim::simclust(wrap_dists(dists), G, seed);
      },
      py::arg("dists"), py::arg("G"), py::arg("seed"),
      "k-means under symmetrized KL with empty-cluster repair.");
  m.def(
      "repclust",
      [](const std::vector<std::vector<double>>& dists, int G, int S, int max_iters,
         double lambda, std::uint64_t seed) {
        return fedsim::repclust(wrap_dists(dists), G, S, max_iters, lambda, seed);
      },
      py::arg("dists"), py::arg("G"), py::arg("S"), py::arg("max_iters"),
      py::arg("lambda_"), py::arg("seed"),
      "Diverse-grouping local search over equal-size groups.");
  m.def(
      "diversity_objective",
      [](const fedsim::ClusterAssignment& assignment,
         const std::vector<std::vector<double>>& dists, double lambda) {
        const auto wrapped = wrap_dists(dists);
        const auto D = fedsim::pairwise_distances(wrapped);
        return fedsim::diversity_objective(assignment, D, wrapped, lambda);
      },
      py::arg("assignment"), py::arg("dists"), py::arg("lambda_"));
  m.def(
      "brute_force_diverse_grouping",
      [](const std::vector<std::vector<double>>& dists, int G, double lambda) {
        return fedsim::brute_force_diverse_grouping(wrap_dists(dists), G, lambda);
      },
      py::arg("dists"), py::arg("G"), py::arg("lambda_"));
  m.def("count_equal_partitions", &fedsim::count_equal_partitions, py::arg("L"),
        py::arg("G"));
  m.def("adjusted_rand_index", &fedsim::adjusted_rand_index, py::arg("a"), py::arg("b"));

  // differential privacy on shared distributions
  m.def(
      "dp_sigma",
      [](double gamma, std::size_t num_classes,
         const std::vector<std::vector<double>>& dists) {
        return fedsim::dp_sigma(gamma, num_classes, wrap_dists(dists));
      },
      py::arg("gamma"), py::arg("num_classes"), py::arg("dists"));
  m.def(
      "perturb",
      [](const std::vector<double>& dist, double sigma, std::uint64_t seed) {
        return fedsim::perturb(fedsim::LabelDistribution{dist}, sigma, seed);
      },
      py::arg("dist"), py::arg("sigma"), py::arg("seed"));
  m.def(
      "sanitize",
      [](const std::vector<double>& raw) { return fedsim::sanitize(raw).probs; },
      py::arg("raw"));

  // client selection primitives
  m.def(
      "select_random",
      [](const std::vector<std::int64_t>& sizes, int K, int round, std::uint64_t seed) {
        const auto ctx = make_context(sizes, K, round, seed, nullptr, 0);
        return fedsim::select_random(ctx);
      },
      py::arg("sizes"), py::arg("K"), py::arg("round"), py::arg("seed"));
  m.def(
      "powerd_candidates",
      [](const std::vector<std::int64_t>& sizes, int K, int d, int round,
         std::uint64_t seed) {
        const auto ctx = make_context(sizes, K, round, seed, nullptr, d);
        return fedsim::powerd_candidates(ctx);
      },
      py::arg("sizes"), py::arg("K"), py::arg("d"), py::arg("round"), py::arg("seed"));
  m.def(
      "select_powerd",
      [](const std::vector<std::int64_t>& sizes, int K, int d, int round,
         std::uint64_t seed, const std::vector<int>& candidates,
         const std::vector<double>& losses) {
        const auto ctx = make_context(sizes, K, round, seed, nullptr, d);
        return fedsim::select_powerd(ctx, candidates, losses);
      },
      py::arg("sizes"), py::arg("K"), py::arg("d"), py::arg("round"), py::arg("seed"),
      py::arg("candidates"), py::arg("losses"));
  m.def(
      "select_simclust",
      [](const fedsim::ClusterAssignment& clusters,
         const std::vector<std::int64_t>& sizes, int K, int round, std::uint64_t seed) {
        const auto ctx = make_context(sizes, K, round, seed, &clusters, 0);
        return fedsim::select_simclust(ctx);
      },
      py::arg("clusters"), py::arg("sizes"), py::arg("K"), py::arg("round"),
      py::arg("seed"));
  m.def(
      "select_repclust",
      [](const fedsim::ClusterAssignment& clusters,
         const std::vector<std::int64_t>& sizes, int K, int round, std::uint64_t seed) {
        const auto ctx = make_context(sizes, K, round, seed, &clusters, 0);
        return fedsim::select_repclust(ctx);
      },
      py::arg("clusters"), py::arg("sizes"), py::arg("K"), py::arg("round"),
      py::arg("seed"));

  // energy accounting
  py::class_<fedsim::CommConfig>(m, "CommConfig")
      .def(py::init<>())
      .def_readwrite("p_up_dbm", &fedsim::CommConfig::p_up_dbm)
      .def_readwrite("p_down_dbm", &fedsim::CommConfig::p_down_dbm)
      .def_readwrite("phy_rate", &fedsim::CommConfig::phy_rate)
      .def_readwrite("bits_per_param", &fedsim::CommConfig::bits_per_param)
      .def_readwrite("overhead_bits", &fedsim::CommConfig::overhead_bits)
      .def("validate", &fedsim::CommConfig::validate);

  py::class_<fedsim::ComputeConfig>(m, "ComputeConfig")
      .def(py::init<>())
      .def_readwrite("joules_per_flop", &fedsim::ComputeConfig::joules_per_flop)
      .def_readwrite("memory_power_per_gb", &fedsim::ComputeConfig::memory_power_per_gb)
      .def_readwrite("sample_interval", &fedsim::ComputeConfig::sample_interval)
      .def("validate", &fedsim::ComputeConfig::validate);

  py::class_<fedsim::LedgerEntry>(m, "LedgerEntry")
      .def_readonly("round", &fedsim::LedgerEntry::round)
      .def_readonly("client_id", &fedsim::LedgerEntry::client_id)
      .def_readonly("pre_j", &fedsim::LedgerEntry::pre_j)
      .def_readonly("train_j", &fedsim::LedgerEntry::train_j)
      .def_readonly("comm_j", &fedsim::LedgerEntry::comm_j);

  py::class_<fedsim::EnergyLedger>(m, "EnergyLedger")
      .def(py::init<>())
      .def("add", &fedsim::EnergyLedger::add, py::arg("round"), py::arg("client_id"),
           py::arg("pre_j"), py::arg("train_j"), py::arg("comm_j"))
      .def("entries", &fedsim::EnergyLedger::entries)
      .def("pre_total", &fedsim::EnergyLedger::pre_total)
      .def("train_total", &fedsim::EnergyLedger::train_total)
      .def("comm_total", &fedsim::EnergyLedger::comm_total)
      .def("total", &fedsim::EnergyLedger::total)
      .def("write_csv", &fedsim::EnergyLedger::write_csv, py::arg("path"));

  m.def("dbm_to_watts", &fedsim::dbm_to_watts, py::arg("p_dbm"));
  m.def("airtime", &fedsim::airtime, py::arg("param_count"), py::arg("comm"));
  m.def("comm_energy_round", &fedsim::comm_energy_round, py::arg("participants_up"),
        py::arg("participants_down"), py::arg("param_count"), py::arg("comm"),
        py::arg("num_clients"));
  m.def("compute_energy", &fedsim::compute_energy, py::arg("flops"),
        py::arg("compute"));
  m.def("trace_energy", &fedsim::trace_energy, py::arg("power_samples"), py::arg("dt"));
  m.def("memory_energy", &fedsim::memory_energy, py::arg("mem_gb_samples"),
        py::arg("dt"), py::arg("power_per_gb") = 0.375);
  m.def("relative_energy", &fedsim::relative_energy, py::arg("ledger"),
        py::arg("baseline_total_j"));

  // experiment runner
  py::enum_<fedsim::Strategy>(m, "Strategy")
      .value("random", fedsim::Strategy::kRandom)
      .value("powerd", fedsim::Strategy::kPowerD)
      .value("simclust", fedsim::Strategy::kSimclust)
      .value("repclust", fedsim::Strategy::kRepclust);

  py::class_<fedsim::SelectionConfig>(m, "SelectionConfig")
      .def(py::init<>())
      .def_readwrite("strategy", &fedsim::SelectionConfig::strategy)
      .def_readwrite("K", &fedsim::SelectionConfig::K)
      .def_readwrite("G", &fedsim::SelectionConfig::G)
      .def_readwrite("d", &fedsim::SelectionConfig::d)
      .def_readwrite("lambda_", &fedsim::SelectionConfig::lambda)
      .def_readwrite("gamma", &fedsim::SelectionConfig::gamma)
      .def_readwrite("S", &fedsim::SelectionConfig::S)
      .def_readwrite("max_iters", &fedsim::SelectionConfig::max_iters);

  py::class_<fedsim::ReportConfig>(m, "ReportConfig")
      .def(py::init<>())
      .def_readwrite("accuracy_targets", &fedsim::ReportConfig::accuracy_targets)
      .def_readwrite("sustain_window", &fedsim::ReportConfig::sustain_window);

  py::class_<fedsim::ModelConfig>(m, "ModelConfig")
      .def(py::init<>())
      .def_readwrite("arch", &fedsim::ModelConfig::arch)
      .def_readwrite("hidden", &fedsim::ModelConfig::hidden);

  py::class_<fedsim::RunConfig>(m, "RunConfig")
      .def(py::init<>())
      .def_readwrite("partition", &fedsim::RunConfig::partition)
      .def_readwrite("train", &fedsim::RunConfig::train)
      .def_readwrite("selection", &fedsim::RunConfig::selection)
      .def_readwrite("comm", &fedsim::RunConfig::comm)
      .def_readwrite("compute", &fedsim::RunConfig::compute)
      .def_readwrite("model", &fedsim::RunConfig::model)
      .def_readwrite("rounds", &fedsim::RunConfig::rounds)
      .def_readwrite("split_ratio", &fedsim::RunConfig::split_ratio)
      .def_readwrite("seeds", &fedsim::RunConfig::seeds)
      .def_readwrite("report", &fedsim::RunConfig::report)
      .def("architecture", &fedsim::RunConfig::architecture)
      .def("validate", &fedsim::RunConfig::validate);

  py::class_<fedsim::RoundRecord>(m, "RoundRecord")
      .def_readonly("round", &fedsim::RoundRecord::round)
      .def_readonly("selected", &fedsim::RoundRecord::selected)
      .def_readonly("accuracy", &fedsim::RoundRecord::accuracy)
      .def_readonly("loss", &fedsim::RoundRecord::loss)
      .def_readonly("pre_j", &fedsim::RoundRecord::pre_j)
      .def_readonly("train_j", &fedsim::RoundRecord::train_j)
      .def_readonly("comm_j", &fedsim::RoundRecord::comm_j);

  py::class_<fedsim::RunResult>(m, "RunResult")
      .def_readonly("records", &fedsim::RunResult::records)
      .def_readonly("ledger", &fedsim::RunResult::ledger)
      .def_readonly("clusters", &fedsim::RunResult::clusters)
      .def_readonly("clustering_pre_j", &fedsim::RunResult::clustering_pre_j)
      .def_readonly("final_accuracy", &fedsim::RunResult::final_accuracy);

  py::class_<fedsim::SustainPoint>(m, "SustainPoint")
      .def_readonly("cumulative_j", &fedsim::SustainPoint::cumulative_j)
      .def_readonly("first_round", &fedsim::SustainPoint::first_round);

  m.def("run_experiment", &fedsim::run_experiment, py::arg("cfg"), py::arg("seed"),
        py::call_guard<py::gil_scoped_release>(),
        "Partition, split, optionally cluster, then run T federated rounds.");
  m.def("energy_to_sustained_accuracy", &fedsim::energy_to_sustained_accuracy,
        py::arg("records"), py::arg("target"), py::arg("window") = 20,
        py::arg("round0_j") = 0.0);

  py::class_<fedsim::DpAriRow>(m, "DpAriRow")
      .def_readonly("gamma", &fedsim::DpAriRow::gamma)
      .def_readonly("seed", &fedsim::DpAriRow::seed)
      .def_readonly("method", &fedsim::DpAriRow::method)
      .def_readonly("ari", &fedsim::DpAriRow::ari);

  py::class_<fedsim::BenchRow>(m, "BenchRow")
      .def_readonly("L", &fedsim::BenchRow::L)
      .def_readonly("rho", &fedsim::BenchRow::rho)
      .def_readonly("method", &fedsim::BenchRow::method)
      .def_readonly("G", &fedsim::BenchRow::G)
      .def_readonly("flops", &fedsim::BenchRow::flops)
      .def_readonly("wall_seconds", &fedsim::BenchRow::wall_seconds)
      .def_readonly("status", &fedsim::BenchRow::status);

  m.def("dp_ari_sweep", &fedsim::dp_ari_sweep, py::arg("planted"), py::arg("gammas"),
        py::arg("seeds"), py::arg("G_sim"), py::arg("G_rep"), py::arg("lambda_"),
        py::call_guard<py::gil_scoped_release>());
  m.def("scaling_bench", &fedsim::scaling_bench, py::arg("L_grid"),
        py::arg("rho_grid"), py::arg("classes"), py::arg("seed"),
        py::call_guard<py::gil_scoped_release>());

  m.def("derive_seed", &fedsim::rng::derive, py::arg("seed"), py::arg("purpose"),
        py::arg("a") = 0, py::arg("b") = 0,
        "Deterministic sub-seed for a named stream.");
}
