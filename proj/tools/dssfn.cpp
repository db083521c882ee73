// Command line front end: trains the network in centralized or decentralized
// mode and runs the connectivity / network-size sweeps. Results land in JSON
// with plot-ready CSV traces next to them. DSSFN_LOG=debug|info|warn controls
// verbosity.

#include <cstdint>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dssfn/experiment.hpp"

namespace {

dssfn::ExperimentMode mode_from(const std::string& name) {
  if (name == "central") return dssfn::ExperimentMode::central;
  if (name == "sync") return dssfn::ExperimentMode::sync;
  return dssfn::ExperimentMode::async;
}

void add_common_options(CLI::App* cmd, dssfn::ExperimentSpec& spec,
                        bool& no_shuffle) {
  cmd->add_option("--data", spec.data_path, "training CSV (label column last)")
      ->required();
  cmd->add_option("--test", spec.test_path, "held-out test CSV");
  cmd->add_option("--nodes", spec.nodes, "node count M");
  cmd->add_option("--degree", spec.degree, "circulant degree d (even, or 1 when M=2)");
  cmd->add_option("--iters", spec.iters,
                  "consensus rounds per layer K (asynchronous mode runs M*K activations)");
  cmd->add_option("--gamma0", spec.gamma0, "first-layer coupling weight");
  cmd->add_option("--gamma", spec.gamma, "coupling weight for later layers");
  cmd->add_option("--mu0", spec.mu0, "first-layer ridge weight (centralized)");
  cmd->add_option("--mu", spec.mu, "ridge weight for later layers (centralized)");
  cmd->add_option("--eta", spec.eta, "dual step size in (0, 1]")
      ->capture_default_str();
  cmd->add_option("--layers", spec.layers, "layer count L")
      ->capture_default_str();
  cmd->add_option("--width-extra", spec.width_extra,
                  "hidden width above 2Q (n = 2Q + this)")
      ->capture_default_str();
  cmd->add_option("--seed", spec.seed, "base seed; repeats use seed, seed+1, ...");
  cmd->add_option("--repeats", spec.repeats, "independent repeats");
  cmd->add_option("--out", spec.out_path, "result JSON path (traces written next to it)");
  cmd->add_flag("--parallel", spec.parallel, "use the threaded consensus runtime");
  cmd->add_flag("--no-shuffle", no_shuffle, "partition without the seeded shuffle");
}

void print_result(const dssfn::ExperimentResult& res) {
  for (const auto& run : res.runs) {
    std::cout << run.variant << " seed " << run.seed;
    if (run.accuracy >= 0.0) {
      std::cout << ": accuracy " << run.accuracy << "%";
    } else {
      std::cout << ": final train cost " << run.layer_costs.back();
    }
    std::cout << " (" << run.wall_seconds << "s)\n";
  }
  if (res.accuracy_mean >= 0.0 && res.runs.size() > 1) {
    std::cout << "mean accuracy " << res.accuracy_mean << "% +- "
              << res.accuracy_std << "\n";
  }
  if (!res.result_json_path.empty()) {
    std::cout << "result written to " << res.result_json_path << "\n";
  }
}

void print_sweep(const std::vector<dssfn::SweepRow>& rows, const char* label) {
  for (const auto& row : rows) {
    std::cout << label << " " << row.value;
    const auto& s = row.sync_result.runs[0];
    const auto& a = row.async_result.runs[0];
    std::cout << ": sync " << s.messages << " msgs in " << s.wall_seconds
              << "s, async " << a.messages << " msgs in " << a.wall_seconds
              << "s";
    if (s.accuracy >= 0.0) {
      std::cout << ", accuracy " << s.accuracy << "% / " << a.accuracy << "%";
    }
    std::cout << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Layer-wise feedforward network training over a simulated "
      "decentralized node graph"};
  app.require_subcommand(1);

  dssfn::ExperimentSpec spec;
  bool no_shuffle = false;
  std::string mode = "central";
  std::vector<int> degrees;
  std::vector<int> counts;

  CLI::App* train = app.add_subcommand(
      "train", "train one experiment and report test accuracy");
  train->add_option("--mode", mode, "central | sync | async")
      ->required()
      ->check(CLI::IsMember({"central", "sync", "async"}));
  add_common_options(train, spec, no_shuffle);

  CLI::App* sweep_d = app.add_subcommand(
      "sweep-degree", "run sync and async at several network degrees");
  sweep_d->add_option("--degrees", degrees, "degrees to sweep, e.g. 2,4,8")
      ->required()
      ->delimiter(',');
  add_common_options(sweep_d, spec, no_shuffle);

  CLI::App* sweep_n = app.add_subcommand(
      "sweep-nodes", "run sync and async at several ring sizes");
  sweep_n->add_option("--counts", counts, "node counts to sweep, e.g. 2,4,8")
      ->required()
      ->delimiter(',');
  add_common_options(sweep_n, spec, no_shuffle);

  CLI11_PARSE(app, argc, argv);
  spec.shuffle = !no_shuffle;

  try {
    if (train->parsed()) {
      spec.mode = mode_from(mode);
      print_result(dssfn::run_experiment(spec));
    } else if (sweep_d->parsed()) {
      const auto rows = dssfn::sweep_degree(spec, degrees);
      print_sweep(rows, "degree");
      if (!spec.out_path.empty()) {
        dssfn::write_sweep_json(rows, "degree", spec.out_path);
        std::cout << "sweep written to " << spec.out_path << "\n";
      }
    } else {
      const auto rows = dssfn::sweep_nodes(spec, counts);
      print_sweep(rows, "nodes");
      if (!spec.out_path.empty()) {
        dssfn::write_sweep_json(rows, "nodes", spec.out_path);
        std::cout << "sweep written to " << spec.out_path << "\n";
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
