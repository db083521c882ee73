#include "dssfn/experiment.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "dssfn/log.hpp"

namespace dssfn {
namespace {

using json = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Arbitrary odd offset separating the activation-scheduler stream from the
// shuffle (seed) and random-block (seed ^ layer) streams.
constexpr std::uint64_t kActivationTag = 0x517CC1B727220A95ULL;

const char* mode_name(ExperimentMode m) {
  switch (m) {
    case ExperimentMode::central: return "central";
    case ExperimentMode::sync: return "sync";
    case ExperimentMode::async: return "async";
    case ExperimentMode::compare: return "compare";
  }
  return "?";
}

ExperimentMode mode_from_name(const std::string& s) {
  if (s == "central") return ExperimentMode::central;
  if (s == "sync") return ExperimentMode::sync;
  if (s == "async") return ExperimentMode::async;
  if (s == "compare") return ExperimentMode::compare;
  throw std::invalid_argument("unknown experiment mode: " + s);
}

const char* activation_name(ActivationScheme a) {
  return a == ActivationScheme::uniform ? "uniform" : "round_robin";
}

const char* sweep_name(SyncSweep s) {
  return s == SyncSweep::jacobi ? "jacobi" : "gauss_seidel";
}

Matrix hconcat(const std::vector<Matrix>& parts) {
  int cols = 0;
  for (const Matrix& p : parts) cols += p.cols();
  Matrix out(parts[0].rows(), cols);
  int at = 0;
  for (const Matrix& p : parts) {
    for (int j = 0; j < p.cols(); ++j) {
      for (int i = 0; i < p.rows(); ++i) out(i, at + j) = p(i, j);
    }
    at += p.cols();
  }
  return out;
}

std::string out_stem(const std::string& path) {
  if (path.size() > 5 && path.substr(path.size() - 5) == ".json") {
    return path.substr(0, path.size() - 5);
  }
  return path;
}

void validate_spec(const ExperimentSpec& spec) {
  if (spec.data_path.empty()) {
    throw std::invalid_argument("experiment: data path is required");
  }
  if (spec.iters < 1 || spec.repeats < 1 || spec.layers < 1 ||
      spec.width_extra < 1) {
    throw std::invalid_argument(
        "experiment: iters, repeats, layers, and width-extra must be >= 1");
  }
  if (!(spec.eta > 0.0) || spec.eta > 1.0) {
    throw std::invalid_argument("experiment: eta must lie in (0, 1]");
  }
  const bool needs_central = spec.mode == ExperimentMode::central ||
                             spec.mode == ExperimentMode::compare;
  const bool needs_decentral = spec.mode != ExperimentMode::central;
  if (needs_central && (spec.mu0 < 0.0 || spec.mu < 0.0)) {
    throw std::invalid_argument("experiment: mu0 and mu must be >= 0");
  }
  if (needs_decentral) {
    if (spec.nodes < 1) {
      throw std::invalid_argument("experiment: nodes must be >= 1");
    }
    if (spec.nodes > 1) {
      if (!(spec.gamma0 > 0.0) || !(spec.gamma > 0.0)) {
        throw std::invalid_argument(
            "experiment: gamma0 and gamma must be > 0 for decentralized modes");
      }
      circulant_graph(spec.nodes, spec.degree);  // validates the pair
    }
    if (spec.staleness_cap < 0) {
      throw std::invalid_argument("experiment: staleness cap must be >= 0");
    }
  }
}

struct LoadedData {
  Dataset train;
  Dataset test;
  bool have_test = false;
};

LoadedData load_data(const ExperimentSpec& spec) {
  LoadedData data;
  data.train = load_csv(spec.data_path, spec.class_count);
  if (!spec.test_path.empty()) {
    data.test = load_csv(spec.test_path, data.train.class_count);
    data.have_test = true;
    if (spec.normalize) {
      auto [train_n, test_n, scaling] =
          normalize_fit_apply(data.train, data.test);
      data.train = std::move(train_n);
      data.test = std::move(test_n);
    }
  } else if (spec.normalize) {
    // two statements: the argument move must not outrun fit_scaling's read
    const FeatureScaling scaling = fit_scaling(data.train);
    data.train = apply_scaling(scaling, std::move(data.train));
  }
  return data;
}

SsfnConfig model_config(const ExperimentSpec& spec, std::uint64_t seed) {
  SsfnConfig cfg;
  cfg.layers = spec.layers;
  cfg.width_extra = spec.width_extra;
  cfg.eps_override = spec.eps_override;
  cfg.mu_first = spec.mu0;
  cfg.mu_rest = spec.mu;
  cfg.seed = seed;
  return cfg;
}

double evaluate_accuracy(const LayerStack& stack, const Dataset& test) {
  const Matrix scores = predict(stack, test.features, stack.layer_count());
  return 100.0 * classification_accuracy(scores, test.labels);
}

RunRecord run_central_once(const ExperimentSpec& spec, const LoadedData& data,
                           std::uint64_t seed) {
  const auto start = Clock::now();
  RunRecord rec;
  rec.variant = "central";
  rec.seed = seed;
  const TrainResult trained =
      train_centralized(data.train.features, data.train.targets,
                        model_config(spec, seed));
  rec.layer_costs = trained.layer_costs;
  if (data.have_test) rec.accuracy = evaluate_accuracy(trained.stack, data.test);
  rec.wall_seconds = seconds_since(start);
  return rec;
}

struct DecentRun {
  RunRecord record;
  DecentralizedResult detail;
  std::vector<Matrix> x_shards;
  std::vector<Matrix> t_shards;
};

Graph build_graph(const ExperimentSpec& spec) {
  return spec.nodes == 1 ? Graph(1) : circulant_graph(spec.nodes, spec.degree);
}

DecentRun run_decentralized_once(const ExperimentSpec& spec,
                                 const LoadedData& data, ConsensusMode mode,
                                 std::uint64_t seed, int repeat_index) {
  const auto start = Clock::now();
  DecentRun run;
  run.record.variant = mode == ConsensusMode::sync ? "sync" : "async";
  run.record.seed = seed;

  const Graph graph = build_graph(spec);
  const DataPartition part =
      partition_uniform(data.train, spec.nodes, seed, spec.shuffle);
  run.x_shards.reserve(spec.nodes);
  run.t_shards.reserve(spec.nodes);
  for (const Dataset& shard : part.shards) {
    run.x_shards.push_back(shard.features);
    run.t_shards.push_back(shard.targets);
  }

  SolverConfig solver;
  solver.gamma = spec.gamma;
  solver.eta = spec.eta;
  solver.mode = mode;
  solver.sweep = spec.sweep;
  solver.activation = spec.activation;
  solver.activation_seed = seed ^ kActivationTag;
  solver.staleness_cap = spec.staleness_cap;
  solver.parallel = spec.parallel;
  // iters counts rounds in both modes at the interface; one asynchronous
  // round is M single-node activations.
  solver.max_iters = mode == ConsensusMode::sync
                         ? spec.iters
                         : spec.iters * std::max(spec.nodes, 1);

  run.detail = train_decentralized(run.x_shards, run.t_shards, graph,
                                   model_config(spec, seed), solver,
                                   spec.gamma0, spec.gamma);
  run.record.layer_costs = run.detail.layer_costs;
  run.record.activations = run.detail.total_activations;
  run.record.messages = run.detail.total_messages;
  if (!run.detail.layer_traces.empty() &&
      !run.detail.layer_traces.back().rows.empty()) {
    run.record.final_consensus_error =
        run.detail.layer_traces.back().rows.back().consensus_error;
  }
  if (data.have_test) {
    run.record.accuracy = evaluate_accuracy(run.detail.shared_stack, data.test);
  }
  if (!spec.out_path.empty()) {
    const std::string stem = out_stem(spec.out_path);
    for (std::size_t l = 0; l < run.detail.layer_traces.size(); ++l) {
      std::ostringstream name;
      name << stem << "_" << run.record.variant << "_r" << repeat_index << "_l"
           << l << ".csv";
      run.detail.layer_traces[l].write_csv(name.str());
      run.record.trace_files.push_back(name.str());
    }
  }
  run.record.wall_seconds = seconds_since(start);
  return run;
}

// Worst relative Frobenius distance between any node's readout and the
// pooled-data constrained least-squares solution, across all layers. The
// layer features are replayed from the shared weights.
double equivalence_distance(const DecentRun& run, const SsfnConfig& cfg) {
  const int m_count = static_cast<int>(run.x_shards.size());
  const int q = run.t_shards[0].rows();
  const double eps = cfg.eps(q);
  const Matrix t_pooled = hconcat(run.t_shards);
  std::vector<Matrix> features = run.x_shards;
  double worst = 0.0;
  const int layer_count =
      static_cast<int>(run.detail.shared_stack.readouts.size());
  for (int l = 0; l < layer_count; ++l) {
    const Matrix y_pooled = hconcat(features);
    const Matrix reference = constrained_least_squares(y_pooled, t_pooled, eps);
    const double ref_norm = std::max(frobenius_norm(reference), 1e-300);
    for (int m = 0; m < m_count; ++m) {
      const double dist =
          frobenius_norm(run.detail.node_readouts[m][l] - reference) / ref_norm;
      worst = std::max(worst, dist);
    }
    if (l + 1 < layer_count) {
      for (int m = 0; m < m_count; ++m) {
        features[m] =
            forward_layer(run.detail.shared_stack.weights[l], features[m]);
      }
    }
  }
  return worst;
}

json record_json(const RunRecord& rec) {
  json j;
  j["variant"] = rec.variant;
  j["seed"] = rec.seed;
  if (rec.accuracy >= 0.0) {
    j["accuracy"] = rec.accuracy;
  } else {
    j["accuracy"] = nullptr;
  }
  j["layer_costs"] = rec.layer_costs;
  j["final_consensus_error"] = rec.final_consensus_error;
  j["activations"] = rec.activations;
  j["messages"] = rec.messages;
  j["wall_seconds"] = rec.wall_seconds;
  j["trace_files"] = rec.trace_files;
  return j;
}

json spec_json(const ExperimentSpec& spec) {
  json j;
  j["mode"] = mode_name(spec.mode);
  j["data"] = spec.data_path;
  j["test"] = spec.test_path;
  j["class_count"] = spec.class_count;
  j["nodes"] = spec.nodes;
  j["degree"] = spec.degree;
  j["iters"] = spec.iters;
  j["gamma0"] = spec.gamma0;
  j["gamma"] = spec.gamma;
  j["mu0"] = spec.mu0;
  j["mu"] = spec.mu;
  j["eta"] = spec.eta;
  j["layers"] = spec.layers;
  j["width_extra"] = spec.width_extra;
  j["eps_override"] = spec.eps_override;
  j["seed"] = spec.seed;
  j["repeats"] = spec.repeats;
  j["out"] = spec.out_path;
  j["parallel"] = spec.parallel;
  j["shuffle"] = spec.shuffle;
  j["normalize"] = spec.normalize;
  j["staleness_cap"] = spec.staleness_cap;
  j["activation"] = activation_name(spec.activation);
  j["sweep"] = sweep_name(spec.sweep);
  return j;
}

json result_json(const ExperimentResult& r) {
  json j;
  j["tool"] = "dssfn";
  j["format_version"] = 1;
  j["spec"] = spec_json(r.spec);
  json runs = json::array();
  for (const RunRecord& rec : r.runs) runs.push_back(record_json(rec));
  j["runs"] = runs;
  json summary;
  if (r.accuracy_mean >= 0.0) {
    summary["accuracy_mean"] = r.accuracy_mean;
    summary["accuracy_std"] = r.accuracy_std;
  } else {
    summary["accuracy_mean"] = nullptr;
    summary["accuracy_std"] = nullptr;
  }
  summary["wall_seconds_total"] = r.wall_seconds_total;
  if (r.spec.mode == ExperimentMode::compare) {
    json cmp;
    cmp["sync_distance"] = r.compare_sync_distance;
    cmp["async_distance"] = r.compare_async_distance;
    cmp["sync_tolerance"] = 1e-3;
    cmp["async_tolerance"] = 1e-2;
    cmp["pass"] = r.compare_pass;
    summary["compare"] = cmp;
  }
  j["summary"] = summary;
  return j;
}

void finalize_summary(ExperimentResult& result, const std::string& variant) {
  double sum = 0.0;
  int count = 0;
  for (const RunRecord& rec : result.runs) {
    result.wall_seconds_total += rec.wall_seconds;
    if (rec.variant == variant && rec.accuracy >= 0.0) {
      sum += rec.accuracy;
      ++count;
    }
  }
  if (count > 0) {
    result.accuracy_mean = sum / count;
    double ss = 0.0;
    for (const RunRecord& rec : result.runs) {
      if (rec.variant == variant && rec.accuracy >= 0.0) {
        const double d = rec.accuracy - result.accuracy_mean;
        ss += d * d;
      }
    }
    result.accuracy_std = count > 1 ? std::sqrt(ss / (count - 1)) : 0.0;
  }
}

void write_result(ExperimentResult& result) {
  if (result.spec.out_path.empty()) return;
  std::ofstream out(result.spec.out_path);
  if (!out) {
    throw std::runtime_error("run_experiment: cannot open " +
                             result.spec.out_path);
  }
  out << result_json(result).dump(2) << '\n';
  if (!out.good()) {
    throw std::runtime_error("run_experiment: write failed for " +
                             result.spec.out_path);
  }
  result.result_json_path = result.spec.out_path;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentSpec& spec) {
  validate_spec(spec);
  const LoadedData data = load_data(spec);
  ExperimentResult result;
  result.spec = spec;

  for (int rep = 0; rep < spec.repeats; ++rep) {
    const std::uint64_t seed = spec.seed + static_cast<std::uint64_t>(rep);
    switch (spec.mode) {
      case ExperimentMode::central:
        result.runs.push_back(run_central_once(spec, data, seed));
        break;
      case ExperimentMode::sync:
      case ExperimentMode::async: {
        const ConsensusMode mode = spec.mode == ExperimentMode::sync
                                       ? ConsensusMode::sync
                                       : ConsensusMode::async;
        result.runs.push_back(
            run_decentralized_once(spec, data, mode, seed, rep).record);
        break;
      }
      case ExperimentMode::compare: {
        result.runs.push_back(run_central_once(spec, data, seed));
        DecentRun sync_run =
            run_decentralized_once(spec, data, ConsensusMode::sync, seed, rep);
        DecentRun async_run =
            run_decentralized_once(spec, data, ConsensusMode::async, seed, rep);
        const SsfnConfig cfg = model_config(spec, seed);
        result.compare_sync_distance = std::max(
            result.compare_sync_distance, equivalence_distance(sync_run, cfg));
        result.compare_async_distance =
            std::max(result.compare_async_distance,
                     equivalence_distance(async_run, cfg));
        result.runs.push_back(std::move(sync_run.record));
        result.runs.push_back(std::move(async_run.record));
        break;
      }
    }
    if (log::enabled(log::Level::info)) {
      std::ostringstream os;
      os << mode_name(spec.mode) << " repeat " << rep << " done";
      log::info(os.str());
    }
  }

  finalize_summary(result, spec.mode == ExperimentMode::compare
                               ? "central"
                               : mode_name(spec.mode));
  if (spec.mode == ExperimentMode::compare) {
    result.compare_pass = result.compare_sync_distance <= 1e-3 &&
                          result.compare_async_distance <= 1e-2;
  }
  write_result(result);
  if (!result.compare_pass) {
    std::ostringstream os;
    os << "compare: decentralized readouts diverge from the pooled reference "
          "(sync distance "
       << result.compare_sync_distance << " vs 1e-3, async "
       << result.compare_async_distance << " vs 1e-2)";
    throw std::runtime_error(os.str());
  }
  return result;
}

std::string result_to_json(const ExperimentResult& r) {
  return result_json(r).dump(2) + "\n";
}

ExperimentSpec spec_from_result_json(const std::string& json_text) {
  const json doc = json::parse(json_text);
  const json& s = doc.at("spec");
  ExperimentSpec spec;
  spec.mode = mode_from_name(s.at("mode").get<std::string>());
  spec.data_path = s.at("data").get<std::string>();
  spec.test_path = s.at("test").get<std::string>();
  spec.class_count = s.at("class_count").get<int>();
  spec.nodes = s.at("nodes").get<int>();
  spec.degree = s.at("degree").get<int>();
  spec.iters = s.at("iters").get<int>();
  spec.gamma0 = s.at("gamma0").get<double>();
  spec.gamma = s.at("gamma").get<double>();
  spec.mu0 = s.at("mu0").get<double>();
  spec.mu = s.at("mu").get<double>();
  spec.eta = s.at("eta").get<double>();
  spec.layers = s.at("layers").get<int>();
  spec.width_extra = s.at("width_extra").get<int>();
  spec.eps_override = s.at("eps_override").get<double>();
  spec.seed = s.at("seed").get<std::uint64_t>();
  spec.repeats = s.at("repeats").get<int>();
  spec.out_path = s.at("out").get<std::string>();
  spec.parallel = s.at("parallel").get<bool>();
  spec.shuffle = s.at("shuffle").get<bool>();
  spec.normalize = s.at("normalize").get<bool>();
  spec.staleness_cap = s.at("staleness_cap").get<int>();
  spec.activation = s.at("activation").get<std::string>() == "round_robin"
                        ? ActivationScheme::round_robin
                        : ActivationScheme::uniform;
  spec.sweep = s.at("sweep").get<std::string>() == "gauss_seidel"
                   ? SyncSweep::gauss_seidel
                   : SyncSweep::jacobi;
  return spec;
}

std::vector<SweepRow> sweep_degree(const ExperimentSpec& base,
                                   const std::vector<int>& degrees) {
  if (degrees.empty()) {
    throw std::invalid_argument("sweep_degree: no degrees given");
  }
  for (int d : degrees) {
    circulant_graph(base.nodes, d);  // validate every degree up front
  }
  std::vector<SweepRow> rows;
  rows.reserve(degrees.size());
  for (int d : degrees) {
    SweepRow row;
    row.value = d;
    ExperimentSpec spec = base;
    spec.degree = d;
    spec.out_path.clear();
    spec.mode = ExperimentMode::sync;
    row.sync_result = run_experiment(spec);
    spec.mode = ExperimentMode::async;
    row.async_result = run_experiment(spec);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<SweepRow> sweep_nodes(const ExperimentSpec& base,
                                  const std::vector<int>& counts) {
  if (counts.empty()) {
    throw std::invalid_argument("sweep_nodes: no node counts given");
  }
  for (int m : counts) {
    if (m < 2) {
      throw std::invalid_argument(
          "sweep_nodes: node counts must be >= 2 (ring topology)");
    }
  }
  std::vector<SweepRow> rows;
  rows.reserve(counts.size());
  for (int m : counts) {
    SweepRow row;
    row.value = m;
    ExperimentSpec spec = base;
    spec.nodes = m;
    spec.degree = m == 2 ? 1 : 2;
    spec.out_path.clear();
    spec.mode = ExperimentMode::sync;
    row.sync_result = run_experiment(spec);
    spec.mode = ExperimentMode::async;
    row.async_result = run_experiment(spec);
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_sweep_json(const std::vector<SweepRow>& rows, const std::string& kind,
                      const std::string& path) {
  json j;
  j["tool"] = "dssfn";
  j["sweep"] = kind;
  json arr = json::array();
  for (const SweepRow& row : rows) {
    json r;
    r["value"] = row.value;
    r["sync"] = json::parse(result_to_json(row.sync_result));
    r["async"] = json::parse(result_to_json(row.async_result));
    arr.push_back(r);
  }
  j["rows"] = arr;
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("write_sweep_json: cannot open " + path);
  }
  out << j.dump(2) << '\n';
  if (!out.good()) {
    throw std::runtime_error("write_sweep_json: write failed for " + path);
  }
}

}  // namespace dssfn
