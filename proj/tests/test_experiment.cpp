#include <doctest.h>

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dssfn/dataset.hpp"
#include "dssfn/experiment.hpp"

using dssfn::ExperimentMode;
using dssfn::ExperimentResult;
using dssfn::ExperimentSpec;
using nlohmann::json;

namespace {

constexpr const char* kTrain = "exp_train.csv";
constexpr const char* kTest = "exp_test.csv";

dssfn::Dataset slice_columns(const dssfn::Dataset& d, int from, int count,
                             const std::string& name) {
  dssfn::Matrix features(d.features.rows(), count);
  std::vector<int> labels(count);
  for (int j = 0; j < count; ++j) {
    for (int i = 0; i < d.features.rows(); ++i) {
      features(i, j) = d.features(i, from + j);
    }
    labels[j] = d.labels[from + j];
  }
  return dssfn::make_dataset(std::move(features), std::move(labels),
                             d.class_count, name);
}

// Small labeled clouds, written once into the test working directory. Train
// and test are column slices of one draw so they share the class anchors.
void ensure_data() {
  static bool done = false;
  if (done) return;
  const dssfn::Dataset full = dssfn::make_synthetic(77, 4, 3, 290, 0.3);
  dssfn::save_csv(slice_columns(full, 0, 200, "exp-train"), kTrain);
  dssfn::save_csv(slice_columns(full, 200, 90, "exp-test"), kTest);
  done = true;
}

ExperimentSpec small_spec(ExperimentMode mode) {
  ensure_data();
  ExperimentSpec spec;
  spec.mode = mode;
  spec.data_path = kTrain;
  spec.test_path = kTest;
  spec.nodes = 2;
  spec.degree = 1;
  spec.iters = 40;
  spec.gamma0 = 0.5;
  spec.gamma = 0.5;
  spec.mu0 = 1e-6;
  spec.mu = 1e-2;
  spec.layers = 1;
  spec.width_extra = 6;
  spec.seed = 5;
  return spec;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

bool file_exists(const std::string& path) {
  return std::ifstream(path).good();
}

// Trace CSV with the wall-clock column dropped from every row.
std::string trace_without_wall(const std::string& path) {
  std::istringstream in(slurp(path));
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line)) {
    const std::size_t cut = line.rfind(',');
    REQUIRE(cut != std::string::npos);
    out << line.substr(0, cut) << '\n';
  }
  return out.str();
}

json parse_without_wall(const std::string& text) {
  json doc = json::parse(text);
  for (json& run : doc.at("runs")) run["wall_seconds"] = 0.0;
  doc.at("summary")["wall_seconds_total"] = 0.0;
  return doc;
}

}  // namespace

TEST_CASE("central experiments aggregate repeats") {
  ExperimentSpec spec = small_spec(ExperimentMode::central);
  spec.repeats = 2;
  spec.layers = 2;
  spec.width_extra = 10;
  spec.out_path = "exp_central.json";
  std::remove("exp_central.json");

  const ExperimentResult res = dssfn::run_experiment(spec);
  REQUIRE(res.runs.size() == 2);
  CHECK(res.runs[0].variant == "central");
  CHECK(res.runs[0].seed == 5);
  CHECK(res.runs[1].seed == 6);
  for (const auto& run : res.runs) {
    CHECK(run.layer_costs.size() == 3);  // layers + 1 readout solves
    CHECK(run.accuracy >= 0.0);
    CHECK(run.accuracy <= 100.0);
    CHECK(run.trace_files.empty());  // no consensus, no traces
    CHECK(run.activations == 0);
    CHECK(run.messages == 0);
  }
  CHECK(res.runs[0].accuracy > 60.0);  // separable clouds train well

  const double mean = (res.runs[0].accuracy + res.runs[1].accuracy) / 2.0;
  CHECK(res.accuracy_mean == doctest::Approx(mean).epsilon(1e-12));
  const double d0 = res.runs[0].accuracy - mean;
  const double d1 = res.runs[1].accuracy - mean;
  CHECK(res.accuracy_std ==
        doctest::Approx(std::sqrt(d0 * d0 + d1 * d1)).epsilon(1e-9));

  CHECK(res.result_json_path == "exp_central.json");
  REQUIRE(file_exists("exp_central.json"));
  const std::string text = slurp("exp_central.json");
  CHECK(text == dssfn::result_to_json(res));
  const json doc = json::parse(text);
  CHECK(doc.at("tool") == "dssfn");
  CHECK(doc.at("format_version") == 1);
  CHECK(doc.at("spec").at("mode") == "central");
  CHECK(doc.at("summary").at("accuracy_mean").get<double>() ==
        doctest::Approx(mean));
}

TEST_CASE("experiments run without a test set") {
  ExperimentSpec spec = small_spec(ExperimentMode::async);
  spec.test_path.clear();  // normalization must fit on train alone

  const ExperimentResult res = dssfn::run_experiment(spec);
  REQUIRE(res.runs.size() == 1);
  CHECK(res.runs[0].layer_costs.size() == 2);
  CHECK(res.runs[0].layer_costs.back() >= 0.0);
  CHECK(res.runs[0].accuracy == -1.0);  // sentinel: no test set
  CHECK(res.accuracy_mean == -1.0);
}

TEST_CASE("experiment validation rejects bad specs") {
  CHECK_THROWS_AS(dssfn::run_experiment(ExperimentSpec{}),
                  std::invalid_argument);  // no data path

  ExperimentSpec spec = small_spec(ExperimentMode::central);
  spec.eta = 0.0;
  CHECK_THROWS_AS(dssfn::run_experiment(spec), std::invalid_argument);

  spec = small_spec(ExperimentMode::central);
  spec.mu0 = -1.0;
  CHECK_THROWS_AS(dssfn::run_experiment(spec), std::invalid_argument);

  spec = small_spec(ExperimentMode::sync);
  spec.gamma0 = 0.0;
  spec.gamma = 0.0;
  CHECK_THROWS_AS(dssfn::run_experiment(spec), std::invalid_argument);

  spec = small_spec(ExperimentMode::sync);
  spec.nodes = 4;
  spec.degree = 3;  // circulant degrees must be even below M-1
  CHECK_THROWS_AS(dssfn::run_experiment(spec), std::invalid_argument);

  spec = small_spec(ExperimentMode::async);
  spec.staleness_cap = -1;
  CHECK_THROWS_AS(dssfn::run_experiment(spec), std::invalid_argument);

  spec = small_spec(ExperimentMode::central);
  spec.data_path = "no_such_file.csv";
  CHECK_THROWS_AS(dssfn::run_experiment(spec), std::runtime_error);
}

TEST_CASE("sync experiments write result and trace files") {
  ExperimentSpec spec = small_spec(ExperimentMode::sync);
  spec.out_path = "exp_sync.json";
  std::remove("exp_sync.json");
  std::remove("exp_sync_sync_r0_l0.csv");
  std::remove("exp_sync_sync_r0_l1.csv");

  const ExperimentResult res = dssfn::run_experiment(spec);
  REQUIRE(res.runs.size() == 1);
  const auto& run = res.runs[0];
  CHECK(run.variant == "sync");
  // layers + 1 solves, iters rounds each, M updates per round, d sends each
  CHECK(run.activations == 2 * 40 * 2);
  CHECK(run.messages == 2 * 40 * 2 * 1);
  REQUIRE(run.trace_files ==
          std::vector<std::string>{"exp_sync_sync_r0_l0.csv",
                                   "exp_sync_sync_r0_l1.csv"});

  for (const std::string& name : run.trace_files) {
    REQUIRE(file_exists(name));
    std::istringstream in(slurp(name));
    std::string header;
    REQUIRE(std::getline(in, header));
    CHECK(header == "k,node,local_cost,consensus_error,wall_ns");
    int rows = 0;
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty()) ++rows;
    }
    CHECK(rows == 40);  // one row per round
  }
  CHECK(run.final_consensus_error >= 0.0);
}

TEST_CASE("async experiments run node rounds worth of activations") {
  ExperimentSpec spec = small_spec(ExperimentMode::async);
  spec.iters = 30;
  spec.staleness_cap = 2;
  spec.out_path = "exp_async.json";
  std::remove("exp_async.json");
  std::remove("exp_async_async_r0_l0.csv");
  std::remove("exp_async_async_r0_l1.csv");

  const ExperimentResult res = dssfn::run_experiment(spec);
  REQUIRE(res.runs.size() == 1);
  const auto& run = res.runs[0];
  CHECK(run.variant == "async");
  CHECK(run.activations == 2 * 30 * 2);  // layers+1 solves, M activations/round
  CHECK(run.messages == run.activations * 1);

  REQUIRE(run.trace_files.size() == 2);
  std::istringstream in(slurp(run.trace_files[0]));
  std::string header;
  REQUIRE(std::getline(in, header));
  int rows = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) ++rows;
  }
  CHECK(rows == 60);  // one row per activation
}

TEST_CASE("seeded experiments replay bit for bit modulo wall clock") {
  ExperimentSpec spec = small_spec(ExperimentMode::async);
  spec.iters = 12;
  spec.staleness_cap = 3;
  spec.out_path = "exp_replay.json";

  dssfn::run_experiment(spec);
  const std::string json_a = slurp("exp_replay.json");
  const std::string trace_a = trace_without_wall("exp_replay_async_r0_l0.csv");

  dssfn::run_experiment(spec);
  const std::string json_b = slurp("exp_replay.json");
  const std::string trace_b = trace_without_wall("exp_replay_async_r0_l0.csv");

  CHECK(parse_without_wall(json_a) == parse_without_wall(json_b));
  CHECK(trace_a == trace_b);

  // a different seed changes the measured numbers, not just metadata
  spec.seed = 6;
  dssfn::run_experiment(spec);
  const std::string json_c = slurp("exp_replay.json");
  CHECK(parse_without_wall(json_a) != parse_without_wall(json_c));
}

TEST_CASE("compare mode certifies decentralized equivalence") {
  ExperimentSpec spec = small_spec(ExperimentMode::compare);
  spec.iters = 4000;
  spec.gamma0 = 1.0;
  spec.gamma = 1.0;
  spec.width_extra = 8;
  spec.eps_override = 1e6;  // keep every least-squares solution interior
  spec.mu0 = 0.0;
  spec.mu = 0.0;
  spec.seed = 11;
  spec.out_path = "exp_cmp.json";
  std::remove("exp_cmp.json");

  ExperimentResult res;
  REQUIRE_NOTHROW(res = dssfn::run_experiment(spec));
  REQUIRE(res.runs.size() == 3);
  CHECK(res.runs[0].variant == "central");
  CHECK(res.runs[1].variant == "sync");
  CHECK(res.runs[2].variant == "async");
  CHECK(res.compare_pass);
  CHECK(res.compare_sync_distance >= 0.0);
  CHECK(res.compare_sync_distance <= 1e-3);
  CHECK(res.compare_async_distance <= 1e-2);
  // the summary accuracy tracks the centralized variant only
  CHECK(res.accuracy_mean == doctest::Approx(res.runs[0].accuracy));

  const json doc = json::parse(slurp("exp_cmp.json"));
  const json& cmp = doc.at("summary").at("compare");
  CHECK(cmp.at("pass") == true);
  CHECK(cmp.at("sync_tolerance") == 1e-3);
  CHECK(cmp.at("async_tolerance") == 1e-2);
  CHECK(cmp.at("sync_distance").get<double>() ==
        doctest::Approx(res.compare_sync_distance));
}

TEST_CASE("a failing equivalence check still writes the result file") {
  ExperimentSpec spec = small_spec(ExperimentMode::compare);
  spec.iters = 1;  // nowhere near consensus
  spec.eps_override = 1e6;
  spec.mu0 = 0.0;
  spec.mu = 0.0;
  spec.out_path = "exp_cmp_fail.json";
  std::remove("exp_cmp_fail.json");

  CHECK_THROWS_AS(dssfn::run_experiment(spec), std::runtime_error);
  REQUIRE(file_exists("exp_cmp_fail.json"));
  const json doc = json::parse(slurp("exp_cmp_fail.json"));
  CHECK(doc.at("summary").at("compare").at("pass") == false);

  // the written document carries enough to rebuild the ExperimentSpec
  const ExperimentSpec back = dssfn::spec_from_result_json(slurp("exp_cmp_fail.json"));
  CHECK(back.mode == ExperimentMode::compare);
  CHECK(back.iters == 1);
}

TEST_CASE("experiment specs survive the JSON round trip") {
  ExperimentSpec spec = small_spec(ExperimentMode::async);
  spec.class_count = 3;
  spec.iters = 9;
  spec.gamma0 = 1.25;
  spec.gamma = 0.75;
  spec.mu0 = 2.0;
  spec.mu = 0.25;
  spec.eta = 0.8;
  spec.eps_override = 2.5;
  spec.seed = 9001;
  spec.staleness_cap = 7;
  spec.activation = dssfn::ActivationScheme::round_robin;
  spec.sweep = dssfn::SyncSweep::gauss_seidel;
  spec.shuffle = false;
  spec.normalize = false;
  spec.out_path.clear();  // no files written without an output path

  const ExperimentResult res = dssfn::run_experiment(spec);
  CHECK(res.result_json_path.empty());

  const ExperimentSpec back =
      dssfn::spec_from_result_json(dssfn::result_to_json(res));
  CHECK(back.mode == spec.mode);
  CHECK(back.data_path == spec.data_path);
  CHECK(back.test_path == spec.test_path);
  CHECK(back.class_count == spec.class_count);
  CHECK(back.nodes == spec.nodes);
  CHECK(back.degree == spec.degree);
  CHECK(back.iters == spec.iters);
  CHECK(back.gamma0 == spec.gamma0);
  CHECK(back.gamma == spec.gamma);
  CHECK(back.mu0 == spec.mu0);
  CHECK(back.mu == spec.mu);
  CHECK(back.eta == spec.eta);
  CHECK(back.layers == spec.layers);
  CHECK(back.width_extra == spec.width_extra);
  CHECK(back.eps_override == spec.eps_override);
  CHECK(back.seed == spec.seed);
  CHECK(back.repeats == spec.repeats);
  CHECK(back.out_path == spec.out_path);
  CHECK(back.parallel == spec.parallel);
  CHECK(back.shuffle == spec.shuffle);
  CHECK(back.normalize == spec.normalize);
  CHECK(back.staleness_cap == spec.staleness_cap);
  CHECK(back.activation == spec.activation);
  CHECK(back.sweep == spec.sweep);
}

TEST_CASE("degree sweeps validate upfront and node sweeps build rings") {
  ExperimentSpec base = small_spec(ExperimentMode::sync);
  base.nodes = 4;
  base.degree = 2;
  base.iters = 10;
  base.width_extra = 4;

  CHECK_THROWS_AS(dssfn::sweep_degree(base, {}), std::invalid_argument);
  CHECK_THROWS_AS(dssfn::sweep_degree(base, {2, 3}), std::invalid_argument);
  CHECK_THROWS_AS(dssfn::sweep_nodes(base, {1}), std::invalid_argument);

  const auto degree_rows = dssfn::sweep_degree(base, {2});
  REQUIRE(degree_rows.size() == 1);
  CHECK(degree_rows[0].value == 2);
  CHECK(degree_rows[0].sync_result.spec.mode == ExperimentMode::sync);
  CHECK(degree_rows[0].async_result.spec.mode == ExperimentMode::async);
  CHECK(degree_rows[0].sync_result.runs.size() == 1);
  CHECK(degree_rows[0].sync_result.spec.out_path.empty());

  const auto node_rows = dssfn::sweep_nodes(base, {2, 4});
  REQUIRE(node_rows.size() == 2);
  CHECK(node_rows[0].value == 2);
  CHECK(node_rows[0].sync_result.spec.degree == 1);  // two-node ring
  CHECK(node_rows[1].sync_result.spec.degree == 2);
  CHECK(node_rows[1].sync_result.spec.nodes == 4);

  std::remove("exp_sweep.json");
  dssfn::write_sweep_json(node_rows, "nodes", "exp_sweep.json");
  const json doc = json::parse(slurp("exp_sweep.json"));
  CHECK(doc.at("sweep") == "nodes");
  REQUIRE(doc.at("rows").size() == 2);
  CHECK(doc.at("rows")[0].at("value") == 2);
  CHECK(doc.at("rows")[1].at("sync").at("spec").at("nodes") == 4);
}
