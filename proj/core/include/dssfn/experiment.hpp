#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dssfn/consensus.hpp"
#include "dssfn/dataset.hpp"
#include "dssfn/model.hpp"

namespace dssfn {

enum class ExperimentMode { central, sync, async, compare };

// Full description of one experiment. Serialized into every result JSON so
// results are replayable.
struct ExperimentSpec {
  ExperimentMode mode = ExperimentMode::central;
  std::string data_path;        // training CSV
  std::string test_path;        // held-out CSV; empty skips accuracy
  int class_count = 0;          // 0 = infer from the training labels
  int nodes = 20;               // M
  int degree = 8;               // d
  int iters = 200;              // K: sync rounds / async activations are K and M*K
  double gamma0 = 0.0;          // layer-0 coupling weight (decentralized)
  double gamma = 0.0;           // coupling weight for later layers
  double mu0 = 0.0;             // layer-0 ridge (central)
  double mu = 0.0;              // ridge for later layers
  double eta = 0.5;
  int layers = 20;              // L
  int width_extra = 1000;       // n = 2Q + width_extra
  double eps_override = 0.0;    // 0 = default 2Q
  std::uint64_t seed = 1;
  int repeats = 1;
  std::string out_path;         // result JSON path; empty = no files written
  bool parallel = false;
  bool shuffle = true;
  bool normalize = true;
  int staleness_cap = 0;
  ActivationScheme activation = ActivationScheme::uniform;
  SyncSweep sweep = SyncSweep::jacobi;
};

// Outcome of a single repeat.
struct RunRecord {
  std::string variant;  // "central" | "sync" | "async"
  std::uint64_t seed = 0;
  double accuracy = -1.0;  // percent on the test set; -1 when no test set
  std::vector<double> layer_costs;
  double final_consensus_error = 0.0;
  std::int64_t activations = 0;
  std::int64_t messages = 0;
  double wall_seconds = 0.0;
  std::vector<std::string> trace_files;
};

struct ExperimentResult {
  ExperimentSpec spec;
  std::vector<RunRecord> runs;
  double accuracy_mean = -1.0;
  double accuracy_std = 0.0;
  double wall_seconds_total = 0.0;
  // compare mode: worst per-layer, per-node relative distance between the
  // decentralized readouts and the pooled-data reference solution.
  double compare_sync_distance = -1.0;
  double compare_async_distance = -1.0;
  bool compare_pass = true;
  std::string result_json_path;
};

// Runs spec.repeats repeats with seeds seed, seed+1, ... and writes the
// result JSON plus per-layer trace CSVs next to out_path when set.
// Deterministic given the ExperimentSpec (wall-clock fields aside). compare
// mode trains central, sync, and async variants on the same seed, checks the
// decentralized readouts against the pooled constrained least-squares
// reference layer by layer, and throws std::runtime_error when the
// distances exceed the documented tolerances (1e-3 sync, 1e-2 async).
ExperimentResult run_experiment(const ExperimentSpec& spec);

// JSON text of a result (the same document run_experiment writes).
std::string result_to_json(const ExperimentResult& r);

// Rebuilds the ExperimentSpec from a result JSON document, so any result
// can be replayed exactly.
ExperimentSpec spec_from_result_json(const std::string& json_text);

struct SweepRow {
  int value = 0;  // degree or node count
  ExperimentResult sync_result;
  ExperimentResult async_result;
};

// Connectivity sweep: one sync and one async run per degree on a fixed
// M-node circulant. Validates every degree before running anything.
std::vector<SweepRow> sweep_degree(const ExperimentSpec& base,
                                   const std::vector<int>& degrees);

// Network-size sweep over node counts on a ring (d=2; d=1 when M=2).
// Partitions are re-drawn per M from the same seed.
std::vector<SweepRow> sweep_nodes(const ExperimentSpec& base,
                                  const std::vector<int>& counts);

// Writes a sweep result table as JSON (one row per swept value).
void write_sweep_json(const std::vector<SweepRow>& rows, const std::string& kind,
                      const std::string& path);

}  // namespace dssfn
