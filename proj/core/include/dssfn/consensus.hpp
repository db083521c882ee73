#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "dssfn/graph.hpp"
#include "dssfn/matrix.hpp"
#include "dssfn/model.hpp"
#include "dssfn/trace.hpp"

namespace dssfn {

enum class ConsensusMode { sync, async };

// Message application order within a synchronous round. jacobi delivers all
// duals between rounds, so every node's update k+1 reads round-k duals.
// gauss_seidel sweeps nodes in id order and delivers each node's duals
// immediately, which is the schedule a zero-staleness round-robin
// asynchronous run realizes; the two cannot coincide with jacobi because a
// sequential sweep always exposes earlier nodes' fresh duals to later ones.
enum class SyncSweep { jacobi, gauss_seidel };

enum class ActivationScheme { uniform, round_robin };

// Which factorization backs the per-node Gram inverse. kernel solves the
// J_m-sized system via the matrix-inversion lemma and is picked
// automatically whenever the node has fewer samples than feature rows (and
// a positive ridge from its edges); direct factors the r x r Gram.
enum class SolveRoute { automatic, direct, kernel };

struct SolverConfig {
  double gamma = 0.0;  // consensus coupling weight; must be > 0 on graphs with edges
  double eta = 0.5;    // dual step size in (0, 1]
  // sync: number of rounds (each round updates every node once);
  // async: number of single-node activations.
  int max_iters = 1;
  double eps = 0.0;    // readout norm-squared budget, > 0
  ConsensusMode mode = ConsensusMode::sync;
  SyncSweep sweep = SyncSweep::jacobi;
  ActivationScheme activation = ActivationScheme::uniform;
  std::uint64_t activation_seed = 1;
  // async only: messages are delivered with a seeded uniform integer delay
  // in [0, staleness_cap] activations.
  int staleness_cap = 0;
  bool record_trace = true;
  // Threaded runtime: one worker per node. Convergence-level guarantees
  // only; the deterministic simulator is the default.
  bool parallel = false;
};

// One node's view of the layer problem: its shard (T_m, Y_m), the current
// iterate O_m, dual variables per neighbor, and the cached factorization of
// (2 Y_m Y_m^T + gamma |E(m)| I).
class NodeState {
 public:
  // targets: Q x J_m, features: r x J_m. neighbor ids must be sorted
  // ascending and not contain the node itself.
  NodeState(int id, Matrix targets, Matrix features, std::vector<int> neighbors,
            double gamma, SolveRoute route = SolveRoute::automatic);
  ~NodeState();
  NodeState(NodeState&&) noexcept;
  NodeState& operator=(NodeState&&) noexcept;
  NodeState(const NodeState&) = delete;
  NodeState& operator=(const NodeState&) = delete;

  int id() const;
  int target_dim() const;    // Q
  int feature_rows() const;  // r
  int sample_count() const;  // J_m
  int degree() const;        // |E(m)|
  double gamma() const;
  const std::vector<int>& neighbor_ids() const;

  const Matrix& targets() const;
  const Matrix& features() const;

  // Current iterate O_m (Q x r); zero before the first update.
  const Matrix& iterate() const;
  void set_iterate(Matrix o);

  // Z_{m,n}: dual this node last pushed toward neighbor n.
  const Matrix& out_dual(int neighbor) const;
  Matrix& out_dual(int neighbor);
  // Z_{n,m}: dual last received from neighbor n (zero until one arrives).
  const Matrix& in_dual(int neighbor) const;
  void receive_dual(int from, const Matrix& z);
  // Zeroes every dual; a new layer starts from zero duals.
  void reset_duals();

  // b * (2 Y Y^T + gamma |E(m)| I)^{-1} through the cached factorization.
  Matrix apply_inverse_gram(const Matrix& b) const;
  // 2 T Y^T, precomputed.
  const Matrix& const_term() const;

  double local_cost() const;  // ||T - O Y||_F^2
  // Power-iteration estimate of the spectral norm of Y (for the coupling
  // weight bound gamma < 2 / ||Y||).
  double feature_spectral_norm() const;
  SolveRoute chosen_route() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct DualMessage {
  int from = 0;
  int to = 0;
  std::int64_t sent_at = 0;  // activation counter value at send time
  Matrix z;
};

// One activation of a node: recomputes the iterate
//   O_m <- P_eps((2 T Y^T - sum_n Z_{n,m}) (2 Y Y^T + gamma |E(m)| I)^-1)
// from the duals currently held, then steps every outgoing dual
//   Z_{m,n} <- Z_{m,n} - eta ((Z_{m,n} + Z_{n,m})/2 + gamma O_m)
// and returns one message per neighbor carrying the fresh Z_{m,n}. The new
// iterate is readable via state.iterate(). SPD failures are annotated with
// the node id.
std::vector<DualMessage> node_update(NodeState& state, const SolverConfig& cfg);

// Rescales o onto the Frobenius ball {||.||_F^2 <= eps} when outside;
// interior points pass through unchanged.
Matrix project_frobenius(const Matrix& o, double eps);

// Largest disagreement across the graph: max over edges of ||O_m - O_n||_F.
double consensus_error(const std::vector<NodeState>& nodes, const Graph& g);

// Fixed-point residual of the dual updates: max over directed edges of
// ||(Z_{m,n} + Z_{n,m})/2 + gamma O_m||_F, reading the true duals of both
// endpoints. Converges to zero together with the iterates.
double dual_residual(const std::vector<NodeState>& nodes, const Graph& g);

// Per-directed-link FIFO message queues with delayed visibility: a message
// posted with ready_at = k becomes deliverable at any time now > k, and
// links never reorder.
class Mailbox {
 public:
  explicit Mailbox(const Graph& g);
  ~Mailbox();
  Mailbox(Mailbox&&) noexcept;
  Mailbox& operator=(Mailbox&&) noexcept;

  void post(DualMessage msg, std::int64_t ready_at);
  // Applies every ready message addressed to receiver, oldest first,
  // stopping at the first not-yet-ready message per link.
  void drain_into(NodeState& receiver, std::int64_t now);
  std::int64_t posted_count() const;
  std::int64_t delivered_count() const;
  bool fully_drained() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct ConsensusOutcome {
  std::vector<Matrix> iterates;  // final O_m per node
  EventTrace trace;
  std::int64_t activations = 0;
  std::int64_t messages_sent = 0;
  double final_consensus_error = 0.0;
  double final_dual_residual = 0.0;
};

// Runs the layer solve on the given node states (duals are reset on entry).
// sync mode: cfg.max_iters rounds, every node updated per round, duals
// exchanged per cfg.sweep. async mode: cfg.max_iters activations, the next
// node drawn per cfg.activation from a SeededRng(cfg.activation_seed)
// stream, messages routed through a Mailbox with seeded delays in
// [0, cfg.staleness_cap]. Throws on a disconnected graph.
// cfg.parallel swaps in the threaded runtime: sync reproduces the simulator
// bit for bit; async runs one thread per node, each spending an equal share
// of the activation budget. There staleness_cap bounds how many activations
// a worker may run ahead of its neighbors instead of scheduling message
// delays, and results are only convergence-level reproducible.
ConsensusOutcome run_layer_consensus(std::vector<NodeState>& nodes,
                                     const Graph& g, const SolverConfig& cfg);

struct DecentralizedResult {
  // Weights assembled from the consensus-averaged readouts; every node
  // builds this identical stack from the shared seed.
  LayerStack shared_stack;
  // node_readouts[m][l] = node m's own O_{l,m} (differs from the shared
  // readout by the residual consensus error).
  std::vector<std::vector<Matrix>> node_readouts;
  // layer_costs[l] = sum_m ||T_m - O*_l Y_{l,m}||_F^2 with the shared O*_l.
  std::vector<double> layer_costs;
  std::vector<EventTrace> layer_traces;  // one per layer 0..L
  std::int64_t total_activations = 0;
  std::int64_t total_messages = 0;
};

// Layer-by-layer decentralized training over sharded data. Per layer:
// every node propagates its shard through the shared weights, a fresh
// consensus solve produces the per-node readouts, their average O*_l (an
// exact all-reduce stand-in for a terminal gossip sweep) is shared by all
// nodes to assemble W_{l+1} with the seeded random block. gamma_first
// applies to the layer-0 solve and gamma_rest to every later layer; pass 0
// to fall back to solver.gamma. The layer index is folded into the
// activation seed so activation orders differ across layers but stay
// reproducible.
DecentralizedResult train_decentralized(const std::vector<Matrix>& x_shards,
                                        const std::vector<Matrix>& t_shards,
                                        const Graph& g, const SsfnConfig& cfg,
                                        const SolverConfig& solver,
                                        double gamma_first = 0.0,
                                        double gamma_rest = 0.0);

}  // namespace dssfn
