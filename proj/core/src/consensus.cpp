#include "dssfn/consensus.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "dssfn/log.hpp"
#include "dssfn/rng.hpp"

namespace dssfn {

// ---- trace ------------------------------------------------------------------

void EventTrace::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("EventTrace::write_csv: cannot open " + path);
  }
  out << "k,node,local_cost,consensus_error,wall_ns\n";
  char buf[96];
  for (const TraceRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%lld,%d,%.17g,%.17g,%lld\n",
                  static_cast<long long>(r.k), r.node, r.local_cost,
                  r.consensus_error, static_cast<long long>(r.wall_ns));
    out << buf;
  }
  if (!out.good()) {
    throw std::runtime_error("EventTrace::write_csv: write failed for " + path);
  }
}

// ---- projection -------------------------------------------------------------

Matrix project_frobenius(const Matrix& o, double eps) {
  if (!(eps > 0.0)) {
    throw std::invalid_argument("project_frobenius: eps must be > 0");
  }
  const double norm_sq = frobenius_norm_sq(o);
  if (norm_sq <= eps) return o;
  return o * std::sqrt(eps / norm_sq);
}

// ---- node state -------------------------------------------------------------

struct NodeState::Impl {
  int id = 0;
  double gamma = 0.0;
  std::vector<int> neighbors;
  Matrix targets;   // Q x J
  Matrix features;  // r x J
  Matrix iterate;   // Q x r
  Matrix const_term;  // 2 T Y^T
  std::vector<Matrix> out_duals;  // aligned with neighbors
  std::vector<Matrix> in_duals;
  SolveRoute route = SolveRoute::direct;
  // direct: factor of (2 Y Y^T + c I), r x r.
  // kernel: factor of (I + (2/c) Y^T Y), J x J; then
  //   b (2YY^T + cI)^-1 = (1/c) b - (2/c^2) (bY) K^-1 Y^T.
  std::unique_ptr<SpdFactor> factor;

  int neighbor_index(int n) const {
    const auto it = std::lower_bound(neighbors.begin(), neighbors.end(), n);
    if (it == neighbors.end() || *it != n) {
      std::ostringstream os;
      os << "node " << id << ": " << n << " is not a neighbor";
      throw std::invalid_argument(os.str());
    }
    return static_cast<int>(it - neighbors.begin());
  }
};

NodeState::NodeState(int id, Matrix targets, Matrix features,
                     std::vector<int> neighbors, double gamma, SolveRoute route)
    : impl_(new Impl) {
  if (targets.empty() || features.empty() || targets.cols() != features.cols()) {
    std::ostringstream os;
    os << "NodeState " << id << ": targets " << targets.rows() << "x"
       << targets.cols() << " and features " << features.rows() << "x"
       << features.cols() << " must share a positive sample count";
    throw std::invalid_argument(os.str());
  }
  if (!std::is_sorted(neighbors.begin(), neighbors.end()) ||
      std::adjacent_find(neighbors.begin(), neighbors.end()) != neighbors.end()) {
    throw std::invalid_argument("NodeState: neighbor ids must be sorted and unique");
  }
  for (int n : neighbors) {
    if (n == id) {
      throw std::invalid_argument("NodeState: node cannot neighbor itself");
    }
  }
  const int deg = static_cast<int>(neighbors.size());
  if (deg > 0 && !(gamma > 0.0)) {
    std::ostringstream os;
    os << "NodeState " << id << ": gamma must be > 0 on a node with neighbors";
    throw std::invalid_argument(os.str());
  }
  impl_->id = id;
  impl_->gamma = gamma;
  impl_->neighbors = std::move(neighbors);
  impl_->const_term = 2.0 * mat_mul_nt(targets, features);
  impl_->iterate = Matrix(targets.rows(), features.rows());
  const Matrix zero(targets.rows(), features.rows());
  impl_->out_duals.assign(deg, zero);
  impl_->in_duals.assign(deg, zero);

  const double c = gamma * deg;
  const int r = features.rows();
  const int j = features.cols();
  if (route == SolveRoute::automatic) {
    route = (c > 0.0 && j < r) ? SolveRoute::kernel : SolveRoute::direct;
  }
  if (route == SolveRoute::kernel && !(c > 0.0)) {
    throw std::invalid_argument(
        "NodeState: kernel route needs gamma * degree > 0");
  }
  impl_->route = route;
  try {
    if (route == SolveRoute::direct) {
      Matrix gram = 2.0 * mat_mul_nt(features, features);
      for (int i = 0; i < r; ++i) gram(i, i) += c;
      impl_->factor.reset(new SpdFactor(gram));
    } else {
      Matrix kernel = mat_mul_tn(features, features) * (2.0 / c);
      for (int i = 0; i < j; ++i) kernel(i, i) += 1.0;
      impl_->factor.reset(new SpdFactor(kernel));
    }
  } catch (const NotPositiveDefiniteError& e) {
    std::ostringstream os;
    os << "node " << id << ": " << e.what();
    throw NotPositiveDefiniteError(os.str(), e.pivot);
  }
  impl_->targets = std::move(targets);
  impl_->features = std::move(features);
}

NodeState::~NodeState() = default;
NodeState::NodeState(NodeState&&) noexcept = default;
NodeState& NodeState::operator=(NodeState&&) noexcept = default;

int NodeState::id() const { return impl_->id; }
int NodeState::target_dim() const { return impl_->targets.rows(); }
int NodeState::feature_rows() const { return impl_->features.rows(); }
int NodeState::sample_count() const { return impl_->features.cols(); }
int NodeState::degree() const { return static_cast<int>(impl_->neighbors.size()); }
double NodeState::gamma() const { return impl_->gamma; }
const std::vector<int>& NodeState::neighbor_ids() const { return impl_->neighbors; }
const Matrix& NodeState::targets() const { return impl_->targets; }
const Matrix& NodeState::features() const { return impl_->features; }
const Matrix& NodeState::iterate() const { return impl_->iterate; }

void NodeState::set_iterate(Matrix o) {
  if (!o.same_shape(impl_->iterate)) {
    throw std::invalid_argument("NodeState::set_iterate: shape change rejected");
  }
  impl_->iterate = std::move(o);
}

const Matrix& NodeState::out_dual(int neighbor) const {
  return impl_->out_duals[impl_->neighbor_index(neighbor)];
}

Matrix& NodeState::out_dual(int neighbor) {
  return impl_->out_duals[impl_->neighbor_index(neighbor)];
}

const Matrix& NodeState::in_dual(int neighbor) const {
  return impl_->in_duals[impl_->neighbor_index(neighbor)];
}

void NodeState::receive_dual(int from, const Matrix& z) {
  const int idx = impl_->neighbor_index(from);
  if (!z.same_shape(impl_->in_duals[idx])) {
    std::ostringstream os;
    os << "node " << impl_->id << ": dual from " << from << " has shape "
       << z.rows() << "x" << z.cols() << ", expected " << impl_->iterate.rows()
       << "x" << impl_->iterate.cols();
    throw std::invalid_argument(os.str());
  }
  impl_->in_duals[idx] = z;
}

void NodeState::reset_duals() {
  const Matrix zero(impl_->iterate.rows(), impl_->iterate.cols());
  for (Matrix& z : impl_->out_duals) z = zero;
  for (Matrix& z : impl_->in_duals) z = zero;
}

Matrix NodeState::apply_inverse_gram(const Matrix& b) const {
  if (impl_->route == SolveRoute::direct) {
    return impl_->factor->solve_right(b);
  }
  const double c = impl_->gamma * degree();
  const Matrix by = mat_mul(b, impl_->features);         // Q x J
  const Matrix k_inv_by = impl_->factor->solve_right(by);
  Matrix out = b;
  add_scaled(out, -2.0 / c, mat_mul_nt(k_inv_by, impl_->features));
  out *= 1.0 / c;
  return out;
}

const Matrix& NodeState::const_term() const { return impl_->const_term; }

double NodeState::local_cost() const {
  return frobenius_norm_sq(impl_->targets -
                           mat_mul(impl_->iterate, impl_->features));
}

double NodeState::feature_spectral_norm() const {
  const Matrix& y = impl_->features;
  Matrix v(y.cols(), 1);
  for (int i = 0; i < y.cols(); ++i) v(i, 0) = 1.0;
  double sigma_sq = 0.0;
  for (int it = 0; it < 16; ++it) {
    const Matrix u = mat_mul(y, v);   // r x 1
    Matrix w = mat_mul_tn(y, u);      // J x 1
    const double norm = frobenius_norm(w);
    if (norm == 0.0) return 0.0;
    sigma_sq = frobenius_norm_sq(u);
    const double vnorm_sq = frobenius_norm_sq(v);
    sigma_sq /= vnorm_sq;
    w *= 1.0 / norm;
    v = std::move(w);
  }
  return std::sqrt(sigma_sq);
}

SolveRoute NodeState::chosen_route() const { return impl_->route; }

// ---- node update ------------------------------------------------------------

std::vector<DualMessage> node_update(NodeState& state, const SolverConfig& cfg) {
  if (!(cfg.eps > 0.0)) {
    throw std::invalid_argument("node_update: cfg.eps must be > 0");
  }
  if (!(cfg.eta > 0.0) || cfg.eta > 1.0) {
    throw std::invalid_argument("node_update: eta must lie in (0, 1]");
  }
  Matrix b = state.const_term();
  for (int n : state.neighbor_ids()) {
    b -= state.in_dual(n);
  }
  state.set_iterate(project_frobenius(state.apply_inverse_gram(b), cfg.eps));

  const double gamma = state.gamma();
  const double eta = cfg.eta;
  std::vector<DualMessage> messages;
  messages.reserve(state.neighbor_ids().size());
  for (int n : state.neighbor_ids()) {
    Matrix& z_out = state.out_dual(n);
    Matrix step = 0.5 * (z_out + state.in_dual(n));
    add_scaled(step, gamma, state.iterate());
    add_scaled(z_out, -eta, step);
    DualMessage msg;
    msg.from = state.id();
    msg.to = n;
    msg.z = z_out;
    messages.push_back(std::move(msg));
  }
  return messages;
}

// ---- global metrics ---------------------------------------------------------

double consensus_error(const std::vector<NodeState>& nodes, const Graph& g) {
  double worst = 0.0;
  for (const auto& [a, b] : g.edges()) {
    worst = std::max(worst,
                     frobenius_norm(nodes[a].iterate() - nodes[b].iterate()));
  }
  return worst;
}

double dual_residual(const std::vector<NodeState>& nodes, const Graph& g) {
  double worst = 0.0;
  for (const auto& [a, b] : g.edges()) {
    for (const auto& [m, n] : {std::pair{a, b}, std::pair{b, a}}) {
      Matrix res = 0.5 * (nodes[m].out_dual(n) + nodes[n].out_dual(m));
      add_scaled(res, nodes[m].gamma(), nodes[m].iterate());
      worst = std::max(worst, frobenius_norm(res));
    }
  }
  return worst;
}

// ---- mailbox ----------------------------------------------------------------

struct Mailbox::Impl {
  struct Entry {
    std::int64_t ready_at;
    DualMessage msg;
  };
  int node_count = 0;
  // link_of[from] maps a sorted position in neighbors(from) to a queue index.
  std::vector<std::vector<int>> targets_of;  // sorted neighbor ids per sender
  std::vector<int> queue_offset;             // per sender
  std::vector<std::deque<Entry>> queues;
  // incoming[to] lists (sender, queue index) pairs.
  std::vector<std::vector<std::pair<int, int>>> incoming;
  std::int64_t posted = 0;
  std::int64_t delivered = 0;

  int queue_index(int from, int to) const {
    const auto& t = targets_of[from];
    const auto it = std::lower_bound(t.begin(), t.end(), to);
    if (it == t.end() || *it != to) {
      std::ostringstream os;
      os << "Mailbox: no link " << from << " -> " << to;
      throw std::invalid_argument(os.str());
    }
    return queue_offset[from] + static_cast<int>(it - t.begin());
  }
};

Mailbox::Mailbox(const Graph& g) : impl_(new Impl) {
  const int m = g.node_count();
  impl_->node_count = m;
  impl_->targets_of.resize(m);
  impl_->queue_offset.resize(m);
  impl_->incoming.resize(m);
  int next = 0;
  for (int a = 0; a < m; ++a) {
    impl_->targets_of[a] = g.neighbors(a);
    impl_->queue_offset[a] = next;
    next += static_cast<int>(impl_->targets_of[a].size());
  }
  impl_->queues.resize(next);
  for (int a = 0; a < m; ++a) {
    const auto& t = impl_->targets_of[a];
    for (std::size_t i = 0; i < t.size(); ++i) {
      impl_->incoming[t[i]].emplace_back(a, impl_->queue_offset[a] +
                                                static_cast<int>(i));
    }
  }
}

Mailbox::~Mailbox() = default;
Mailbox::Mailbox(Mailbox&&) noexcept = default;
Mailbox& Mailbox::operator=(Mailbox&&) noexcept = default;

void Mailbox::post(DualMessage msg, std::int64_t ready_at) {
  const int q = impl_->queue_index(msg.from, msg.to);
  impl_->queues[q].push_back({ready_at, std::move(msg)});
  ++impl_->posted;
}

void Mailbox::drain_into(NodeState& receiver, std::int64_t now) {
  for (const auto& [sender, q] : impl_->incoming[receiver.id()]) {
    auto& queue = impl_->queues[q];
    while (!queue.empty() && queue.front().ready_at < now) {
      receiver.receive_dual(sender, queue.front().msg.z);
      queue.pop_front();
      ++impl_->delivered;
    }
  }
}

std::int64_t Mailbox::posted_count() const { return impl_->posted; }
std::int64_t Mailbox::delivered_count() const { return impl_->delivered; }

bool Mailbox::fully_drained() const {
  for (const auto& q : impl_->queues) {
    if (!q.empty()) return false;
  }
  return true;
}

// ---- layer solve ------------------------------------------------------------

namespace {

using Clock = std::chrono::steady_clock;

std::int64_t ns_since(Clock::time_point start) {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() -
                                                              start)
      .count();
}

void validate_run(const std::vector<NodeState>& nodes, const Graph& g,
                  const SolverConfig& cfg) {
  if (static_cast<int>(nodes.size()) != g.node_count()) {
    std::ostringstream os;
    os << "run_layer_consensus: " << nodes.size() << " node states for a "
       << g.node_count() << "-node graph";
    throw std::invalid_argument(os.str());
  }
  if (!g.is_connected()) {
    throw std::invalid_argument("run_layer_consensus: graph is disconnected");
  }
  if (cfg.max_iters < 1) {
    throw std::invalid_argument("run_layer_consensus: max_iters must be >= 1");
  }
  if (!(cfg.eps > 0.0)) {
    throw std::invalid_argument("run_layer_consensus: eps must be > 0");
  }
  for (int m = 0; m < g.node_count(); ++m) {
    if (nodes[m].id() != m) {
      throw std::invalid_argument(
          "run_layer_consensus: node states must be ordered by id");
    }
    if (nodes[m].neighbor_ids() != g.neighbors(m)) {
      std::ostringstream os;
      os << "run_layer_consensus: node " << m << " neighbor list disagrees "
         << "with the graph";
      throw std::invalid_argument(os.str());
    }
    if (nodes[m].feature_rows() != nodes[0].feature_rows() ||
        nodes[m].target_dim() != nodes[0].target_dim()) {
      std::ostringstream os;
      os << "run_layer_consensus: node " << m
         << " iterate shape disagrees with node 0";
      throw std::invalid_argument(os.str());
    }
    if (g.edge_count() > 0 && nodes[m].gamma() != cfg.gamma) {
      std::ostringstream os;
      os << "run_layer_consensus: node " << m << " was built with gamma "
         << nodes[m].gamma() << " but cfg.gamma is " << cfg.gamma;
      throw std::invalid_argument(os.str());
    }
  }
}

void warn_gamma_bound(const std::vector<NodeState>& nodes,
                      const SolverConfig& cfg) {
  if (!log::enabled(log::Level::warn)) return;
  for (const NodeState& node : nodes) {
    if (node.degree() == 0) continue;
    const double sigma = node.feature_spectral_norm();
    if (sigma > 0.0 && cfg.gamma >= 2.0 / sigma) {
      std::ostringstream os;
      os << "gamma " << cfg.gamma << " exceeds the step bound 2/||Y|| = "
         << 2.0 / sigma << " on node " << node.id()
         << "; convergence is no longer covered by the step-size condition";
      log::warn(os.str());
    }
  }
}

// Incrementally maintained per-edge disagreement norms.
struct EdgeErrors {
  std::vector<std::pair<int, int>> edges;
  std::vector<std::vector<int>> incident;  // node -> edge indices
  std::vector<double> norms;

  EdgeErrors(const Graph& g, const std::vector<NodeState>& nodes) {
    edges = g.edges();
    incident.resize(g.node_count());
    norms.assign(edges.size(), 0.0);
    for (std::size_t i = 0; i < edges.size(); ++i) {
      incident[edges[i].first].push_back(static_cast<int>(i));
      incident[edges[i].second].push_back(static_cast<int>(i));
    }
    refresh_all(nodes);
  }

  void refresh_all(const std::vector<NodeState>& nodes) {
    for (std::size_t i = 0; i < edges.size(); ++i) {
      norms[i] = frobenius_norm(nodes[edges[i].first].iterate() -
                                nodes[edges[i].second].iterate());
    }
  }

  void refresh_node(int m, const std::vector<NodeState>& nodes) {
    for (int i : incident[m]) {
      norms[i] = frobenius_norm(nodes[edges[i].first].iterate() -
                                nodes[edges[i].second].iterate());
    }
  }

  double max_error() const {
    double worst = 0.0;
    for (double v : norms) worst = std::max(worst, v);
    return worst;
  }
};

double total_local_cost(const std::vector<NodeState>& nodes) {
  double acc = 0.0;
  for (const NodeState& node : nodes) acc += node.local_cost();
  return acc;
}

ConsensusOutcome run_sync(std::vector<NodeState>& nodes, const Graph& g,
                          const SolverConfig& cfg) {
  const auto start = Clock::now();
  const int m_count = g.node_count();
  ConsensusOutcome out;
  EdgeErrors errors(g, nodes);
  std::vector<DualMessage> round_messages;
  for (int k = 1; k <= cfg.max_iters; ++k) {
    if (cfg.sweep == SyncSweep::jacobi) {
      round_messages.clear();
      for (int m = 0; m < m_count; ++m) {
        auto msgs = node_update(nodes[m], cfg);
        ++out.activations;
        out.messages_sent += static_cast<std::int64_t>(msgs.size());
        for (auto& msg : msgs) {
          msg.sent_at = k;
          round_messages.push_back(std::move(msg));
        }
      }
      for (const auto& msg : round_messages) {
        nodes[msg.to].receive_dual(msg.from, msg.z);
      }
    } else {
      for (int m = 0; m < m_count; ++m) {
        auto msgs = node_update(nodes[m], cfg);
        ++out.activations;
        out.messages_sent += static_cast<std::int64_t>(msgs.size());
        for (auto& msg : msgs) {
          msg.sent_at = k;
          nodes[msg.to].receive_dual(msg.from, msg.z);
        }
      }
    }
    if (cfg.record_trace) {
      errors.refresh_all(nodes);
      TraceRow row;
      row.k = k;
      row.node = -1;
      row.local_cost = total_local_cost(nodes);
      row.consensus_error = errors.max_error();
      row.wall_ns = ns_since(start);
      out.trace.rows.push_back(row);
    }
  }
  return out;
}

ConsensusOutcome run_async(std::vector<NodeState>& nodes, const Graph& g,
                           const SolverConfig& cfg) {
  const auto start = Clock::now();
  const int m_count = g.node_count();
  ConsensusOutcome out;
  EdgeErrors errors(g, nodes);
  Mailbox mailbox(g);
  SeededRng scheduler(cfg.activation_seed);
  if (cfg.staleness_cap < 0) {
    throw std::invalid_argument("run_layer_consensus: staleness_cap must be >= 0");
  }
  for (std::int64_t k = 1; k <= cfg.max_iters; ++k) {
    const int m = cfg.activation == ActivationScheme::round_robin
                      ? static_cast<int>((k - 1) % m_count)
                      : static_cast<int>(scheduler.next_below(m_count));
    mailbox.drain_into(nodes[m], k);
    auto msgs = node_update(nodes[m], cfg);
    ++out.activations;
    out.messages_sent += static_cast<std::int64_t>(msgs.size());
    for (auto& msg : msgs) {
      msg.sent_at = k;
      const std::int64_t delay =
          cfg.staleness_cap > 0
              ? static_cast<std::int64_t>(scheduler.next_below(
                    static_cast<std::uint64_t>(cfg.staleness_cap) + 1))
              : 0;
      mailbox.post(std::move(msg), k + delay);
    }
    if (cfg.record_trace) {
      errors.refresh_node(m, nodes);
      TraceRow row;
      row.k = k;
      row.node = m;
      row.local_cost = nodes[m].local_cost();
      row.consensus_error = errors.max_error();
      row.wall_ns = ns_since(start);
      out.trace.rows.push_back(row);
    }
  }
  return out;
}

}  // namespace

ConsensusOutcome run_layer_consensus_parallel(std::vector<NodeState>& nodes,
                                              const Graph& g,
                                              const SolverConfig& cfg);

ConsensusOutcome run_layer_consensus(std::vector<NodeState>& nodes,
                                     const Graph& g, const SolverConfig& cfg) {
  validate_run(nodes, g, cfg);
  for (NodeState& node : nodes) {
    node.reset_duals();
    node.set_iterate(Matrix(node.target_dim(), node.feature_rows()));
  }
  warn_gamma_bound(nodes, cfg);
  ConsensusOutcome out;
  if (cfg.parallel) {
    out = run_layer_consensus_parallel(nodes, g, cfg);
  } else {
    out = cfg.mode == ConsensusMode::sync ? run_sync(nodes, g, cfg)
                                          : run_async(nodes, g, cfg);
  }
  out.iterates.reserve(nodes.size());
  for (const NodeState& node : nodes) {
    out.iterates.push_back(node.iterate());
  }
  out.final_consensus_error = consensus_error(nodes, g);
  out.final_dual_residual = dual_residual(nodes, g);
  return out;
}

// ---- decentralized training ---------------------------------------------------

DecentralizedResult train_decentralized(const std::vector<Matrix>& x_shards,
                                        const std::vector<Matrix>& t_shards,
                                        const Graph& g, const SsfnConfig& cfg,
                                        const SolverConfig& solver,
                                        double gamma_first, double gamma_rest) {
  const int m_count = g.node_count();
  if (static_cast<int>(x_shards.size()) != m_count ||
      static_cast<int>(t_shards.size()) != m_count) {
    std::ostringstream os;
    os << "train_decentralized: " << x_shards.size() << " feature shards and "
       << t_shards.size() << " target shards for " << m_count << " nodes";
    throw std::invalid_argument(os.str());
  }
  if (cfg.layers < 1 || cfg.width_extra < 1) {
    throw std::invalid_argument(
        "train_decentralized: layers and width_extra must be >= 1");
  }
  const int p = x_shards[0].rows();
  const int q = t_shards[0].rows();
  for (int m = 0; m < m_count; ++m) {
    if (x_shards[m].rows() != p || t_shards[m].rows() != q ||
        x_shards[m].cols() != t_shards[m].cols() || x_shards[m].empty()) {
      std::ostringstream os;
      os << "train_decentralized: shard " << m << " shapes are inconsistent";
      throw std::invalid_argument(os.str());
    }
  }
  const int n = cfg.hidden_width(q);
  const double eps = cfg.eps(q);
  const double g_first = gamma_first > 0.0 ? gamma_first : solver.gamma;
  const double g_rest = gamma_rest > 0.0 ? gamma_rest : solver.gamma;

  DecentralizedResult result;
  result.node_readouts.resize(m_count);
  result.shared_stack.input_dim = p;
  result.shared_stack.target_dim = q;
  result.shared_stack.width = n;

  std::vector<Matrix> features = x_shards;
  for (int l = 0; l <= cfg.layers; ++l) {
    const double gamma_l = l == 0 ? g_first : g_rest;
    SolverConfig layer_cfg = solver;
    layer_cfg.gamma = gamma_l;
    layer_cfg.eps = eps;
    layer_cfg.activation_seed =
        solver.activation_seed + static_cast<std::uint64_t>(l);

    std::vector<NodeState> states;
    states.reserve(m_count);
    ConsensusOutcome outcome;
    try {
      for (int m = 0; m < m_count; ++m) {
        states.emplace_back(m, t_shards[m], features[m], g.neighbors(m),
                            gamma_l);
      }
      outcome = run_layer_consensus(states, g, layer_cfg);
    } catch (const std::exception& e) {
      std::ostringstream os;
      os << "train_decentralized: layer " << l << ": " << e.what();
      throw std::runtime_error(os.str());
    }

    // Exact all-reduce stand-in for the terminal averaging sweep: one shared
    // readout so every node assembles an identical next weight matrix. The
    // average of ball-feasible iterates stays ball-feasible.
    Matrix shared = outcome.iterates[0];
    for (int m = 1; m < m_count; ++m) shared += outcome.iterates[m];
    shared *= 1.0 / m_count;

    double cost = 0.0;
    for (int m = 0; m < m_count; ++m) {
      cost += frobenius_norm_sq(t_shards[m] - mat_mul(shared, features[m]));
      result.node_readouts[m].push_back(std::move(outcome.iterates[m]));
    }
    result.layer_costs.push_back(cost);
    result.layer_traces.push_back(std::move(outcome.trace));
    result.total_activations += outcome.activations;
    result.total_messages += outcome.messages_sent;

    if (l < cfg.layers) {
      const int fan_in = features[0].rows();
      const double scale = cfg.weight_scale > 0.0
                               ? cfg.weight_scale
                               : 1.0 / std::sqrt(static_cast<double>(fan_in));
      SeededRng layer_rng(cfg.seed ^ static_cast<std::uint64_t>(l + 1));
      const Matrix r_block = random_matrix(layer_rng, n - 2 * q, fan_in, scale);
      Matrix w = assemble_weight(shared, r_block, q);
      for (int m = 0; m < m_count; ++m) {
        features[m] = forward_layer(w, features[m]);
      }
      result.shared_stack.weights.push_back(std::move(w));
    }
    result.shared_stack.readouts.push_back(std::move(shared));
    if (log::enabled(log::Level::debug)) {
      std::ostringstream os;
      os << "decentralized layer " << l << " cost "
         << result.layer_costs.back() << " consensus error "
         << (result.layer_traces.back().rows.empty()
                 ? -1.0
                 : result.layer_traces.back().rows.back().consensus_error);
      log::debug(os.str());
    }
  }
  return result;
}

}  // namespace dssfn
