#include <algorithm>
#include <atomic>
#include <barrier>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "dssfn/consensus.hpp"

// Threaded runtime: one worker owns each NodeState. Iterates are exchanged
// only through locked per-receiver inboxes (async) or a per-round buffer
// flush behind barriers (sync). Scheduling, and therefore the exact float
// stream, is left to the OS: callers get convergence-level guarantees, not
// the simulator's bit determinism.

namespace dssfn {
namespace {

using Clock = std::chrono::steady_clock;

std::int64_t ns_since(Clock::time_point start) {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() -
                                                              start)
      .count();
}

struct ErrorSlot {
  std::mutex mu;
  std::exception_ptr first;

  void capture() {
    std::lock_guard<std::mutex> lock(mu);
    if (!first) first = std::current_exception();
  }
  void rethrow_if_set() {
    if (first) std::rethrow_exception(first);
  }
};

ConsensusOutcome run_parallel_sync(std::vector<NodeState>& nodes,
                                   const Graph& g, const SolverConfig& cfg) {
  const int m_count = g.node_count();
  const auto start = Clock::now();
  ConsensusOutcome out;
  out.activations = static_cast<std::int64_t>(cfg.max_iters) * m_count;

  std::vector<std::vector<DualMessage>> round_msgs(m_count);
  std::atomic<std::int64_t> messages{0};
  ErrorSlot error;
  int round = 0;

  auto on_round_complete = [&]() noexcept {
    ++round;
    if (!cfg.record_trace) return;
    TraceRow row;
    row.k = round;
    row.node = -1;
    double cost = 0.0;
    for (const NodeState& node : nodes) cost += node.local_cost();
    row.local_cost = cost;
    row.consensus_error = consensus_error(nodes, g);
    row.wall_ns = ns_since(start);
    out.trace.rows.push_back(row);
  };
  std::barrier updates_done(m_count, [] {});
  std::barrier round_done(m_count, on_round_complete);

  auto worker = [&](int m) {
    try {
      for (int k = 1; k <= cfg.max_iters; ++k) {
        round_msgs[m] = node_update(nodes[m], cfg);
        for (auto& msg : round_msgs[m]) msg.sent_at = k;
        messages += static_cast<std::int64_t>(round_msgs[m].size());
        updates_done.arrive_and_wait();
        for (int sender = 0; sender < m_count; ++sender) {
          for (const auto& msg : round_msgs[sender]) {
            if (msg.to == m) nodes[m].receive_dual(msg.from, msg.z);
          }
        }
        round_done.arrive_and_wait();
      }
    } catch (...) {
      error.capture();
      updates_done.arrive_and_drop();
      round_done.arrive_and_drop();
    }
  };

  {
    std::vector<std::jthread> threads;
    threads.reserve(m_count);
    for (int m = 0; m < m_count; ++m) threads.emplace_back(worker, m);
  }
  error.rethrow_if_set();
  out.messages_sent = messages.load();
  return out;
}

ConsensusOutcome run_parallel_async(std::vector<NodeState>& nodes,
                                    const Graph& g, const SolverConfig& cfg) {
  const int m_count = g.node_count();
  const auto start = Clock::now();

  struct Inbox {
    std::mutex mu;
    std::vector<std::pair<int, Matrix>> msgs;  // (sender, dual), arrival order
  };
  std::vector<Inbox> inboxes(m_count);

  // Last published iterate per node, for cross-thread disagreement readings.
  std::vector<Matrix> published(m_count);
  std::vector<std::mutex> publish_mu(m_count);
  for (int m = 0; m < m_count; ++m) published[m] = nodes[m].iterate();

  const auto edges = g.edges();
  std::vector<std::vector<int>> incident(m_count);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    incident[edges[i].first].push_back(static_cast<int>(i));
    incident[edges[i].second].push_back(static_cast<int>(i));
  }
  std::vector<double> edge_norms(edges.size(), 0.0);
  std::mutex norms_mu;
  std::mutex trace_mu;

  std::atomic<std::int64_t> stamp{1};
  std::atomic<std::int64_t> messages{0};
  ErrorSlot error;
  ConsensusOutcome out;

  auto read_published = [&](int m) {
    std::lock_guard<std::mutex> lock(publish_mu[m]);
    return published[m];
  };

  // Every node gets an equal share of the activation budget. A single
  // shared ticket pool would let an early-starting thread burn the whole
  // budget before the last thread spawns, leaving nodes that never update.
  auto quota = [&](int m) {
    return cfg.max_iters / m_count +
           (m < static_cast<int>(cfg.max_iters % m_count) ? 1 : 0);
  };

  // Bounded asynchrony: a worker may run at most `window` activations ahead
  // of any live neighbor. Without this, per-update cost is often smaller
  // than thread spawn latency, so workers run their whole quota in disjoint
  // bursts against frozen neighbor duals and never reach consensus. The
  // fixed-point iteration only converges under a bounded delay, so the
  // delay bound knob doubles as the run-ahead limit here.
  const std::int64_t window = std::max(0, cfg.staleness_cap);
  struct Progress {
    std::mutex mu;
    std::condition_variable cv;
    std::vector<std::int64_t> completed;
    std::vector<char> dead;
  } progress;
  progress.completed.assign(m_count, 0);
  progress.dead.assign(m_count, 0);

  auto worker = [&](int m) {
    const std::vector<int>& nbrs = g.neighbors(m);
    try {
      for (std::int64_t i = 0; i < quota(m); ++i) {
        {
          std::unique_lock<std::mutex> lock(progress.mu);
          progress.cv.wait(lock, [&] {
            for (int n : nbrs) {
              if (!progress.dead[n] && progress.completed[n] < i - window)
                return false;
            }
            return true;
          });
        }
        const std::int64_t k = stamp.fetch_add(1);
        {
          std::lock_guard<std::mutex> lock(inboxes[m].mu);
          for (const auto& [sender, z] : inboxes[m].msgs) {
            nodes[m].receive_dual(sender, z);
          }
          inboxes[m].msgs.clear();
        }
        auto msgs = node_update(nodes[m], cfg);
        messages += static_cast<std::int64_t>(msgs.size());
        for (auto& msg : msgs) {
          std::lock_guard<std::mutex> lock(inboxes[msg.to].mu);
          inboxes[msg.to].msgs.emplace_back(m, std::move(msg.z));
        }
        {
          std::lock_guard<std::mutex> lock(publish_mu[m]);
          published[m] = nodes[m].iterate();
        }
        if (cfg.record_trace) {
          TraceRow row;
          row.k = k;
          row.node = m;
          row.local_cost = nodes[m].local_cost();
          {
            std::lock_guard<std::mutex> lock(norms_mu);
            for (int i : incident[m]) {
              const int other =
                  edges[i].first == m ? edges[i].second : edges[i].first;
              edge_norms[i] =
                  frobenius_norm(nodes[m].iterate() - read_published(other));
            }
            row.consensus_error =
                edge_norms.empty()
                    ? 0.0
                    : *std::max_element(edge_norms.begin(), edge_norms.end());
          }
          row.wall_ns = ns_since(start);
          std::lock_guard<std::mutex> lock(trace_mu);
          out.trace.rows.push_back(row);
        }
        {
          std::lock_guard<std::mutex> lock(progress.mu);
          ++progress.completed[m];
        }
        progress.cv.notify_all();
      }
    } catch (...) {
      error.capture();
      {
        std::lock_guard<std::mutex> lock(progress.mu);
        progress.dead[m] = 1;
      }
      progress.cv.notify_all();
    }
  };

  {
    std::vector<std::jthread> threads;
    threads.reserve(m_count);
    for (int m = 0; m < m_count; ++m) threads.emplace_back(worker, m);
  }
  error.rethrow_if_set();
  out.activations = cfg.max_iters;
  out.messages_sent = messages.load();
  std::sort(out.trace.rows.begin(), out.trace.rows.end(),
            [](const TraceRow& a, const TraceRow& b) { return a.k < b.k; });
  return out;
}

}  // namespace

ConsensusOutcome run_layer_consensus_parallel(std::vector<NodeState>& nodes,
                                              const Graph& g,
                                              const SolverConfig& cfg) {
  return cfg.mode == ConsensusMode::sync ? run_parallel_sync(nodes, g, cfg)
                                         : run_parallel_async(nodes, g, cfg);
}

}  // namespace dssfn
