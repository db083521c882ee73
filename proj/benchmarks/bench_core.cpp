// Microbenchmarks for the hot paths: dense products, SPD solves, single
// node updates, and full consensus rounds at desk scale.

#include <benchmark/benchmark.h>

#include <vector>

#include "dssfn/consensus.hpp"
#include "dssfn/graph.hpp"
#include "dssfn/matrix.hpp"
#include "dssfn/model.hpp"
#include "dssfn/rng.hpp"

namespace {

using dssfn::Graph;
using dssfn::Matrix;
using dssfn::NodeState;
using dssfn::SeededRng;
using dssfn::SolverConfig;

Matrix random_square(int n, std::uint64_t seed) {
  SeededRng rng(seed);
  return dssfn::random_matrix(rng, n, n, 1.0);
}

void BM_MatMul(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Matrix a = random_square(n, 1);
  const Matrix b = random_square(n, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(dssfn::mat_mul(a, b));
  }
  state.SetComplexityN(n);
}
BENCHMARK(BM_MatMul)->Arg(128)->Arg(512)->Complexity(benchmark::oNCubed);

void BM_SpdFactor(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  SeededRng rng(3);
  const Matrix y = dssfn::random_matrix(rng, n, 2 * n, 1.0);
  Matrix gram = dssfn::mat_mul_nt(y, y);
  for (int i = 0; i < n; ++i) gram(i, i) += 1.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(dssfn::SpdFactor(gram));
  }
}
BENCHMARK(BM_SpdFactor)->Arg(64)->Arg(256)->Arg(1024);

void BM_SpdSolveRight(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  SeededRng rng(4);
  const Matrix y = dssfn::random_matrix(rng, n, 2 * n, 1.0);
  Matrix gram = dssfn::mat_mul_nt(y, y);
  for (int i = 0; i < n; ++i) gram(i, i) += 1.0;
  const dssfn::SpdFactor factor(gram);
  const Matrix rhs = dssfn::random_matrix(rng, 8, n, 1.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(factor.solve_right(rhs));
  }
}
BENCHMARK(BM_SpdSolveRight)->Arg(64)->Arg(256)->Arg(1024);

void BM_NodeUpdate(benchmark::State& state) {
  const int r = static_cast<int>(state.range(0));
  SeededRng rng(5);
  const Matrix y = dssfn::random_matrix(rng, r, 50, 0.5);
  const Matrix t = dssfn::random_matrix(rng, 4, 50, 0.5);
  NodeState node(0, t, y, {1, 2}, 0.5);
  SolverConfig cfg;
  cfg.gamma = 0.5;
  cfg.eps = 8.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(dssfn::node_update(node, cfg));
  }
}
BENCHMARK(BM_NodeUpdate)->Arg(32)->Arg(128)->Arg(1024);

void BM_LayerConsensus(benchmark::State& state) {
  const int rounds = static_cast<int>(state.range(0));
  SeededRng rng(6);
  const Matrix o_true = dssfn::random_matrix(rng, 3, 20, 0.4);
  const Graph g = dssfn::circulant_graph(4, 2);
  std::vector<Matrix> ys, ts;
  for (int m = 0; m < 4; ++m) {
    ys.push_back(dssfn::random_matrix(rng, 20, 40, 0.3));
    ts.push_back(dssfn::mat_mul(o_true, ys.back()));
  }
  SolverConfig cfg;
  cfg.gamma = 0.5;
  cfg.eps = 6.0;
  cfg.mode = dssfn::ConsensusMode::sync;
  cfg.max_iters = rounds;
  cfg.record_trace = false;
  for (auto _ : state) {
    std::vector<NodeState> states;
    for (int m = 0; m < 4; ++m) {
      states.emplace_back(m, ts[m], ys[m], g.neighbors(m), 0.5);
    }
    benchmark::DoNotOptimize(dssfn::run_layer_consensus(states, g, cfg));
  }
}
BENCHMARK(BM_LayerConsensus)->Arg(10)->Arg(100);

void BM_ForwardLayer(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  SeededRng rng(7);
  const Matrix w = dssfn::random_matrix(rng, n, n, 0.1);
  const Matrix y = dssfn::random_matrix(rng, n, 200, 0.5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(dssfn::forward_layer(w, y));
  }
}
BENCHMARK(BM_ForwardLayer)->Arg(256)->Arg(1006);

}  // namespace

BENCHMARK_MAIN();
