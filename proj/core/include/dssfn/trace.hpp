#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dssfn {

// One consensus event: an activation in asynchronous mode, a completed
// round in synchronous mode (node == -1, local_cost summed over nodes).
// wall_ns is elapsed steady-clock time since the layer solve started and is
// the only field exempt from determinism guarantees.
struct TraceRow {
  std::int64_t k = 0;
  int node = -1;
  double local_cost = 0.0;
  double consensus_error = 0.0;
  std::int64_t wall_ns = 0;
};

struct EventTrace {
  std::vector<TraceRow> rows;

  // CSV with header "k,node,local_cost,consensus_error,wall_ns"; doubles
  // printed with round-trip precision.
  void write_csv(const std::string& path) const;
};

}  // namespace dssfn
