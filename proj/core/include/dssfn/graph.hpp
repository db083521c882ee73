#pragma once

#include <string>
#include <utility>
#include <vector>

namespace dssfn {

// Undirected simple graph over nodes 0..M-1. Adjacency lists stay sorted
// ascending. Self-loops and duplicate edges are rejected at insertion.
class Graph {
 public:
  explicit Graph(int node_count);

  int node_count() const { return static_cast<int>(adj_.size()); }
  int edge_count() const { return edge_count_; }

  // Adds the undirected edge {a, b}. Throws std::out_of_range on bad ids,
  // std::invalid_argument on a == b or an edge already present.
  void add_edge(int a, int b);

  bool has_edge(int a, int b) const;

  // Sorted ascending neighbor ids. Throws std::out_of_range on bad id.
  const std::vector<int>& neighbors(int m) const;

  int degree(int m) const { return static_cast<int>(neighbors(m).size()); }

  // All edges as (min, max) pairs in lexicographic order.
  std::vector<std::pair<int, int>> edges() const;

  // True when every node is reachable from node 0 (vacuously true for a
  // single node).
  bool is_connected() const;

 private:
  void check_node(int m) const;

  std::vector<std::vector<int>> adj_;
  int edge_count_ = 0;
};

// Symmetric circulant graph: node m connects to (m +- k) mod M for
// k = 1..d/2, so every node has exactly d neighbors and |E| = M*d/2.
// Odd d is only realizable for M == 2, d == 1 (the single-edge pair);
// any other odd d throws, as does d < 1 or d >= M.
Graph circulant_graph(int node_count, int degree);

// Edge-list text format: one edge per line as two whitespace-separated
// zero-based node ids; blank lines and lines starting with '#' are
// ignored. Node count is max id + 1 unless node_count > 0 forces it.
// Parse errors carry the 1-based line number.
Graph load_edge_list(const std::string& path, int node_count = 0);
Graph parse_edge_list(std::istream& in, const std::string& stream_name,
                      int node_count = 0);
void save_edge_list(const Graph& g, const std::string& path);

}  // namespace dssfn
