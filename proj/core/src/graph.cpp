#include "dssfn/graph.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <queue>
#include <sstream>
#include <stdexcept>

namespace dssfn {

Graph::Graph(int node_count) {
  if (node_count < 1) {
    std::ostringstream os;
    os << "Graph: node count must be positive, got " << node_count;
    throw std::invalid_argument(os.str());
  }
  adj_.resize(node_count);
}

void Graph::check_node(int m) const {
  if (m < 0 || m >= node_count()) {
    std::ostringstream os;
    os << "Graph: node id " << m << " out of range [0, " << node_count() << ")";
    throw std::out_of_range(os.str());
  }
}

void Graph::add_edge(int a, int b) {
  check_node(a);
  check_node(b);
  if (a == b) {
    std::ostringstream os;
    os << "Graph: self-loop at node " << a << " rejected";
    throw std::invalid_argument(os.str());
  }
  if (has_edge(a, b)) {
    std::ostringstream os;
    os << "Graph: duplicate edge (" << a << "," << b << ")";
    throw std::invalid_argument(os.str());
  }
  auto insert_sorted = [](std::vector<int>& v, int x) {
    v.insert(std::lower_bound(v.begin(), v.end(), x), x);
  };
  insert_sorted(adj_[a], b);
  insert_sorted(adj_[b], a);
  ++edge_count_;
}

bool Graph::has_edge(int a, int b) const {
  check_node(a);
  check_node(b);
  return std::binary_search(adj_[a].begin(), adj_[a].end(), b);
}

const std::vector<int>& Graph::neighbors(int m) const {
  check_node(m);
  return adj_[m];
}

std::vector<std::pair<int, int>> Graph::edges() const {
  std::vector<std::pair<int, int>> out;
  out.reserve(edge_count_);
  for (int m = 0; m < node_count(); ++m) {
    for (int n : adj_[m]) {
      if (m < n) out.emplace_back(m, n);
    }
  }
  return out;
}

bool Graph::is_connected() const {
  std::vector<char> seen(node_count(), 0);
  std::queue<int> frontier;
  frontier.push(0);
  seen[0] = 1;
  int reached = 1;
  while (!frontier.empty()) {
    const int m = frontier.front();
    frontier.pop();
    for (int n : adj_[m]) {
      if (!seen[n]) {
        seen[n] = 1;
        ++reached;
        frontier.push(n);
      }
    }
  }
  return reached == node_count();
}

Graph circulant_graph(int node_count, int degree) {
  const int m = node_count;
  if (m < 2) {
    throw std::invalid_argument("circulant_graph: need at least 2 nodes");
  }
  if (degree < 1 || degree >= m) {
    std::ostringstream os;
    os << "circulant_graph: degree " << degree << " invalid for " << m
       << " nodes (need 1 <= d <= M-1)";
    throw std::invalid_argument(os.str());
  }
  if (degree % 2 != 0 && !(m == 2 && degree == 1)) {
    std::ostringstream os;
    os << "circulant_graph: odd degree " << degree
       << " is only realizable for the two-node pair (M=2, d=1)";
    throw std::invalid_argument(os.str());
  }
  Graph g(m);
  if (m == 2) {
    g.add_edge(0, 1);
    return g;
  }
  for (int a = 0; a < m; ++a) {
    for (int k = 1; k <= degree / 2; ++k) {
      const int b = (a + k) % m;
      if (!g.has_edge(a, b)) g.add_edge(a, b);
    }
  }
  return g;
}

Graph parse_edge_list(std::istream& in, const std::string& stream_name,
                      int node_count) {
  std::vector<std::pair<int, int>> pairs;
  int max_id = -1;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    long a = -1, b = -1;
    std::string extra;
    if (!(fields >> a >> b) || (fields >> extra)) {
      std::ostringstream os;
      os << stream_name << ":" << line_no
         << ": expected exactly two node ids, got \"" << line << "\"";
      throw std::runtime_error(os.str());
    }
    if (a < 0 || b < 0) {
      std::ostringstream os;
      os << stream_name << ":" << line_no << ": negative node id";
      throw std::runtime_error(os.str());
    }
    pairs.emplace_back(static_cast<int>(a), static_cast<int>(b));
    max_id = std::max({max_id, static_cast<int>(a), static_cast<int>(b)});
  }
  if (pairs.empty()) {
    throw std::runtime_error(stream_name + ": no edges found");
  }
  const int m = node_count > 0 ? node_count : max_id + 1;
  if (max_id >= m) {
    std::ostringstream os;
    os << stream_name << ": node id " << max_id << " exceeds node count " << m;
    throw std::runtime_error(os.str());
  }
  Graph g(m);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    try {
      g.add_edge(pairs[i].first, pairs[i].second);
    } catch (const std::invalid_argument& e) {
      std::ostringstream os;
      os << stream_name << ": " << e.what();
      throw std::runtime_error(os.str());
    }
  }
  return g;
}

Graph load_edge_list(const std::string& path, int node_count) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("load_edge_list: cannot open " + path);
  }
  return parse_edge_list(in, path, node_count);
}

void save_edge_list(const Graph& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("save_edge_list: cannot open " + path);
  }
  out << "# " << g.node_count() << " nodes, " << g.edge_count() << " edges\n";
  for (const auto& [a, b] : g.edges()) {
    out << a << ' ' << b << '\n';
  }
  if (!out.good()) {
    throw std::runtime_error("save_edge_list: write failed for " + path);
  }
}

}  // namespace dssfn
