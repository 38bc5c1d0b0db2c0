#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace catgraph {

struct Edge {
  int u = 0;
  int v = 0;  // u < v

  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

// Undirected simple graph over P covariates, stored as a bitset over the
// P(P-1)/2 node pairs. The bitset doubles as a canonical key.
class Graph {
 public:
  Graph() = default;
  explicit Graph(int nodes);
  Graph(int nodes, const std::vector<Edge>& edges);

  int nodes() const { return nodes_; }
  std::size_t pair_count() const { return pair_count_; }
  std::size_t edge_count() const;
  bool complete() const { return edge_count() == pair_count_; }

  bool has_edge(int u, int v) const;
  void add_edge(int u, int v);
  void remove_edge(int u, int v);
  bool has_edge(Edge e) const { return has_edge(e.u, e.v); }
  void add_edge(Edge e) { add_edge(e.u, e.v); }
  void remove_edge(Edge e) { remove_edge(e.u, e.v); }

  // Sorted (u, v) order.
  std::vector<Edge> edges() const;
  std::vector<Edge> absent_edges() const;
  std::vector<int> neighbours(int u) const;
  int degree(int u) const;

  // Index of pair (u, v), u < v, in the lexicographic pair order.
  static std::size_t pair_index(int u, int v, int nodes);
  static Edge pair_at(std::size_t index, int nodes);

  const std::vector<std::uint64_t>& key() const { return bits_; }
  std::size_t hash() const;

  // Subgraph induced by the given nodes, renumbered in the given order.
  Graph induced(const std::vector<int>& keep) const;

  friend bool operator==(const Graph& a, const Graph& b) {
    return a.nodes_ == b.nodes_ && a.bits_ == b.bits_;
  }

 private:
  void check_pair(int u, int v) const;

  int nodes_ = 0;
  std::size_t pair_count_ = 0;
  std::vector<std::uint64_t> bits_;
};

struct GraphHash {
  std::size_t operator()(const Graph& g) const { return g.hash(); }
};

// Maximal cliques via Bron-Kerbosch with pivoting. Each clique is sorted and
// the list is in lexicographic order.
std::vector<std::vector<int>> maximal_cliques(const Graph& graph);

// Number of graphs on P nodes: 2^(P choose 2).
boost::multiprecision::cpp_int model_count(int P);

// Generator notation: maximal cliques as node letters joined by '+', larger
// cliques first, e.g. "ADE+AC+BC+BE+F". Nodes are A..Z (P <= 26); beyond
// that, 1-based indices joined by '.' inside each clique.
std::string format_model(const Graph& graph);
Graph parse_model(std::string_view text, int nodes);

}  // namespace catgraph
