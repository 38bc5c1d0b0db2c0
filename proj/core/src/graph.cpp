#include "catgraph/graph.hpp"

#include <algorithm>
#include <bit>
#include <sstream>

#include "catgraph/error.hpp"

namespace catgraph {

Graph::Graph(int nodes) : nodes_(nodes) {
  if (nodes < 1) throw ConfigError("graph needs at least one node");
  pair_count_ = static_cast<std::size_t>(nodes) * static_cast<std::size_t>(nodes - 1) / 2;
  bits_.assign((pair_count_ + 63) / 64, 0);
}

Graph::Graph(int nodes, const std::vector<Edge>& edges) : Graph(nodes) {
  for (const auto& e : edges) {
    if (has_edge(e)) throw ConfigError("duplicate edge in graph");
    add_edge(e);
  }
}

void Graph::check_pair(int u, int v) const {
  if (u == v) throw ConfigError("self-loops are not allowed");
  if (u < 0 || v < 0 || u >= nodes_ || v >= nodes_) throw ConfigError("edge references an invalid node");
}

std::size_t Graph::pair_index(int u, int v, int nodes) {
  if (u > v) std::swap(u, v);
  const auto uu = static_cast<std::size_t>(u);
  const auto n = static_cast<std::size_t>(nodes);
  // Pairs before row u: sum_{r<u} (n-1-r) = u(2n-u-1)/2.
  return uu * (2 * n - uu - 1) / 2 + static_cast<std::size_t>(v - u - 1);
}

Edge Graph::pair_at(std::size_t index, int nodes) {
  int u = 0;
  std::size_t row = static_cast<std::size_t>(nodes - 1);
  while (index >= row) {
    index -= row;
    ++u;
    --row;
  }
  return {u, u + 1 + static_cast<int>(index)};
}

std::size_t Graph::edge_count() const {
  std::size_t c = 0;
  for (auto w : bits_) c += static_cast<std::size_t>(std::popcount(w));
  return c;
}

bool Graph::has_edge(int u, int v) const {
  check_pair(u, v);
  const auto i = pair_index(u, v, nodes_);
  return (bits_[i / 64] >> (i % 64)) & 1U;
}

void Graph::add_edge(int u, int v) {
  check_pair(u, v);
  const auto i = pair_index(u, v, nodes_);
  bits_[i / 64] |= std::uint64_t{1} << (i % 64);
}

void Graph::remove_edge(int u, int v) {
  check_pair(u, v);
  const auto i = pair_index(u, v, nodes_);
  bits_[i / 64] &= ~(std::uint64_t{1} << (i % 64));
}

std::vector<Edge> Graph::edges() const {
  std::vector<Edge> out;
  for (std::size_t i = 0; i < pair_count_; ++i)
    if ((bits_[i / 64] >> (i % 64)) & 1U) out.push_back(pair_at(i, nodes_));
  return out;
}

std::vector<Edge> Graph::absent_edges() const {
  std::vector<Edge> out;
  for (std::size_t i = 0; i < pair_count_; ++i)
    if (!((bits_[i / 64] >> (i % 64)) & 1U)) out.push_back(pair_at(i, nodes_));
  return out;
}

std::vector<int> Graph::neighbours(int u) const {
  std::vector<int> out;
  for (int v = 0; v < nodes_; ++v)
    if (v != u && has_edge(u, v)) out.push_back(v);
  return out;
}

int Graph::degree(int u) const { return static_cast<int>(neighbours(u).size()); }

std::size_t Graph::hash() const {
  std::size_t h = static_cast<std::size_t>(nodes_) * 0x9e3779b97f4a7c15ULL;
  for (auto w : bits_) h = (h ^ w) * 0x100000001b3ULL + (h >> 29);
  return h;
}

Graph Graph::induced(const std::vector<int>& keep) const {
  Graph g(static_cast<int>(keep.size()));
  for (std::size_t a = 0; a < keep.size(); ++a)
    for (std::size_t b = a + 1; b < keep.size(); ++b)
      if (has_edge(keep[a], keep[b])) g.add_edge(static_cast<int>(a), static_cast<int>(b));
  return g;
}

namespace {

void bron_kerbosch(const Graph& g, std::vector<int>& r, std::vector<int> p, std::vector<int> x,
                   std::vector<std::vector<int>>& out) {
  if (p.empty() && x.empty()) {
    auto clique = r;
    std::sort(clique.begin(), clique.end());
    out.push_back(std::move(clique));
    return;
  }
  // Pivot: the vertex of P u X with most neighbours in P.
  int pivot = -1;
  std::size_t best = 0;
  for (const auto* set : {&p, &x})
    for (int u : *set) {
      std::size_t c = 0;
      for (int v : p)
        if (v != u && g.has_edge(u, v)) ++c;
      if (pivot < 0 || c > best) {
        pivot = u;
        best = c;
      }
    }
  std::vector<int> candidates;
  for (int v : p)
    if (v == pivot || !g.has_edge(pivot, v)) candidates.push_back(v);

  for (int v : candidates) {
    std::vector<int> p2, x2;
    for (int w : p)
      if (w != v && g.has_edge(v, w)) p2.push_back(w);
    for (int w : x)
      if (w != v && g.has_edge(v, w)) x2.push_back(w);
    r.push_back(v);
    bron_kerbosch(g, r, std::move(p2), std::move(x2), out);
    r.pop_back();
    p.erase(std::find(p.begin(), p.end(), v));
    x.push_back(v);
  }
}

std::string node_label(int node, int nodes) {
  if (nodes <= 26) return std::string(1, static_cast<char>('A' + node));
  return std::to_string(node + 1);
}

}  // namespace

std::vector<std::vector<int>> maximal_cliques(const Graph& graph) {
  std::vector<std::vector<int>> out;
  std::vector<int> r;
  std::vector<int> p(static_cast<std::size_t>(graph.nodes()));
  for (int i = 0; i < graph.nodes(); ++i) p[static_cast<std::size_t>(i)] = i;
  bron_kerbosch(graph, r, std::move(p), {}, out);
  std::sort(out.begin(), out.end());
  return out;
}

boost::multiprecision::cpp_int model_count(int P) {
  if (P < 2) throw ConfigError("model_count requires P >= 2");
  const auto pairs = static_cast<unsigned>(P) * static_cast<unsigned>(P - 1) / 2;
  boost::multiprecision::cpp_int one = 1;
  return one << pairs;
}

std::string format_model(const Graph& graph) {
  auto cliques = maximal_cliques(graph);
  std::stable_sort(cliques.begin(), cliques.end(),
                   [](const auto& a, const auto& b) { return a.size() > b.size(); });
  const bool letters = graph.nodes() <= 26;
  std::string out;
  for (std::size_t k = 0; k < cliques.size(); ++k) {
    if (k) out += '+';
    for (std::size_t j = 0; j < cliques[k].size(); ++j) {
      if (!letters && j) out += '.';
      out += node_label(cliques[k][j], graph.nodes());
    }
  }
  return out;
}

Graph parse_model(std::string_view text, int nodes) {
  Graph g(nodes);
  const bool letters = nodes <= 26;
  std::vector<bool> seen(static_cast<std::size_t>(nodes), false);
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = std::min(text.find('+', start), text.size());
    const auto token = text.substr(start, end - start);
    std::vector<int> members;
    if (letters) {
      for (char ch : token) {
        if (ch == ' ') continue;
        const int node = ch - 'A';
        if (node < 0 || node >= nodes)
          throw ConfigError("model string references unknown node '" + std::string(1, ch) + "'");
        members.push_back(node);
      }
    } else {
      std::stringstream ss{std::string(token)};
      std::string part;
      while (std::getline(ss, part, '.')) {
        const int node = std::stoi(part) - 1;
        if (node < 0 || node >= nodes) throw ConfigError("model string references unknown node");
        members.push_back(node);
      }
    }
    if (members.empty()) throw ConfigError("empty generator in model string");
    for (std::size_t a = 0; a < members.size(); ++a) {
      seen[static_cast<std::size_t>(members[a])] = true;
      for (std::size_t b = a + 1; b < members.size(); ++b) {
        if (members[a] == members[b]) throw ConfigError("repeated node inside a generator");
        g.add_edge(members[a], members[b]);
      }
    }
    if (end == text.size()) break;
    start = end + 1;
  }
  return g;
}

}  // namespace catgraph
