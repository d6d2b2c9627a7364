#ifndef SELBIAS_GRAPH_HPP_
#define SELBIAS_GRAPH_HPP_

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <boost/dynamic_bitset.hpp>

#include "selbias/error.hpp"

namespace selbias {

enum class NodeRole { System, Context, Selection };

inline std::string_view to_string(NodeRole role) {
  switch (role) {
    case NodeRole::System: return "system";
    case NodeRole::Context: return "context";
    case NodeRole::Selection: return "selection";
  }
  return "system";
}

inline NodeRole parse_role(std::string_view s) {
  if (s == "system") return NodeRole::System;
  if (s == "context") return NodeRole::Context;
  if (s == "selection") return NodeRole::Selection;
  fail(ErrorCode::Format, "unknown node role '" + std::string(s) + "'");
}

using NodeSet = boost::dynamic_bitset<>;

inline std::vector<int> to_indices(const NodeSet& s) {
  std::vector<int> out;
  out.reserve(s.count());
  for (auto i = s.find_first(); i != NodeSet::npos; i = s.find_next(i)) out.push_back(static_cast<int>(i));
  return out;
}

/// Directed mixed graph with per-node roles.
///
/// Each unordered pair carries an independent subset of {a->b, b->a, a<->b}.
/// Self-loops are rejected. Node ids are unique strings; algorithms address
/// nodes by their insertion index.
class Dmg {
 public:
  static constexpr std::uint8_t kDirected = 1;    // marks_[a][b]: a -> b
  static constexpr std::uint8_t kBidirected = 2;  // symmetric

  Dmg() = default;

  int add_node(std::string id, NodeRole role = NodeRole::System) {
    if (index_.count(id)) fail(ErrorCode::InvalidArgument, "duplicate node id '" + id + "'");
    const int v = static_cast<int>(ids_.size());
    index_.emplace(id, v);
    ids_.push_back(std::move(id));
    roles_.push_back(role);
    const std::size_t n = ids_.size();
    std::vector<std::uint8_t> grown(n * n, 0);
    for (std::size_t a = 0; a + 1 < n; ++a)
      for (std::size_t b = 0; b + 1 < n; ++b) grown[a * n + b] = marks_[a * (n - 1) + b];
    marks_ = std::move(grown);
    parents_.emplace_back();
    children_.emplace_back();
    spouses_.emplace_back();
    return v;
  }

  void add_directed(int from, int to) {
    check_pair(from, to);
    auto& m = marks_[at(from, to)];
    if (m & kDirected) return;
    m |= kDirected;
    children_[from].push_back(to);
    parents_[to].push_back(from);
  }

  void add_bidirected(int a, int b) {
    check_pair(a, b);
    if (marks_[at(a, b)] & kBidirected) return;
    marks_[at(a, b)] |= kBidirected;
    marks_[at(b, a)] |= kBidirected;
    spouses_[a].push_back(b);
    spouses_[b].push_back(a);
  }

  void add_directed(std::string_view from, std::string_view to) { add_directed(index_of(from), index_of(to)); }
  void add_bidirected(std::string_view a, std::string_view b) { add_bidirected(index_of(a), index_of(b)); }

  std::size_t size() const { return ids_.size(); }
  const std::string& id(int v) const { return ids_.at(static_cast<std::size_t>(v)); }
  NodeRole role(int v) const { return roles_.at(static_cast<std::size_t>(v)); }
  void set_role(int v, NodeRole r) { roles_.at(static_cast<std::size_t>(v)) = r; }

  bool contains(std::string_view id) const { return index_.count(std::string(id)) > 0; }

  int index_of(std::string_view id) const {
    auto it = index_.find(std::string(id));
    if (it == index_.end()) fail(ErrorCode::UnknownNode, "unknown node id '" + std::string(id) + "'");
    return it->second;
  }

  bool has_directed(int a, int b) const { return marks_[at(a, b)] & kDirected; }
  bool has_bidirected(int a, int b) const { return marks_[at(a, b)] & kBidirected; }
  bool adjacent(int a, int b) const {
    return a != b && (marks_[at(a, b)] != 0 || (marks_[at(b, a)] & kDirected));
  }

  const std::vector<int>& parents(int v) const { return parents_.at(static_cast<std::size_t>(v)); }
  const std::vector<int>& children(int v) const { return children_.at(static_cast<std::size_t>(v)); }
  const std::vector<int>& spouses(int v) const { return spouses_.at(static_cast<std::size_t>(v)); }

  std::size_t num_directed_edges() const {
    std::size_t k = 0;
    for (const auto& c : children_) k += c.size();
    return k;
  }
  std::size_t num_bidirected_edges() const {
    std::size_t k = 0;
    for (const auto& s : spouses_) k += s.size();
    return k / 2;
  }

  NodeSet empty_set() const { return NodeSet(size()); }

  NodeSet make_set(std::initializer_list<std::string_view> ids) const {
    NodeSet s(size());
    for (auto id : ids) s.set(static_cast<std::size_t>(index_of(id)));
    return s;
  }

  NodeSet make_set(const std::vector<int>& idx) const {
    NodeSet s(size());
    for (int v : idx) {
      check_node(v);
      s.set(static_cast<std::size_t>(v));
    }
    return s;
  }

  NodeSet nodes_with_role(NodeRole r) const {
    NodeSet s(size());
    for (std::size_t v = 0; v < size(); ++v)
      if (roles_[v] == r) s.set(v);
    return s;
  }

  void check_node(int v) const {
    if (v < 0 || static_cast<std::size_t>(v) >= size())
      fail(ErrorCode::UnknownNode, "node index " + std::to_string(v) + " out of range");
  }

  void check_set(const NodeSet& s) const {
    if (s.size() != size()) fail(ErrorCode::InvalidArgument, "node set sized for a different graph");
  }

  friend bool operator==(const Dmg& a, const Dmg& b) {
    return a.ids_ == b.ids_ && a.roles_ == b.roles_ && a.marks_ == b.marks_;
  }

 private:
  std::size_t at(int a, int b) const { return static_cast<std::size_t>(a) * size() + static_cast<std::size_t>(b); }

  void check_pair(int a, int b) const {
    check_node(a);
    check_node(b);
    if (a == b) fail(ErrorCode::InvalidArgument, "self-loop on node '" + ids_[static_cast<std::size_t>(a)] + "'");
  }

  std::vector<std::string> ids_;
  std::vector<NodeRole> roles_;
  std::unordered_map<std::string, int> index_;
  std::vector<std::uint8_t> marks_;
  std::vector<std::vector<int>> parents_, children_, spouses_;
};

namespace detail {

template <typename Next>
NodeSet closure(const Dmg& g, const NodeSet& seed, Next&& next) {
  g.check_set(seed);
  NodeSet seen = seed;
  std::vector<int> stack = to_indices(seed);
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    for (int u : next(v)) {
      if (!seen.test(static_cast<std::size_t>(u))) {
        seen.set(static_cast<std::size_t>(u));
        stack.push_back(u);
      }
    }
  }
  return seen;
}

}  // namespace detail

/// Reflexive ancestors: x is in ancestors(g, {x}).
inline NodeSet ancestors(const Dmg& g, const NodeSet& x) {
  return detail::closure(g, x, [&](int v) -> const std::vector<int>& { return g.parents(v); });
}

inline NodeSet descendants(const Dmg& g, const NodeSet& x) {
  return detail::closure(g, x, [&](int v) -> const std::vector<int>& { return g.children(v); });
}

inline NodeSet ancestors(const Dmg& g, int v) {
  g.check_node(v);
  NodeSet s(g.size());
  s.set(static_cast<std::size_t>(v));
  return ancestors(g, s);
}

inline NodeSet descendants(const Dmg& g, int v) {
  g.check_node(v);
  NodeSet s(g.size());
  s.set(static_cast<std::size_t>(v));
  return descendants(g, s);
}

/// True iff a is an ancestor of b (reflexive).
inline bool is_ancestor(const Dmg& g, int a, int b) { return ancestors(g, b).test(static_cast<std::size_t>(a)); }

inline NodeSet strongly_connected_component(const Dmg& g, int v) { return ancestors(g, v) & descendants(g, v); }

/// Component label per node (Tarjan). Labels are arbitrary but equal within a component.
inline std::vector<int> scc_labels(const Dmg& g) {
  const int n = static_cast<int>(g.size());
  std::vector<int> index(n, -1), low(n, 0), label(n, -1), stack;
  std::vector<char> on_stack(n, 0);
  int counter = 0, next_label = 0;
  // Iterative Tarjan: frame = (node, next child position).
  std::vector<std::pair<int, std::size_t>> frames;
  for (int root = 0; root < n; ++root) {
    if (index[root] >= 0) continue;
    frames.emplace_back(root, 0);
    index[root] = low[root] = counter++;
    stack.push_back(root);
    on_stack[root] = 1;
    while (!frames.empty()) {
      auto& [v, pos] = frames.back();
      const auto& ch = g.children(v);
      if (pos < ch.size()) {
        const int w = ch[pos++];
        if (index[w] < 0) {
          index[w] = low[w] = counter++;
          stack.push_back(w);
          on_stack[w] = 1;
          frames.emplace_back(w, 0);
        } else if (on_stack[w]) {
          low[v] = std::min(low[v], index[w]);
        }
        continue;
      }
      if (low[v] == index[v]) {
        int w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = 0;
          label[w] = next_label;
        } while (w != v);
        ++next_label;
      }
      const int done = v;
      frames.pop_back();
      if (!frames.empty()) {
        int parent = frames.back().first;
        low[parent] = std::min(low[parent], low[done]);
      }
    }
  }
  return label;
}

inline bool is_acyclic(const Dmg& g) {
  const auto labels = scc_labels(g);
  std::vector<int> count(g.size(), 0);
  for (int l : labels)
    if (++count[static_cast<std::size_t>(l)] > 1) return false;
  return true;
}

/// Kahn ordering; throws Cyclic when no topological order exists.
inline std::vector<int> topological_order(const Dmg& g) {
  const std::size_t n = g.size();
  std::vector<int> indeg(n, 0), order;
  order.reserve(n);
  for (std::size_t v = 0; v < n; ++v) indeg[v] = static_cast<int>(g.parents(static_cast<int>(v)).size());
  std::vector<int> ready;
  for (std::size_t v = n; v-- > 0;)
    if (indeg[v] == 0) ready.push_back(static_cast<int>(v));
  while (!ready.empty()) {
    const int v = ready.back();
    ready.pop_back();
    order.push_back(v);
    std::vector<int> freed;
    for (int c : g.children(v))
      if (--indeg[static_cast<std::size_t>(c)] == 0) freed.push_back(c);
    std::sort(freed.rbegin(), freed.rend());
    ready.insert(ready.end(), freed.begin(), freed.end());
    std::sort(ready.rbegin(), ready.rend());
  }
  if (order.size() != n) fail(ErrorCode::Cyclic, "graph contains a directed cycle");
  return order;
}

/// Marginalizes the graph onto `keep`.
///
/// a -> b survives iff a directed path a -> ... -> b runs through dropped
/// nodes only; a <-> b iff some path between them has only dropped
/// non-collider interior nodes and arrowheads at both a and b.
inline Dmg latent_projection(const Dmg& g, const NodeSet& keep) {
  g.check_set(keep);
  const int n = static_cast<int>(g.size());
  // hidden_anc[a]: dropped nodes with a directed path into a through dropped nodes only.
  std::vector<NodeSet> hidden_anc(static_cast<std::size_t>(n), NodeSet(g.size()));
  std::vector<NodeSet> direct_src(static_cast<std::size_t>(n), NodeSet(g.size()));
  const auto kept = to_indices(keep);
  for (int a : kept) {
    auto& h = hidden_anc[static_cast<std::size_t>(a)];
    auto& src = direct_src[static_cast<std::size_t>(a)];
    std::vector<int> stack{a};
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      for (int u : g.parents(v)) {
        if (keep.test(static_cast<std::size_t>(u))) {
          src.set(static_cast<std::size_t>(u));
        } else if (!h.test(static_cast<std::size_t>(u))) {
          h.set(static_cast<std::size_t>(u));
          stack.push_back(u);
        }
      }
    }
  }

  Dmg out;
  std::vector<int> map(static_cast<std::size_t>(n), -1);
  for (int a : kept) map[static_cast<std::size_t>(a)] = out.add_node(g.id(a), g.role(a));

  for (int b : kept)
    for (int a : to_indices(direct_src[static_cast<std::size_t>(b)]))
      if (a != b) out.add_directed(map[static_cast<std::size_t>(a)], map[static_cast<std::size_t>(b)]);

  for (std::size_t i = 0; i < kept.size(); ++i) {
    for (std::size_t j = i + 1; j < kept.size(); ++j) {
      const int a = kept[i], b = kept[j];
      NodeSet heads_a = hidden_anc[static_cast<std::size_t>(a)];
      NodeSet heads_b = hidden_anc[static_cast<std::size_t>(b)];
      bool conf = (heads_a & heads_b).any();
      heads_a.set(static_cast<std::size_t>(a));
      heads_b.set(static_cast<std::size_t>(b));
      for (auto u = heads_a.find_first(); !conf && u != NodeSet::npos; u = heads_a.find_next(u))
        for (int s : g.spouses(static_cast<int>(u)))
          if (heads_b.test(static_cast<std::size_t>(s))) {
            conf = true;
            break;
          }
      if (conf) out.add_bidirected(map[static_cast<std::size_t>(a)], map[static_cast<std::size_t>(b)]);
    }
  }
  return out;
}

/// True iff no System or Selection node is an ancestor of a Context node.
inline bool validate_jci1(const Dmg& g) {
  const NodeSet ctx = g.nodes_with_role(NodeRole::Context);
  if (ctx.none()) return true;
  const NodeSet an = ancestors(g, ctx);
  return (an & ~ctx).none();
}

// ---------------------------------------------------------------------------
// Text format:
//   node <id> <system|context|selection>
//   edge <a> -> <b>
//   edge <a> <-> <b>
// '#' starts a comment. Lines may appear in any order.

inline Dmg parse_graph(std::istream& in) {
  struct PendingEdge {
    std::string a, op, b;
    int line;
  };
  Dmg g;
  std::vector<PendingEdge> edges;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string kw;
    if (!(ls >> kw)) continue;
    const std::string where = "line " + std::to_string(lineno) + ": ";
    if (kw == "node") {
      std::string id, role, extra;
      if (!(ls >> id >> role) || (ls >> extra)) fail(ErrorCode::Format, where + "expected 'node <id> <role>'");
      try {
        g.add_node(id, parse_role(role));
      } catch (const Error& e) {
        fail(ErrorCode::Format, where + e.what());
      }
    } else if (kw == "edge") {
      PendingEdge e{{}, {}, {}, lineno};
      std::string extra;
      if (!(ls >> e.a >> e.op >> e.b) || (ls >> extra) || (e.op != "->" && e.op != "<->"))
        fail(ErrorCode::Format, where + "expected 'edge <a> -> <b>' or 'edge <a> <-> <b>'");
      edges.push_back(std::move(e));
    } else {
      fail(ErrorCode::Format, where + "unknown keyword '" + kw + "'");
    }
  }
  for (const auto& e : edges) {
    const std::string where = "line " + std::to_string(e.line) + ": ";
    if (!g.contains(e.a) || !g.contains(e.b))
      fail(ErrorCode::Format, where + "edge references undeclared node");
    if (e.a == e.b) fail(ErrorCode::Format, where + "self-loop");
    if (e.op == "->")
      g.add_directed(e.a, e.b);
    else
      g.add_bidirected(e.a, e.b);
  }
  return g;
}

inline Dmg parse_graph(const std::string& text) {
  std::istringstream in(text);
  return parse_graph(in);
}

inline Dmg read_graph_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open graph file '" + path + "'");
  return parse_graph(in);
}

inline std::string format_graph(const Dmg& g) {
  std::ostringstream out;
  for (std::size_t v = 0; v < g.size(); ++v)
    out << "node " << g.id(static_cast<int>(v)) << ' ' << to_string(g.role(static_cast<int>(v))) << '\n';
  for (std::size_t a = 0; a < g.size(); ++a)
    for (std::size_t b = 0; b < g.size(); ++b)
      if (a != b && g.has_directed(static_cast<int>(a), static_cast<int>(b)))
        out << "edge " << g.id(static_cast<int>(a)) << " -> " << g.id(static_cast<int>(b)) << '\n';
  for (std::size_t a = 0; a < g.size(); ++a)
    for (std::size_t b = a + 1; b < g.size(); ++b)
      if (g.has_bidirected(static_cast<int>(a), static_cast<int>(b)))
        out << "edge " << g.id(static_cast<int>(a)) << " <-> " << g.id(static_cast<int>(b)) << '\n';
  return out.str();
}

}  // namespace selbias

#endif  // SELBIAS_GRAPH_HPP_
