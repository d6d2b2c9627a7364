#ifndef SELBIAS_RANDGRAPH_HPP_
#define SELBIAS_RANDGRAPH_HPP_

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "selbias/error.hpp"
#include "selbias/graph.hpp"

namespace selbias {

enum class ColliderGate { Triples, Nodes };

struct GraphSamplerParams {
  std::size_t p = 8;  // system variables; one extra node becomes the context
  double edge_prob = 0.15;
  std::size_t min_colliders = 3;
  std::size_t n_selection_parents = 1;
  std::size_t max_retries = 100'000;
  ColliderGate gate = ColliderGate::Triples;

  void validate() const {
    if (p < 2) fail(ErrorCode::InvalidArgument, "random graphs need p >= 2");
    if (!(edge_prob > 0.0 && edge_prob < 1.0)) fail(ErrorCode::InvalidArgument, "edge_prob must lie in (0, 1)");
    if (n_selection_parents < 1) fail(ErrorCode::InvalidArgument, "n_selection_parents must be >= 1");
    if (max_retries < 1) fail(ErrorCode::InvalidArgument, "max_retries must be >= 1");
  }
};

/// Defaults for the two benchmark sizes: p=8 (0.15, 3, 1) and p=16 (0.09, 5, 3).
inline GraphSamplerParams default_sampler_params(std::size_t p) {
  GraphSamplerParams params;
  params.p = p;
  if (p == 8) return params;
  if (p == 16) {
    params.edge_prob = 0.09;
    params.min_colliders = 5;
    params.n_selection_parents = 3;
    return params;
  }
  fail(ErrorCode::InvalidArgument, "no default sampler parameters for p=" + std::to_string(p));
}

/// Unordered collider triples a -> c <- b with a, b non-adjacent.
struct ColliderCount {
  std::size_t triples = 0;
  std::vector<int> nodes;  // distinct nodes hosting at least one triple
};

inline ColliderCount count_colliders(const Dmg& g) {
  ColliderCount out;
  const int n = static_cast<int>(g.size());
  for (int c = 0; c < n; ++c) {
    const auto& pa = g.parents(c);
    std::size_t here = 0;
    for (std::size_t i = 0; i < pa.size(); ++i)
      for (std::size_t j = i + 1; j < pa.size(); ++j)
        if (!g.adjacent(pa[i], pa[j])) ++here;
    out.triples += here;
    if (here > 0) out.nodes.push_back(c);
  }
  return out;
}

struct SampledGraph {
  Dmg graph;
  std::size_t attempts = 0;
  /// Directed edges among the p+1 non-selection nodes of the accepted draw.
  std::size_t edges = 0;
  /// Edge count of the very first draw, before any rejection.
  std::size_t first_draw_edges = 0;
  std::size_t collider_triples = 0;
  std::size_t collider_nodes = 0;
  std::size_t eligible_leaves = 0;
};

/// Random DAG over p+1 nodes, rejected until acyclic with enough colliders and
/// enough childless descendants of collider nodes; those leaves feed one
/// Selection node, and one source node becomes the Context. Names are C,
/// X1..Xp (by sampling order) and S.
inline SampledGraph sample_random_graph(const GraphSamplerParams& params, std::uint64_t seed) {
  params.validate();
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution edge(params.edge_prob);
  const int n = static_cast<int>(params.p + 1);
  SampledGraph out;
  for (std::size_t attempt = 1; attempt <= params.max_retries; ++attempt) {
    Dmg g;
    for (int v = 0; v < n; ++v) g.add_node("n" + std::to_string(v));
    std::size_t edges = 0;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        if (a != b && edge(rng)) {
          g.add_directed(a, b);
          ++edges;
        }
    if (attempt == 1) out.first_draw_edges = edges;
    if (!is_acyclic(g)) continue;
    const ColliderCount cc = count_colliders(g);
    const std::size_t gate = params.gate == ColliderGate::Triples ? cc.triples : cc.nodes.size();
    if (gate < params.min_colliders) continue;
    const NodeSet below = descendants(g, g.make_set(cc.nodes));
    std::vector<int> leaves;
    for (int v : to_indices(below))
      if (g.children(v).empty()) leaves.push_back(v);
    if (leaves.size() < params.n_selection_parents) continue;
    const std::size_t eligible = leaves.size();

    std::shuffle(leaves.begin(), leaves.end(), rng);
    leaves.resize(params.n_selection_parents);
    std::sort(leaves.begin(), leaves.end());
    std::vector<int> sources;
    for (int v = 0; v < n; ++v)
      if (g.parents(v).empty()) sources.push_back(v);
    const int context = sources[std::uniform_int_distribution<std::size_t>(0, sources.size() - 1)(rng)];

    Dmg result;
    std::vector<int> map(static_cast<std::size_t>(n));
    int next = 1;
    for (int v = 0; v < n; ++v)
      map[static_cast<std::size_t>(v)] =
          v == context ? result.add_node("C", NodeRole::Context) : result.add_node("X" + std::to_string(next++));
    const int s = result.add_node("S", NodeRole::Selection);
    for (int a = 0; a < n; ++a)
      for (int b : g.children(a)) result.add_directed(map[static_cast<std::size_t>(a)], map[static_cast<std::size_t>(b)]);
    for (int v : leaves) result.add_directed(map[static_cast<std::size_t>(v)], s);
    if (!validate_jci1(result)) continue;  // unreachable for sources; kept as a guard

    out.graph = std::move(result);
    out.attempts = attempt;
    out.edges = edges;
    out.collider_triples = cc.triples;
    out.collider_nodes = cc.nodes.size();
    out.eligible_leaves = eligible;
    return out;
  }
  fail(ErrorCode::RetryExhausted, "no admissible random graph after " + std::to_string(params.max_retries) + " draws");
}

/// Benchmark graph: C->X1, X1->S, X2->S, X3->X2, C->X5, X4->X5, X5->X6.
inline Dmg fixed_graph() {
  return parse_graph(
      "node C context\n"
      "node X1 system\nnode X2 system\nnode X3 system\nnode X4 system\nnode X5 system\nnode X6 system\n"
      "node S selection\n"
      "edge C -> X1\nedge X1 -> S\nedge X2 -> S\nedge X3 -> X2\n"
      "edge C -> X5\nedge X4 -> X5\nedge X5 -> X6\n");
}

}  // namespace selbias

#endif  // SELBIAS_RANDGRAPH_HPP_
