#ifndef SELBIAS_ENUMERATE_HPP_
#define SELBIAS_ENUMERATE_HPP_

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "selbias/graph.hpp"
#include "selbias/parallel.hpp"
#include "selbias/patterns.hpp"
#include "selbias/separation.hpp"

namespace selbias {

/// Edge state of an unordered pair (a, b) with a < b: bit 0 is a -> b,
/// bit 1 is b -> a, bit 2 is a <-> b.
inline constexpr int kForward = 1, kBackward = 2, kBidirected = 4, kEdgeStates = 8;

inline void apply_edge_state(Dmg& g, int a, int b, int state) {
  if (state & kForward) g.add_directed(a, b);
  if (state & kBackward) g.add_directed(b, a);
  if (state & kBidirected) g.add_bidirected(a, b);
}

inline int edge_state(const Dmg& g, int a, int b) {
  return (g.has_directed(a, b) ? kForward : 0) | (g.has_directed(b, a) ? kBackward : 0) | (g.has_bidirected(a, b) ? kBidirected : 0);
}

struct EnumerationSpec {
  std::vector<std::pair<std::string, NodeRole>> observables;
  std::size_t n_selection = 0;
  bool jci = true;
  /// Restrict Selection nodes to have no children.
  bool selection_sinks = false;

  static constexpr std::size_t kMaxNodes = 5;

  std::size_t num_nodes() const { return observables.size() + n_selection; }
  std::size_t num_pairs() const { return num_nodes() * (num_nodes() - 1) / 2; }
  std::uint64_t num_codes() const {
    std::uint64_t c = 1;
    for (std::size_t i = 0; i < num_pairs(); ++i) c *= kEdgeStates;
    return c;
  }

  void validate() const {
    if (num_nodes() > kMaxNodes) fail(ErrorCode::InvalidArgument, "enumeration is limited to 5 nodes");
    for (const auto& [id, role] : observables)
      if (role == NodeRole::Selection) fail(ErrorCode::InvalidArgument, "observables cannot be Selection nodes");
  }

  Dmg skeleton() const {
    Dmg g;
    for (const auto& [id, role] : observables) g.add_node(id, role);
    for (std::size_t s = 0; s < n_selection; ++s)
      g.add_node(n_selection == 1 ? "S" : "S" + std::to_string(s + 1), NodeRole::Selection);
    return g;
  }
};

/// Pair order: (0,1), (0,2), ..., (1,2), ...; pair k holds base-8 digit k of the code.
inline Dmg decode_dmg(const EnumerationSpec& spec, const Dmg& skeleton, std::uint64_t code) {
  Dmg g = skeleton;
  const int n = static_cast<int>(spec.num_nodes());
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) {
      apply_edge_state(g, a, b, static_cast<int>(code % kEdgeStates));
      code /= kEdgeStates;
    }
  return g;
}

inline std::uint64_t encode_dmg(const Dmg& g) {
  const int n = static_cast<int>(g.size());
  std::uint64_t code = 0, scale = 1;
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) {
      code += scale * static_cast<std::uint64_t>(edge_state(g, a, b));
      scale *= kEdgeStates;
    }
  return code;
}

inline bool passes_filters(const EnumerationSpec& spec, const Dmg& g) {
  if (spec.selection_sinks)
    for (int s : to_indices(g.nodes_with_role(NodeRole::Selection)))
      if (!g.children(s).empty()) return false;
  return !spec.jci || validate_jci1(g);
}

/// Calls fn(code, graph) for every filtered graph with code in [begin, end).
inline std::size_t for_each_dmg(const EnumerationSpec& spec, std::uint64_t begin, std::uint64_t end,
                                const std::function<void(std::uint64_t, const Dmg&)>& fn) {
  spec.validate();
  const Dmg skel = spec.skeleton();
  std::size_t kept = 0;
  for (std::uint64_t code = begin; code < end; ++code) {
    const Dmg g = decode_dmg(spec, skel, code);
    if (!passes_filters(spec, g)) continue;
    ++kept;
    fn(code, g);
  }
  return kept;
}

inline std::size_t for_each_dmg(const EnumerationSpec& spec, const std::function<void(std::uint64_t, const Dmg&)>& fn) {
  return for_each_dmg(spec, 0, spec.num_codes(), fn);
}

/// Oracle verdicts over every observable query (X, Y, Z), X < Y, Z a subset
/// of the remaining observables in ascending mask order; '1' = independent.
/// Selection nodes are always conditioned on.
inline std::string independence_signature(const Dmg& g, const std::vector<int>& observables) {
  const detail::SeparationEngine engine(g);
  const NodeSet sel = g.nodes_with_role(NodeRole::Selection);
  std::string sig;
  const std::size_t k = observables.size();
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j) {
      std::vector<int> rest;
      for (std::size_t r = 0; r < k; ++r)
        if (r != i && r != j) rest.push_back(observables[r]);
      for (std::uint32_t mask = 0; mask < (1u << rest.size()); ++mask) {
        NodeSet a(g.size()), b(g.size()), c = sel;
        a.set(static_cast<std::size_t>(observables[i]));
        b.set(static_cast<std::size_t>(observables[j]));
        for (std::size_t r = 0; r < rest.size(); ++r)
          if (mask >> r & 1u) c.set(static_cast<std::size_t>(rest[r]));
        sig.push_back(engine.separated(a, b, c, true) ? '1' : '0');
      }
    }
  return sig;
}

// ---------------------------------------------------------------------------
// Three-variable impossibility check over {C, X, Y} plus Selection nodes.

struct SignatureBucket {
  std::string signature;
  std::size_t graph_count = 0;
  /// Members where some Selection node has at least one edge.
  std::size_t selection_active = 0;
  std::size_t x_anc_y = 0;
  std::size_t y_anc_x = 0;
  std::uint64_t example_code = 0;

  bool forces_x_anc_y() const { return graph_count > 0 && x_anc_y == graph_count; }
  bool forces_y_anc_x() const { return graph_count > 0 && y_anc_x == graph_count; }
  bool forces_claim() const { return forces_x_anc_y() || forces_y_anc_x(); }
  bool forces_absence() const { return x_anc_y == 0 || y_anc_x == 0; }
};

struct ThreeVarReport {
  std::size_t n_selection = 0;
  bool jci = true;
  bool selection_sinks = false;
  std::uint64_t raw_graphs = 0;
  std::size_t filtered_graphs = 0;
  std::vector<SignatureBucket> buckets;  // sorted by signature
  /// Buckets containing a selection-active graph that force a presence claim.
  std::size_t forcing_selection_buckets = 0;
  /// Buckets (any) that force a presence claim.
  std::size_t forcing_buckets = 0;
  /// Buckets whose signature satisfies the LCD constraints on <C,X,Y>.
  std::vector<std::string> lcd_signatures;
  bool lcd_forces_x_anc_y = false;

  /// No selection-active bucket forces a system ancestral claim.
  bool no_sound_rule() const { return forcing_selection_buckets == 0; }
};

namespace detail {

// Signature positions for observables {C, X, Y} in that order:
// pair (C,X): Z = {}, {Y}; pair (C,Y): {}, {X}; pair (X,Y): {}, {C}.
inline bool lcd_signature(const std::string& sig) {
  const bool cx = sig[0] == '1', cy = sig[2] == '1', cy_x = sig[3] == '1', xy = sig[4] == '1';
  return !cx && !cy && !xy && cy_x;
}

}  // namespace detail

inline ThreeVarReport verify_no_sound_3var_rule(std::size_t n_selection = 1, bool jci = true, bool selection_sinks = false,
                                                std::size_t threads = 0) {
  EnumerationSpec spec;
  spec.observables = {{"C", NodeRole::Context}, {"X", NodeRole::System}, {"Y", NodeRole::System}};
  spec.n_selection = n_selection;
  spec.jci = jci;
  spec.selection_sinks = selection_sinks;
  spec.validate();

  ThreeVarReport rep;
  rep.n_selection = n_selection;
  rep.jci = jci;
  rep.selection_sinks = selection_sinks;
  rep.raw_graphs = spec.num_codes();

  // Chunks over the leading code range, merged in chunk order.
  const std::uint64_t chunks = std::min<std::uint64_t>(64, rep.raw_graphs);
  std::vector<std::map<std::string, SignatureBucket>> partial(chunks);
  std::vector<std::size_t> kept(chunks, 0);
  const std::vector<int> obs{0, 1, 2};
  parallel_for(
      chunks,
      [&](std::size_t c) {
        const std::uint64_t begin = rep.raw_graphs * c / chunks, end = rep.raw_graphs * (c + 1) / chunks;
        kept[c] = for_each_dmg(spec, begin, end, [&](std::uint64_t code, const Dmg& g) {
          const std::string sig = independence_signature(g, obs);
          auto [it, fresh] = partial[c].try_emplace(sig);
          SignatureBucket& b = it->second;
          if (fresh) {
            b.signature = sig;
            b.example_code = code;
          }
          ++b.graph_count;
          bool active = false;
          for (int s : to_indices(g.nodes_with_role(NodeRole::Selection)))
            for (int v = 0; v < static_cast<int>(g.size()); ++v)
              if (v != s && g.adjacent(s, v)) active = true;
          if (active) ++b.selection_active;
          if (is_ancestor(g, 1, 2)) ++b.x_anc_y;
          if (is_ancestor(g, 2, 1)) ++b.y_anc_x;
        });
      },
      threads);

  std::map<std::string, SignatureBucket> merged;
  for (std::size_t c = 0; c < chunks; ++c) {
    rep.filtered_graphs += kept[c];
    for (auto& [sig, b] : partial[c]) {
      auto [it, fresh] = merged.try_emplace(sig, b);
      if (fresh) continue;
      SignatureBucket& m = it->second;
      m.graph_count += b.graph_count;
      m.selection_active += b.selection_active;
      m.x_anc_y += b.x_anc_y;
      m.y_anc_x += b.y_anc_x;
    }
  }
  rep.lcd_forces_x_anc_y = true;
  for (auto& [sig, b] : merged) {
    if (b.forces_claim()) {
      ++rep.forcing_buckets;
      if (b.selection_active > 0) ++rep.forcing_selection_buckets;
    }
    if (detail::lcd_signature(sig)) {
      rep.lcd_signatures.push_back(sig);
      if (!b.forces_x_anc_y()) rep.lcd_forces_x_anc_y = false;
    }
    rep.buckets.push_back(std::move(b));
  }
  if (rep.lcd_signatures.empty()) rep.lcd_forces_x_anc_y = false;
  return rep;
}

inline nlohmann::json to_json(const ThreeVarReport& r) {
  nlohmann::json j;
  j["observables"] = {"C", "X", "Y"};
  j["signature_order"] = {"C,X|", "C,X|Y", "C,Y|", "C,Y|X", "X,Y|", "X,Y|C"};
  j["n_selection"] = r.n_selection;
  j["jci"] = r.jci;
  j["selection_sinks"] = r.selection_sinks;
  j["raw_graphs"] = r.raw_graphs;
  j["filtered_graphs"] = r.filtered_graphs;
  j["forcing_buckets"] = r.forcing_buckets;
  j["forcing_selection_buckets"] = r.forcing_selection_buckets;
  j["no_sound_rule"] = r.no_sound_rule();
  j["lcd_signatures"] = r.lcd_signatures;
  j["lcd_forces_x_anc_y"] = r.lcd_forces_x_anc_y;
  j["buckets"] = nlohmann::json::object();
  for (const auto& b : r.buckets) {
    nlohmann::json forced = nlohmann::json::array();
    if (b.forces_x_anc_y()) forced.push_back("X in an(Y)");
    if (b.forces_y_anc_x()) forced.push_back("Y in an(X)");
    j["buckets"][b.signature] = {{"graph_count", b.graph_count},
                                 {"selection_active", b.selection_active},
                                 {"x_anc_y", b.x_anc_y},
                                 {"y_anc_x", b.y_anc_x},
                                 {"forced_claims", forced},
                                 {"example_code", b.example_code}};
  }
  return j;
}

// ---------------------------------------------------------------------------
// Randomized check of the Extended Y-Structure conclusions.

struct YStConclusions {
  bool x_anc_y = false;
  bool y_not_anc_x = false;
  bool x_not_anc_s = false;
  bool unconfounded = false;
  bool all() const { return x_anc_y && y_not_anc_x && x_not_anc_s && unconfounded; }
};

/// Conclusions for claim X in an(Y) on graph g; S is every Selection node.
/// Unconfoundedness is read on the projection onto {V, W, X, Y} and S.
inline YStConclusions ystructure_conclusions(const Dmg& g, const std::string& v, const std::string& w, const std::string& x,
                                            const std::string& y) {
  const int xi = g.index_of(x), yi = g.index_of(y);
  const NodeSet sel = g.nodes_with_role(NodeRole::Selection);
  YStConclusions c;
  c.x_anc_y = is_ancestor(g, xi, yi);
  c.y_not_anc_x = !is_ancestor(g, yi, xi);
  c.x_not_anc_s = sel.none() || !ancestors(g, sel).test(static_cast<std::size_t>(xi));
  NodeSet keep = sel;
  for (const auto* id : {&v, &w, &x, &y}) keep.set(static_cast<std::size_t>(g.index_of(*id)));
  const Dmg proj = latent_projection(g, keep);
  c.unconfounded = !proj.has_bidirected(proj.index_of(x), proj.index_of(y));
  return c;
}

struct YStCounterexample {
  std::string graph;
  std::vector<std::string> tuple;
  YStConclusions conclusions;
};

struct YStVerificationReport {
  std::size_t graphs = 0;
  std::size_t cyclic_graphs = 0;
  std::size_t graphs_with_hits = 0;
  std::size_t hits = 0;
  std::size_t counterexamples = 0;
  std::vector<YStCounterexample> examples;
  bool passed() const { return counterexamples == 0; }
};

/// Checks every oracle Extended Y-Structure hit of g against its conclusions.
inline void check_ystructures_on(const Dmg& g, YStVerificationReport& rep, std::size_t max_examples = 8) {
  const GraphOracle oracle(g);
  const auto hits = find_y_structures(oracle, true);
  ++rep.graphs;
  if (!is_acyclic(g)) ++rep.cyclic_graphs;
  if (!hits.empty()) ++rep.graphs_with_hits;
  for (const auto& h : hits) {
    ++rep.hits;
    const auto c = ystructure_conclusions(g, h.names[0], h.names[1], h.names[2], h.names[3]);
    if (!c.all()) {
      ++rep.counterexamples;
      if (rep.examples.size() < max_examples) rep.examples.push_back({format_graph(g), h.names, c});
    }
  }
}

struct YStSamplerOptions {
  std::size_t min_observables = 4;
  std::size_t max_observables = 6;
  std::size_t max_selection = 2;
  bool allow_cycles = true;
  /// Fraction of graphs whose pair states follow `sparse_weights` instead of
  /// the uniform distribution over all 8 states. Uniform graphs are dense and
  /// almost never contain the pattern, so a sparse share keeps hits frequent.
  double sparse_fraction = 0.5;
  std::array<double, kEdgeStates> sparse_weights{0.70, 0.12, 0.12, 0.005, 0.04, 0.005, 0.005, 0.005};
};

/// Random DMG over V, W, X, Y (plus extra observables U1, U2, ...) and up to
/// max_selection Selection nodes. Redrawn until acyclic when cycles are disallowed.
inline Dmg sample_ystructure_graph(std::mt19937_64& rng, const YStSamplerOptions& opt) {
  std::uniform_int_distribution<std::size_t> n_obs(opt.min_observables, opt.max_observables);
  std::uniform_int_distribution<std::size_t> n_sel(0, opt.max_selection);
  std::uniform_int_distribution<int> uniform_state(0, kEdgeStates - 1);
  std::discrete_distribution<int> sparse_state(opt.sparse_weights.begin(), opt.sparse_weights.end());
  std::bernoulli_distribution use_sparse(opt.sparse_fraction);
  const std::size_t k = n_obs(rng), s = n_sel(rng);
  const bool sparse = use_sparse(rng);
  static const char* const kNames[] = {"V", "W", "X", "Y"};
  for (;;) {
    Dmg g;
    for (std::size_t i = 0; i < k; ++i) g.add_node(i < 4 ? kNames[i] : "U" + std::to_string(i - 3));
    for (std::size_t i = 0; i < s; ++i) g.add_node("S" + std::to_string(i + 1), NodeRole::Selection);
    const int n = static_cast<int>(g.size());
    for (int a = 0; a < n; ++a)
      for (int b = a + 1; b < n; ++b) apply_edge_state(g, a, b, sparse ? sparse_state(rng) : uniform_state(rng));
    if (opt.allow_cycles || is_acyclic(g)) return g;
  }
}

inline YStVerificationReport verify_extended_ystructure(std::size_t n_graphs, std::uint64_t seed, const YStSamplerOptions& opt = {},
                                                        std::size_t threads = 0) {
  if (opt.min_observables < 4 || opt.min_observables > opt.max_observables)
    fail(ErrorCode::InvalidArgument, "Y-Structure checks need 4 <= min_observables <= max_observables");
  // Fixed-size blocks with their own seeds keep results independent of threads.
  const std::size_t block = 256;
  const std::size_t blocks = (n_graphs + block - 1) / block;
  std::vector<YStVerificationReport> parts(blocks);
  parallel_for(
      blocks,
      [&](std::size_t b) {
        std::mt19937_64 rng(derive_seed(seed, b));
        const std::size_t count = std::min(block, n_graphs - b * block);
        for (std::size_t i = 0; i < count; ++i) check_ystructures_on(sample_ystructure_graph(rng, opt), parts[b]);
      },
      threads);
  YStVerificationReport rep;
  for (auto& p : parts) {
    rep.graphs += p.graphs;
    rep.cyclic_graphs += p.cyclic_graphs;
    rep.graphs_with_hits += p.graphs_with_hits;
    rep.hits += p.hits;
    rep.counterexamples += p.counterexamples;
    for (auto& e : p.examples)
      if (rep.examples.size() < 8) rep.examples.push_back(std::move(e));
  }
  return rep;
}

inline nlohmann::json to_json(const YStVerificationReport& r) {
  nlohmann::json j;
  j["graphs"] = r.graphs;
  j["cyclic_graphs"] = r.cyclic_graphs;
  j["graphs_with_hits"] = r.graphs_with_hits;
  j["hits"] = r.hits;
  j["counterexamples"] = r.counterexamples;
  j["passed"] = r.passed();
  j["examples"] = nlohmann::json::array();
  for (const auto& e : r.examples)
    j["examples"].push_back({{"graph", e.graph},
                             {"tuple", e.tuple},
                             {"x_anc_y", e.conclusions.x_anc_y},
                             {"y_not_anc_x", e.conclusions.y_not_anc_x},
                             {"x_not_anc_s", e.conclusions.x_not_anc_s},
                             {"unconfounded", e.conclusions.unconfounded}});
  return j;
}

}  // namespace selbias

#endif  // SELBIAS_ENUMERATE_HPP_
