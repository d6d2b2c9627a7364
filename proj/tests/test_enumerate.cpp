#include <random>
#include <set>

#include <gtest/gtest.h>

#include "selbias/enumerate.hpp"
#include "support/walk_reference.hpp"

using namespace selbias;

namespace {

EnumerationSpec three_var(std::size_t n_sel, bool jci) {
  EnumerationSpec s;
  s.observables = {{"C", NodeRole::Context}, {"X", NodeRole::System}, {"Y", NodeRole::System}};
  s.n_selection = n_sel;
  s.jci = jci;
  return s;
}

// Signature rebuilt query by query from the walk reference.
std::string reference_signature(const Dmg& g) {
  const NodeSet sel = g.nodes_with_role(NodeRole::Selection);
  std::string sig;
  const int pairs[3][3] = {{0, 1, 2}, {0, 2, 1}, {1, 2, 0}};
  for (const auto& p : pairs)
    for (int with : {0, 1}) {
      NodeSet a(g.size()), b(g.size()), c = sel;
      a.set(static_cast<std::size_t>(p[0]));
      b.set(static_cast<std::size_t>(p[1]));
      if (with) c.set(static_cast<std::size_t>(p[2]));
      sig.push_back(ref::reference_separated(g, a, b, c, true, false) ? '1' : '0');
    }
  return sig;
}

std::uint64_t ipow(std::uint64_t b, unsigned e) {
  std::uint64_t r = 1;
  while (e--) r *= b;
  return r;
}

}  // namespace

TEST(Codec, RoundTripsEveryState) {
  const EnumerationSpec spec = three_var(1, false);
  const Dmg skel = spec.skeleton();
  EXPECT_EQ(spec.num_codes(), 262144u);
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::uint64_t> pick(0, spec.num_codes() - 1);
  for (int i = 0; i < 2000; ++i) {
    const std::uint64_t code = pick(rng);
    EXPECT_EQ(encode_dmg(decode_dmg(spec, skel, code)), code);
  }
  // Pair (0,1) is the lowest digit, pair (2,3) the highest.
  const Dmg lo = decode_dmg(spec, skel, 1);
  EXPECT_TRUE(lo.has_directed(0, 1));
  EXPECT_EQ(lo.num_directed_edges(), 1u);
  const Dmg hi = decode_dmg(spec, skel, 4ull << 15);
  EXPECT_TRUE(hi.has_bidirected(2, 3));
  EXPECT_EQ(edge_state(hi, 2, 3), kBidirected);
}

TEST(Enumeration, RejectsOversizedSpecs) {
  EnumerationSpec s = three_var(3, true);
  EXPECT_THROW(s.validate(), Error);
  s = three_var(1, true);
  s.observables.push_back({"T", NodeRole::Selection});
  EXPECT_THROW(s.validate(), Error);
}

TEST(Enumeration, FilteredCountsMatchClosedForm) {
  // JCI keeps 4 of 8 states on each pair touching C (no arrowhead into C from a directed edge).
  for (std::size_t ns : {0u, 1u}) {
    const EnumerationSpec spec = three_var(ns, true);
    const unsigned n = static_cast<unsigned>(spec.num_nodes());
    const unsigned with_c = n - 1, without_c = n * (n - 1) / 2 - with_c;
    const std::size_t kept = for_each_dmg(spec, [](std::uint64_t, const Dmg&) {});
    EXPECT_EQ(kept, ipow(4, with_c) * ipow(8, without_c));
  }
  EnumerationSpec sinks = three_var(1, false);
  sinks.selection_sinks = true;
  // S is the last node: on each of its 3 pairs the states with an edge out of S go.
  EXPECT_EQ(for_each_dmg(sinks, [](std::uint64_t, const Dmg&) {}), ipow(4, 3) * ipow(8, 3));
}

TEST(Signature, MatchesWalkReference) {
  const EnumerationSpec spec = three_var(1, true);
  const Dmg skel = spec.skeleton();
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::uint64_t> pick(0, spec.num_codes() - 1);
  int checked = 0;
  while (checked < 400) {
    const Dmg g = decode_dmg(spec, skel, pick(rng));
    if (!passes_filters(spec, g)) continue;
    EXPECT_EQ(independence_signature(g, {0, 1, 2}), reference_signature(g)) << format_graph(g);
    ++checked;
  }
}

TEST(ThreeVar, SingleSelectionNodeHasNoSoundRule) {
  const ThreeVarReport r = verify_no_sound_3var_rule(1, true);
  EXPECT_EQ(r.raw_graphs, 262144u);
  EXPECT_EQ(r.filtered_graphs, 32768u);
  EXPECT_EQ(r.buckets.size(), 11u);
  EXPECT_EQ(r.forcing_selection_buckets, 0u);
  EXPECT_EQ(r.forcing_buckets, 0u);
  EXPECT_TRUE(r.no_sound_rule());
  std::size_t total = 0;
  for (const auto& b : r.buckets) total += b.graph_count;
  EXPECT_EQ(total, r.filtered_graphs);
  EXPECT_FALSE(r.lcd_forces_x_anc_y);
  EXPECT_FALSE(r.lcd_signatures.empty());
}

TEST(ThreeVar, WithoutSelectionLcdIsSound) {
  const ThreeVarReport r = verify_no_sound_3var_rule(0, true);
  EXPECT_EQ(r.raw_graphs, 512u);
  EXPECT_EQ(r.filtered_graphs, 128u);
  EXPECT_EQ(r.forcing_buckets, 2u);
  EXPECT_EQ(r.forcing_selection_buckets, 0u);
  EXPECT_TRUE(r.lcd_forces_x_anc_y);
  ASSERT_EQ(r.lcd_signatures.size(), 1u);
  EXPECT_EQ(r.lcd_signatures[0], "000100");
}

TEST(ThreeVar, BucketsAreRecomputable) {
  // Tally signatures and ancestry directly from the enumeration.
  const EnumerationSpec spec = three_var(1, true);
  std::map<std::string, std::array<std::size_t, 3>> tally;
  for_each_dmg(spec, [&](std::uint64_t, const Dmg& g) {
    auto& t = tally[independence_signature(g, {0, 1, 2})];
    ++t[0];
    t[1] += is_ancestor(g, 1, 2);
    t[2] += is_ancestor(g, 2, 1);
  });
  const ThreeVarReport r = verify_no_sound_3var_rule(1, true, false, 1);
  ASSERT_EQ(r.buckets.size(), tally.size());
  for (const auto& b : r.buckets) {
    const auto& t = tally.at(b.signature);
    EXPECT_EQ(b.graph_count, t[0]);
    EXPECT_EQ(b.x_anc_y, t[1]);
    EXPECT_EQ(b.y_anc_x, t[2]);
    EXPECT_EQ(independence_signature(decode_dmg(spec, spec.skeleton(), b.example_code), {0, 1, 2}), b.signature);
  }
  const nlohmann::json j = to_json(r);
  EXPECT_EQ(j["filtered_graphs"], 32768);
}

TEST(ThreeVar, ThreadCountDoesNotChangeResult) {
  const nlohmann::json a = to_json(verify_no_sound_3var_rule(1, true, false, 1));
  const nlohmann::json b = to_json(verify_no_sound_3var_rule(1, true, false, 3));
  EXPECT_EQ(a, b);
}

TEST(YStConclusions, ReadsAncestryAndConfounding) {
  const Dmg good = parse_graph(
      "node V system\nnode W system\nnode X system\nnode Y system\nnode S selection\n"
      "edge V -> X\nedge W -> X\nedge X -> Y\nedge W -> S\n");
  EXPECT_TRUE(ystructure_conclusions(good, "V", "W", "X", "Y").all());

  const Dmg hidden = parse_graph(
      "node V system\nnode W system\nnode X system\nnode Y system\nnode U system\n"
      "edge V -> X\nedge W -> X\nedge X -> Y\nedge U -> X\nedge U -> Y\n");
  const auto c = ystructure_conclusions(latent_projection(hidden, hidden.make_set(std::vector<int>{0, 1, 2, 3})), "V", "W", "X", "Y");
  EXPECT_TRUE(c.x_anc_y);
  EXPECT_FALSE(c.unconfounded);

  const Dmg sel = parse_graph(
      "node V system\nnode W system\nnode X system\nnode Y system\nnode S selection\n"
      "edge V -> X\nedge W -> X\nedge X -> Y\nedge X -> S\n");
  const auto s = ystructure_conclusions(sel, "V", "W", "X", "Y");
  EXPECT_FALSE(s.x_not_anc_s);
  EXPECT_FALSE(s.all());
}

TEST(YStVerification, SmallRunHasHitsAndNoCounterexamples) {
  const YStVerificationReport r = verify_extended_ystructure(3000, 11);
  EXPECT_EQ(r.graphs, 3000u);
  EXPECT_GT(r.graphs_with_hits, 50u);
  EXPECT_GT(r.cyclic_graphs, 0u);
  EXPECT_EQ(r.counterexamples, 0u);
  EXPECT_TRUE(r.passed());
}

TEST(YStVerification, IndependentOfThreadCount) {
  const auto a = to_json(verify_extended_ystructure(1000, 5, {}, 1));
  const auto b = to_json(verify_extended_ystructure(1000, 5, {}, 4));
  EXPECT_EQ(a, b);
}

TEST(YStVerification, CheckerCountsHits) {
  YStVerificationReport rep;
  const Dmg g = parse_graph(
      "node V system\nnode W system\nnode X system\nnode Y system\n"
      "edge V -> X\nedge W -> X\nedge X -> Y\n");
  check_ystructures_on(g, rep);
  EXPECT_EQ(rep.hits, 2u);  // (V, W) and (W, V)
  EXPECT_EQ(rep.counterexamples, 0u);

  // V -> X <-> Y opens V to Y given X.
  YStVerificationReport bad;
  const Dmg conf = parse_graph(
      "node V system\nnode W system\nnode X system\nnode Y system\n"
      "edge V -> X\nedge W -> X\nedge X -> Y\nedge X <-> Y\n");
  check_ystructures_on(conf, bad);
  EXPECT_EQ(bad.hits, 0u);

  const YStSamplerOptions opt{4, 4, 0, false, 1.0, {0.7, 0.12, 0.12, 0.005, 0.04, 0.005, 0.005, 0.005}};
  const auto acyclic = verify_extended_ystructure(500, 3, opt);
  EXPECT_EQ(acyclic.cyclic_graphs, 0u);
  EXPECT_THROW(verify_extended_ystructure(10, 1, YStSamplerOptions{3, 5}), Error);
}
