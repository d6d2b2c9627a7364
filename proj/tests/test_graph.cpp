#include <random>

#include <gtest/gtest.h>

#include "selbias/graph.hpp"
#include "selbias/separation.hpp"
#include "support/random_dmg.hpp"

using namespace selbias;

namespace {

Dmg chain3() { return parse_graph("node A system\nnode B system\nnode C system\nedge A -> B\nedge B -> C\n"); }

}  // namespace

TEST(Dmg, AddNodeRejectsDuplicates) {
  Dmg g;
  g.add_node("A");
  try {
    g.add_node("A");
    FAIL() << "no throw";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidArgument);
  }
}

TEST(Dmg, UnknownNodeLookup) {
  const Dmg g = chain3();
  try {
    g.index_of("Z");
    FAIL() << "no throw";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownNode);
  }
}

TEST(Dmg, EdgesAreIdempotent) {
  Dmg g = chain3();
  g.add_directed("A", "B");
  g.add_bidirected("A", "C");
  g.add_bidirected("C", "A");
  EXPECT_EQ(g.num_directed_edges(), 2u);
  EXPECT_EQ(g.num_bidirected_edges(), 1u);
  EXPECT_EQ(g.parents(g.index_of("B")).size(), 1u);
  EXPECT_TRUE(g.has_bidirected(g.index_of("C"), g.index_of("A")));
}

TEST(Dmg, AllEightPairStatesCoexist) {
  Dmg g;
  g.add_node("A");
  g.add_node("B");
  g.add_directed(0, 1);
  g.add_directed(1, 0);
  g.add_bidirected(0, 1);
  EXPECT_TRUE(g.has_directed(0, 1));
  EXPECT_TRUE(g.has_directed(1, 0));
  EXPECT_TRUE(g.has_bidirected(0, 1));
  EXPECT_TRUE(g.adjacent(0, 1));
}

TEST(Dmg, SelfLoopRejected) {
  Dmg g;
  g.add_node("A");
  EXPECT_THROW(g.add_directed(0, 0), Error);
}

TEST(Ancestry, ReflexiveAndTransitive) {
  const Dmg g = chain3();
  const int a = g.index_of("A"), b = g.index_of("B"), c = g.index_of("C");
  EXPECT_TRUE(is_ancestor(g, a, a));
  EXPECT_TRUE(is_ancestor(g, a, c));
  EXPECT_FALSE(is_ancestor(g, c, a));
  EXPECT_EQ(descendants(g, b).count(), 2u);
  EXPECT_EQ(ancestors(g, c).count(), 3u);
}

TEST(Ancestry, BidirectedEdgesDoNotCarryAncestry) {
  const Dmg g = parse_graph("node A system\nnode B system\nedge A <-> B\n");
  EXPECT_FALSE(is_ancestor(g, 0, 1));
  EXPECT_FALSE(is_ancestor(g, 1, 0));
}

TEST(Scc, CycleFormsOneComponent) {
  const Dmg g = parse_graph(
      "node A system\nnode B system\nnode C system\nnode D system\n"
      "edge A -> B\nedge B -> C\nedge C -> A\nedge C -> D\n");
  const auto lab = scc_labels(g);
  EXPECT_EQ(lab[0], lab[1]);
  EXPECT_EQ(lab[1], lab[2]);
  EXPECT_NE(lab[2], lab[3]);
  EXPECT_FALSE(is_acyclic(g));
  EXPECT_EQ(strongly_connected_component(g, 0).count(), 3u);
  try {
    topological_order(g);
    FAIL() << "no throw";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Cyclic);
  }
}

TEST(Scc, LabelsMatchAncestorIntersection) {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 200; ++rep) {
    const Dmg g = ref::random_dmg(rng, 7, 0.25, 0.1);
    const auto lab = scc_labels(g);
    for (int v = 0; v < 7; ++v) {
      const NodeSet comp = strongly_connected_component(g, v);
      for (int w = 0; w < 7; ++w) EXPECT_EQ(comp.test(static_cast<std::size_t>(w)), lab[v] == lab[w]);
    }
  }
}

TEST(Topological, OrderRespectsEdges) {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 100; ++rep) {
    const Dmg g = ref::random_dag(rng, 9, 0.3);
    const auto order = topological_order(g);
    std::vector<int> pos(9);
    for (int i = 0; i < 9; ++i) pos[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = i;
    for (int v = 0; v < 9; ++v)
      for (int c : g.children(v)) EXPECT_LT(pos[static_cast<std::size_t>(v)], pos[static_cast<std::size_t>(c)]);
  }
}

TEST(Projection, MediatorBecomesDirectedEdge) {
  const Dmg g = chain3();
  const Dmg p = latent_projection(g, g.make_set({"A", "C"}));
  ASSERT_EQ(p.size(), 2u);
  EXPECT_TRUE(p.has_directed(p.index_of("A"), p.index_of("C")));
  EXPECT_FALSE(p.has_bidirected(0, 1));
}

TEST(Projection, HiddenCommonCauseBecomesBidirected) {
  const Dmg g = parse_graph("node L system\nnode X system\nnode Y system\nedge L -> X\nedge L -> Y\n");
  const Dmg p = latent_projection(g, g.make_set({"X", "Y"}));
  EXPECT_TRUE(p.has_bidirected(0, 1));
  EXPECT_FALSE(p.has_directed(0, 1));
  EXPECT_FALSE(p.has_directed(1, 0));
}

TEST(Projection, HiddenColliderLeavesNoEdge) {
  const Dmg g = parse_graph("node L system\nnode X system\nnode Y system\nedge X -> L\nedge Y -> L\n");
  const Dmg p = latent_projection(g, g.make_set({"X", "Y"}));
  EXPECT_FALSE(p.adjacent(0, 1));
}

TEST(Projection, KeepsRolesAndBidirectedThroughHiddenChain) {
  const Dmg g = parse_graph(
      "node C context\nnode L1 system\nnode L2 system\nnode Y system\n"
      "edge C -> L1\nedge L1 <-> L2\nedge L2 -> Y\n");
  const Dmg p = latent_projection(g, g.make_set({"C", "Y"}));
  EXPECT_EQ(p.role(p.index_of("C")), NodeRole::Context);
  EXPECT_FALSE(p.adjacent(0, 1));
  const Dmg q = parse_graph("node A system\nnode L system\nnode Y system\nedge A <-> L\nedge L -> Y\n");
  const Dmg pq = latent_projection(q, q.make_set({"A", "Y"}));
  EXPECT_TRUE(pq.has_bidirected(0, 1));
}

// Marginalization preserves sigma-separation among the kept nodes.
TEST(Projection, PreservesSeparationOnKeptNodes) {
  std::mt19937_64 rng(2024);
  for (int rep = 0; rep < 150; ++rep) {
    const Dmg g = ref::random_dmg(rng, 6, 0.22, 0.08);
    const std::vector<int> keep_idx{0, 1, 2, 3};
    const Dmg p = latent_projection(g, g.make_set(keep_idx));
    for (int x = 0; x < 4; ++x)
      for (int y = x + 1; y < 4; ++y)
        for (int mask = 0; mask < 4; ++mask) {
          std::vector<int> z;
          int bit = 0;
          for (int v = 0; v < 4; ++v) {
            if (v == x || v == y) continue;
            if (mask >> bit++ & 1) z.push_back(v);
          }
          const bool in_g = sigma_separated(g, g.make_set(std::vector<int>{x}), g.make_set(std::vector<int>{y}), g.make_set(z));
          const bool in_p = sigma_separated(p, p.make_set(std::vector<int>{x}), p.make_set(std::vector<int>{y}), p.make_set(z));
          ASSERT_EQ(in_g, in_p) << format_graph(g);
        }
  }
}

TEST(Jci, ContextMustHaveNoSystemAncestors) {
  EXPECT_TRUE(validate_jci1(parse_graph("node C context\nnode X system\nedge C -> X\n")));
  EXPECT_FALSE(validate_jci1(parse_graph("node C context\nnode X system\nedge X -> C\n")));
  EXPECT_FALSE(validate_jci1(parse_graph("node C context\nnode S selection\nedge S -> C\n")));
  EXPECT_TRUE(validate_jci1(parse_graph("node C context\nnode X system\nedge C <-> X\n")));
}

TEST(GraphText, RoundTrip) {
  const Dmg g = parse_graph(
      "# comment\nnode C context\nnode X system\nnode S selection\n"
      "edge C -> X   # trailing\nedge X -> S\nedge C <-> X\n");
  const Dmg back = parse_graph(format_graph(g));
  EXPECT_TRUE(g == back);
  EXPECT_EQ(back.role(back.index_of("S")), NodeRole::Selection);
}

TEST(GraphText, RejectsMalformedInput) {
  auto code_of = [](const std::string& text) {
    try {
      parse_graph(text);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::Usage;
  };
  EXPECT_EQ(code_of("node A wizard\n"), ErrorCode::Format);
  EXPECT_EQ(code_of("node A system\nedge A -> B\n"), ErrorCode::Format);
  EXPECT_EQ(code_of("node A system\nedge A => A\n"), ErrorCode::Format);
  EXPECT_EQ(code_of("vertex A\n"), ErrorCode::Format);
  EXPECT_EQ(code_of("node A system\nedge A -> A\n"), ErrorCode::Format);
  EXPECT_EQ(code_of("node A system\nnode A system\n"), ErrorCode::Format);
}

TEST(GraphText, MissingFileIsIoError) {
  try {
    read_graph_file("/nonexistent/graph.txt");
    FAIL() << "no throw";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Io);
  }
}
