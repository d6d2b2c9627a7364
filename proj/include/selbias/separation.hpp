#ifndef SELBIAS_SEPARATION_HPP_
#define SELBIAS_SEPARATION_HPP_

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "selbias/graph.hpp"

namespace selbias {

enum class Verdict { Independent, Dependent, Inconclusive };

struct CiVerdict {
  Verdict verdict = Verdict::Inconclusive;
  std::optional<double> p_value;

  bool independent() const { return verdict == Verdict::Independent; }
  bool dependent() const { return verdict == Verdict::Dependent; }
};

/// Conditional-independence answerer over a fixed list of observable variables.
///
/// Implementations must be safe for concurrent const queries. Selection is
/// never a variable here: an oracle conditions on it implicitly, a dataset
/// simply never observed it.
class CiModel {
 public:
  virtual ~CiModel() = default;

  virtual std::size_t num_variables() const = 0;
  virtual const std::string& name(int var) const = 0;
  virtual NodeRole role(int var) const = 0;
  virtual CiVerdict query(int x, int y, std::span<const int> z) const = 0;

  /// True when verdicts come from a graph rather than from data.
  virtual bool is_oracle() const { return false; }

  int index_of(const std::string& n) const {
    for (std::size_t i = 0; i < num_variables(); ++i)
      if (name(static_cast<int>(i)) == n) return static_cast<int>(i);
    fail(ErrorCode::UnknownNode, "unknown variable '" + n + "'");
  }
};

namespace detail {

/// Walk-reachability for sigma/d-separation.
///
/// State = (node, mark of the arriving edge at that node). Arriving with a
/// tail means the walk left this node along an out-edge towards the previous
/// node; we also remember whether that previous node sat in another strongly
/// connected component, since a conditioned non-collider pointing out of its
/// component blocks under sigma-separation.
class SeparationEngine {
 public:
  explicit SeparationEngine(const Dmg& g) : g_(g), scc_(scc_labels(g)) {}

  bool separated(const NodeSet& x, const NodeSet& y, const NodeSet& c, bool sigma) const {
    g_.check_set(x);
    g_.check_set(y);
    g_.check_set(c);
    if ((x & y).any() || (x & c).any() || (y & c).any())
      fail(ErrorCode::InvalidArgument, "separation query sets must be pairwise disjoint");
    if (x.none() || y.none()) return true;
    const NodeSet an_c = ancestors(g_, c);
    const std::size_t n = g_.size();
    enum : int { kHead = 0, kTailSame = 1, kTailOther = 2 };
    std::vector<char> seen(n * 3, 0);
    std::vector<std::pair<int, int>> stack;

    auto push = [&](int from, int to, bool head_at_to) -> bool {
      if (y.test(static_cast<std::size_t>(to))) return true;
      int kind = head_at_to ? kHead : (scc_[static_cast<std::size_t>(from)] == scc_[static_cast<std::size_t>(to)] ? kTailSame : kTailOther);
      char& s = seen[static_cast<std::size_t>(to) * 3 + static_cast<std::size_t>(kind)];
      if (!s) {
        s = 1;
        stack.emplace_back(to, kind);
      }
      return false;
    };

    for (int s : to_indices(x)) {
      for (int ch : g_.children(s))
        if (push(s, ch, true)) return false;
      for (int pa : g_.parents(s))
        if (push(s, pa, false)) return false;
      for (int sp : g_.spouses(s))
        if (push(s, sp, true)) return false;
    }

    while (!stack.empty()) {
      const auto [v, kind] = stack.back();
      stack.pop_back();
      const bool in_c = c.test(static_cast<std::size_t>(v));
      const int scc_v = scc_[static_cast<std::size_t>(v)];
      // Leaving along an edge with an arrowhead at v.
      const bool collider_ok = an_c.test(static_cast<std::size_t>(v));
      bool noncollider_head_ok;
      if (!in_c) {
        noncollider_head_ok = true;
      } else if (!sigma) {
        noncollider_head_ok = false;
      } else {
        noncollider_head_ok = kind != kTailOther;
      }
      const bool head_exit_ok = kind == kHead ? collider_ok : noncollider_head_ok;
      if (head_exit_ok) {
        for (int pa : g_.parents(v))
          if (push(v, pa, false)) return false;
        for (int sp : g_.spouses(v))
          if (push(v, sp, true)) return false;
      }
      // Leaving along an out-edge (tail at v): v is a non-collider.
      for (int ch : g_.children(v)) {
        bool ok;
        if (!in_c) {
          ok = true;
        } else if (!sigma) {
          ok = false;
        } else {
          ok = kind != kTailOther && scc_[static_cast<std::size_t>(ch)] == scc_v;
        }
        if (ok && push(v, ch, true)) return false;
      }
    }
    return true;
  }

  const Dmg& graph() const { return g_; }
  const std::vector<int>& scc() const { return scc_; }

 private:
  const Dmg& g_;
  std::vector<int> scc_;
};

}  // namespace detail

inline bool sigma_separated(const Dmg& g, const NodeSet& x, const NodeSet& y, const NodeSet& c) {
  return detail::SeparationEngine(g).separated(x, y, c, true);
}

inline bool d_separated(const Dmg& g, const NodeSet& x, const NodeSet& y, const NodeSet& c) {
  return detail::SeparationEngine(g).separated(x, y, c, false);
}

/// sigma-separation oracle. Variables are the non-Selection nodes of the
/// graph (in graph order); every query conditions on all Selection nodes.
class GraphOracle final : public CiModel {
 public:
  explicit GraphOracle(Dmg g) : g_(std::move(g)), engine_(g_), selection_(g_.nodes_with_role(NodeRole::Selection)) {
    for (std::size_t v = 0; v < g_.size(); ++v)
      if (g_.role(static_cast<int>(v)) != NodeRole::Selection) vars_.push_back(static_cast<int>(v));
  }

  GraphOracle(const GraphOracle&) = delete;
  GraphOracle& operator=(const GraphOracle&) = delete;

  std::size_t num_variables() const override { return vars_.size(); }
  const std::string& name(int var) const override { return g_.id(node(var)); }
  NodeRole role(int var) const override { return g_.role(node(var)); }
  bool is_oracle() const override { return true; }

  CiVerdict query(int x, int y, std::span<const int> z) const override {
    NodeSet a(g_.size()), b(g_.size()), c = selection_;
    a.set(static_cast<std::size_t>(node(x)));
    b.set(static_cast<std::size_t>(node(y)));
    for (int v : z) c.set(static_cast<std::size_t>(node(v)));
    if (x == y || c.test(static_cast<std::size_t>(node(x))) || c.test(static_cast<std::size_t>(node(y))))
      fail(ErrorCode::InvalidArgument, "oracle query requires distinct X, Y outside the conditioning set");
    const bool sep = engine_.separated(a, b, c, true);
    return CiVerdict{sep ? Verdict::Independent : Verdict::Dependent, std::nullopt};
  }

  /// Graph node behind variable `var`.
  int node(int var) const {
    if (var < 0 || static_cast<std::size_t>(var) >= vars_.size())
      fail(ErrorCode::UnknownNode, "variable index " + std::to_string(var) + " out of range");
    return vars_[static_cast<std::size_t>(var)];
  }

  const Dmg& graph() const { return g_; }

 private:
  Dmg g_;
  detail::SeparationEngine engine_;
  NodeSet selection_;
  std::vector<int> vars_;
};

/// oracle_ci on a graph using node ids. Selection nodes may not appear in the query.
inline CiVerdict oracle_ci(const Dmg& g, std::string_view x, std::string_view y, const std::vector<std::string>& z = {}) {
  auto check = [&](std::string_view id) {
    const int v = g.index_of(id);
    if (g.role(v) == NodeRole::Selection)
      fail(ErrorCode::InvalidArgument, "selection node '" + std::string(id) + "' cannot be queried");
    return v;
  };
  const int xv = check(x), yv = check(y);
  NodeSet a(g.size()), b(g.size()), c = g.nodes_with_role(NodeRole::Selection);
  a.set(static_cast<std::size_t>(xv));
  b.set(static_cast<std::size_t>(yv));
  for (const auto& id : z) c.set(static_cast<std::size_t>(check(id)));
  return CiVerdict{sigma_separated(g, a, b, c) ? Verdict::Independent : Verdict::Dependent, std::nullopt};
}

namespace detail {

inline void check_minimality_args(int x, int y, std::span<const int> w, std::span<const int> z) {
  std::vector<int> all{x, y};
  all.insert(all.end(), w.begin(), w.end());
  all.insert(all.end(), z.begin(), z.end());
  std::sort(all.begin(), all.end());
  if (std::adjacent_find(all.begin(), all.end()) != all.end())
    fail(ErrorCode::InvalidArgument, "minimality check requires disjoint {X},{Y},W,Z");
}

// Checks `want` on W u Z and `!want` on W u Z' for every proper subset Z'.
inline bool minimal(const CiModel& m, int x, int y, std::span<const int> w, std::span<const int> z, Verdict want) {
  check_minimality_args(x, y, w, z);
  const Verdict other = want == Verdict::Independent ? Verdict::Dependent : Verdict::Independent;
  const std::size_t k = z.size();
  if (k >= 31) fail(ErrorCode::InvalidArgument, "conditioning set too large for minimality enumeration");
  std::vector<int> cond;
  const std::uint32_t full = (1u << k) - 1u;
  // Full set first: cheapest rejection for the common case.
  for (std::uint32_t mask = full + 1; mask-- > 0;) {
    cond.assign(w.begin(), w.end());
    for (std::size_t i = 0; i < k; ++i)
      if (mask & (1u << i)) cond.push_back(z[i]);
    const CiVerdict v = m.query(x, y, cond);
    if (v.verdict != (mask == full ? want : other)) return false;
  }
  return true;
}

}  // namespace detail

/// X _||_ Y | W u [Z]: independent given W u Z, dependent given W u Z' for all Z' strictly inside Z.
/// Any Inconclusive verdict makes the answer false.
inline bool is_minimal_independence(const CiModel& m, int x, int y, std::span<const int> w, std::span<const int> z) {
  return detail::minimal(m, x, y, w, z, Verdict::Independent);
}

inline bool is_minimal_dependence(const CiModel& m, int x, int y, std::span<const int> w, std::span<const int> z) {
  return detail::minimal(m, x, y, w, z, Verdict::Dependent);
}

struct Lemma1Counterexample {
  int x = -1, y = -1;
  std::vector<int> w, z;
  bool minimal_independence = false;  // false: minimal dependence
};

struct Lemma1Report {
  std::size_t tuples = 0;
  std::size_t minimal_independences = 0;
  std::size_t minimal_dependences = 0;
  /// Minimal independence with some element of Z outside an(X u Y u W).
  std::size_t indep_violations = 0;
  /// Minimal dependence with every element of Z inside an(X u Y u W).
  std::size_t dep_violations_some = 0;
  /// Minimal dependence with at least one element of Z inside an(X u Y u W).
  std::size_t dep_violations_all = 0;
  std::vector<Lemma1Counterexample> counterexamples;

  bool holds() const { return indep_violations == 0 && dep_violations_some == 0; }
};

/// Exhaustive check of the minimal (in)dependence ancestral rules on g.
///
/// Every node is treated as observable and separation is queried directly on
/// g. For each unordered {X,Y} and disjoint non-empty Z (W disjoint, possibly
/// empty): a minimal independence must have Z inside an(X u Y u W); a minimal
/// dependence must have at least one element of Z outside it.
/// `dep_violations_all` separately counts the stronger reading (no element of
/// Z ancestral), which is reported but not required.
inline Lemma1Report check_lemma1(const Dmg& g, std::size_t max_counterexamples = 8) {
  const int n = static_cast<int>(g.size());
  if (n > 10) fail(ErrorCode::InvalidArgument, "check_lemma1 is exhaustive; at most 10 nodes supported");
  const detail::SeparationEngine engine(g);
  Lemma1Report rep;
  std::vector<int> rest;
  for (int x = 0; x < n; ++x) {
    for (int y = x + 1; y < n; ++y) {
      rest.clear();
      for (int v = 0; v < n; ++v)
        if (v != x && v != y) rest.push_back(v);
      const std::size_t r = rest.size();
      std::size_t combos = 1;
      for (std::size_t i = 0; i < r; ++i) combos *= 3;
      NodeSet xs(g.size()), ys(g.size());
      xs.set(static_cast<std::size_t>(x));
      ys.set(static_cast<std::size_t>(y));
      for (std::size_t code = 0; code < combos; ++code) {
        std::vector<int> w, z;
        std::size_t c = code;
        for (std::size_t i = 0; i < r; ++i, c /= 3) {
          if (c % 3 == 1) w.push_back(rest[i]);
          if (c % 3 == 2) z.push_back(rest[i]);
        }
        if (z.empty()) continue;
        ++rep.tuples;
        // Separation verdict for every subset of Z (bit i <-> z[i]).
        const std::size_t k = z.size();
        std::vector<char> sep(std::size_t{1} << k);
        for (std::size_t mask = 0; mask < sep.size(); ++mask) {
          NodeSet cs = g.make_set(w);
          for (std::size_t i = 0; i < k; ++i)
            if (mask & (std::size_t{1} << i)) cs.set(static_cast<std::size_t>(z[i]));
          sep[mask] = engine.separated(xs, ys, cs, true);
        }
        const std::size_t full = sep.size() - 1;
        bool min_indep = sep[full], min_dep = !sep[full];
        for (std::size_t mask = 0; mask < full; ++mask) {
          if (sep[mask]) min_indep = false;
          else min_dep = false;
        }
        if (!min_indep && !min_dep) continue;
        NodeSet base = g.make_set(w);
        base.set(static_cast<std::size_t>(x));
        base.set(static_cast<std::size_t>(y));
        const NodeSet an = ancestors(g, base);
        std::size_t inside = 0;
        for (int v : z) inside += an.test(static_cast<std::size_t>(v)) ? 1 : 0;
        bool violation = false;
        if (min_indep) {
          ++rep.minimal_independences;
          if (inside != k) {
            ++rep.indep_violations;
            violation = true;
          }
        } else {
          ++rep.minimal_dependences;
          if (inside == k) {
            ++rep.dep_violations_some;
            violation = true;
          }
          if (inside > 0) ++rep.dep_violations_all;
        }
        if (violation && rep.counterexamples.size() < max_counterexamples)
          rep.counterexamples.push_back({x, y, w, z, min_indep});
      }
    }
  }
  return rep;
}

}  // namespace selbias

#endif  // SELBIAS_SEPARATION_HPP_
