#ifndef SELBIAS_SCM_HPP_
#define SELBIAS_SCM_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "selbias/dataset.hpp"
#include "selbias/graph.hpp"
#include "selbias/parallel.hpp"
#include "selbias/patterns.hpp"

namespace selbias {

/// Samples are kept when the sum over Selection nodes lies in [lower, upper].
struct SelectionRule {
  double lower = 2.0;
  double upper = 2.5;
};

enum class InterventionKind { SetValue, Knockout };

/// Knockout value in units of the node's marginal standard deviation.
inline constexpr double kKnockoutScale = -5.0;

struct Intervention {
  std::string target;
  InterventionKind kind = InterventionKind::SetValue;
  double value = 0.0;  // SetValue only
};

/// Linear-Gaussian SCM over an acyclic graph without bidirected edges:
///   x_v = sum_u weight(u, v) * x_u + noise_scale(v) * eps_v,  eps_v ~ N(0, 1).
struct LinearScm {
  Dmg graph;
  std::vector<int> order;
  Eigen::MatrixXd weight;
  Eigen::VectorXd noise_scale;
  std::uint64_t seed = 0;

  /// Exact joint covariance of all nodes (no selection, no intervention).
  Eigen::MatrixXd covariance() const {
    const auto n = static_cast<Eigen::Index>(graph.size());
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t k = 0; k < order.size(); ++k) {
      const int v = order[k];
      // Cov(v, u) for already-placed u, then Var(v).
      for (std::size_t j = 0; j < k; ++j) {
        const int u = order[j];
        double c = 0.0;
        for (int p : graph.parents(v)) c += weight(p, v) * cov(p, u);
        cov(v, u) = cov(u, v) = c;
      }
      double var = noise_scale(v) * noise_scale(v);
      for (int p : graph.parents(v))
        for (int q : graph.parents(v)) var += weight(p, v) * weight(q, v) * cov(p, q);
      cov(v, v) = var;
    }
    return cov;
  }
};

namespace detail {

inline void check_scm_graph(const Dmg& g) {
  if (g.num_bidirected_edges() > 0) fail(ErrorCode::InvalidArgument, "linear SCM graphs cannot carry bidirected edges");
  if (!is_acyclic(g)) fail(ErrorCode::Cyclic, "linear SCM graphs must be acyclic");
}

}  // namespace detail

/// Rescales raw weights (unit raw noise) so every node has unit marginal variance.
///
/// In topological order, each node's incoming weights and its noise scale are
/// divided by the standard deviation the node would have with the raw values.
inline LinearScm standardize(const Dmg& g, const Eigen::MatrixXd& raw_weight, std::uint64_t seed = 0) {
  detail::check_scm_graph(g);
  const auto n = static_cast<Eigen::Index>(g.size());
  if (raw_weight.rows() != n || raw_weight.cols() != n) fail(ErrorCode::InvalidArgument, "weight matrix has wrong shape");
  LinearScm scm{g, topological_order(g), Eigen::MatrixXd::Zero(n, n), Eigen::VectorXd::Ones(n), seed};
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t k = 0; k < scm.order.size(); ++k) {
    const int v = scm.order[k];
    const auto& pa = g.parents(v);
    double var = 1.0;
    for (int p : pa)
      for (int q : pa) var += raw_weight(p, v) * raw_weight(q, v) * cov(p, q);
    const double sd = std::sqrt(var);
    for (int p : pa) scm.weight(p, v) = raw_weight(p, v) / sd;
    scm.noise_scale(v) = 1.0 / sd;
    for (std::size_t j = 0; j < k; ++j) {
      const int u = scm.order[j];
      double c = 0.0;
      for (int p : pa) c += scm.weight(p, v) * cov(p, u);
      cov(v, u) = cov(u, v) = c;
    }
    cov(v, v) = 1.0;
  }
  return scm;
}

/// Raw weights uniform on [-1.5, -0.5] u [0.5, 1.5], then unit-variance standardization.
inline LinearScm sample_weights(const Dmg& g, std::uint64_t seed) {
  detail::check_scm_graph(g);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> mag(0.5, 1.5);
  std::bernoulli_distribution sign(0.5);
  const auto n = static_cast<Eigen::Index>(g.size());
  Eigen::MatrixXd raw = Eigen::MatrixXd::Zero(n, n);
  for (int v : topological_order(g))
    for (int p : g.parents(v)) raw(p, v) = (sign(rng) ? -1.0 : 1.0) * mag(rng);
  return standardize(g, raw, seed);
}

struct SimulationOptions {
  std::optional<SelectionRule> selection;
  std::optional<Intervention> intervention;
  /// Nodes left out of the output besides Selection nodes (latent variables).
  std::vector<std::string> hidden;
  std::uint64_t max_attempts = 10'000'000;
};

struct SimulationRun {
  Dataset data;
  std::uint64_t attempts = 0;
};

/// Ancestral sampling with optional intervention and rejection on the selection rule.
///
/// Ancestors of the Selection nodes are drawn first so rejected attempts
/// skip the rest of the graph; this leaves the accepted joint law unchanged.
inline SimulationRun simulate_run(const LinearScm& scm, std::size_t n, const SimulationOptions& opt, std::uint64_t seed) {
  if (n < 1) fail(ErrorCode::InvalidArgument, "simulate needs n >= 1");
  const Dmg& g = scm.graph;
  const NodeSet sel = g.nodes_with_role(NodeRole::Selection);
  const bool selecting = opt.selection.has_value() && sel.any();
  if (opt.selection && !(opt.selection->lower < opt.selection->upper))
    fail(ErrorCode::InvalidArgument, "selection rule needs lower < upper");

  int iv_node = -1;
  double iv_value = 0.0;
  if (opt.intervention) {
    iv_node = g.index_of(opt.intervention->target);
    if (g.role(iv_node) != NodeRole::System) fail(ErrorCode::InvalidArgument, "interventions must target a System node");
    if (opt.intervention->kind == InterventionKind::SetValue) {
      iv_value = opt.intervention->value;
    } else {
      iv_value = kKnockoutScale * std::sqrt(scm.covariance()(iv_node, iv_node));
    }
  }

  const NodeSet first = selecting ? ancestors(g, sel) : g.empty_set();
  std::vector<int> phase1, phase2;
  for (int v : scm.order) (first.test(static_cast<std::size_t>(v)) ? phase1 : phase2).push_back(v);
  const std::vector<int> sel_nodes = to_indices(sel);

  NodeSet hidden = sel;
  for (const auto& h : opt.hidden) hidden.set(static_cast<std::size_t>(g.index_of(h)));
  std::vector<Column> cols;
  std::vector<int> out_nodes;
  for (std::size_t v = 0; v < g.size(); ++v) {
    if (hidden.test(v)) continue;
    cols.push_back({g.id(static_cast<int>(v)), g.role(static_cast<int>(v)), false});
    out_nodes.push_back(static_cast<int>(v));
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> x(g.size(), 0.0);
  auto draw = [&](int v) {
    if (v == iv_node) {
      x[static_cast<std::size_t>(v)] = iv_value;
      return;
    }
    double s = scm.noise_scale(v) * normal(rng);
    for (int p : g.parents(v)) s += scm.weight(p, v) * x[static_cast<std::size_t>(p)];
    x[static_cast<std::size_t>(v)] = s;
  };

  Eigen::MatrixXd values(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(out_nodes.size()));
  std::uint64_t attempts = 0;
  for (std::size_t row = 0; row < n;) {
    if (++attempts > opt.max_attempts)
      fail(ErrorCode::RetryExhausted, "selection acceptance too low: attempt cap " + std::to_string(opt.max_attempts) + " exceeded");
    for (int v : phase1) draw(v);
    if (selecting) {
      double total = 0.0;
      for (int s : sel_nodes) total += x[static_cast<std::size_t>(s)];
      if (total < opt.selection->lower || total > opt.selection->upper) continue;
    }
    for (int v : phase2) draw(v);
    for (std::size_t j = 0; j < out_nodes.size(); ++j)
      values(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(j)) = x[static_cast<std::size_t>(out_nodes[j])];
    ++row;
  }
  return {Dataset(std::move(cols), std::move(values)), attempts};
}

inline Dataset simulate(const LinearScm& scm, std::size_t n, std::optional<SelectionRule> selection,
                        std::optional<Intervention> iv, std::uint64_t seed) {
  SimulationOptions opt;
  opt.selection = selection;
  opt.intervention = std::move(iv);
  return simulate_run(scm, n, opt, seed).data;
}

/// Biased (selection on) and unbiased (selection off) datasets from independent streams.
inline std::pair<Dataset, Dataset> simulate_paired(const LinearScm& scm, std::size_t n, std::uint64_t seed,
                                                   SelectionRule rule = {}) {
  return {simulate(scm, n, rule, std::nullopt, derive_seed(seed, 0)), simulate(scm, n, std::nullopt, std::nullopt, derive_seed(seed, 1))};
}

/// Number of accepted draws among `attempts` draws of the selection nodes' ancestors.
inline std::uint64_t count_accepted(const LinearScm& scm, std::uint64_t attempts, SelectionRule rule, std::uint64_t seed) {
  const Dmg& g = scm.graph;
  const NodeSet sel = g.nodes_with_role(NodeRole::Selection);
  if (sel.none()) fail(ErrorCode::InvalidArgument, "graph has no selection node");
  const NodeSet first = ancestors(g, sel);
  std::vector<int> phase1;
  for (int v : scm.order)
    if (first.test(static_cast<std::size_t>(v))) phase1.push_back(v);
  const auto sel_nodes = to_indices(sel);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> x(g.size(), 0.0);
  std::uint64_t accepted = 0;
  for (std::uint64_t a = 0; a < attempts; ++a) {
    for (int v : phase1) {
      double s = scm.noise_scale(v) * normal(rng);
      for (int p : g.parents(v)) s += scm.weight(p, v) * x[static_cast<std::size_t>(p)];
      x[static_cast<std::size_t>(v)] = s;
    }
    double total = 0.0;
    for (int s : sel_nodes) total += x[static_cast<std::size_t>(s)];
    if (total >= rule.lower && total <= rule.upper) ++accepted;
  }
  return accepted;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json scm_to_json(const LinearScm& scm) {
  nlohmann::json j;
  j["seed"] = scm.seed;
  j["nodes"] = nlohmann::json::array();
  j["edges"] = nlohmann::json::array();
  j["noise_scale"] = nlohmann::json::object();
  const Dmg& g = scm.graph;
  for (std::size_t v = 0; v < g.size(); ++v) {
    const int iv = static_cast<int>(v);
    j["nodes"].push_back({{"id", g.id(iv)}, {"role", std::string(to_string(g.role(iv)))}});
    j["noise_scale"][g.id(iv)] = scm.noise_scale(iv);
  }
  for (int v : scm.order)
    for (int p : g.parents(v)) j["edges"].push_back({{"from", g.id(p)}, {"to", g.id(v)}, {"weight", scm.weight(p, v)}});
  return j;
}

inline LinearScm scm_from_json(const nlohmann::json& j) {
  try {
    Dmg g;
    for (const auto& node : j.at("nodes")) g.add_node(node.at("id").get<std::string>(), parse_role(node.at("role").get<std::string>()));
    const auto n = static_cast<Eigen::Index>(g.size());
    LinearScm scm;
    scm.weight = Eigen::MatrixXd::Zero(n, n);
    scm.noise_scale = Eigen::VectorXd::Ones(n);
    for (const auto& e : j.at("edges")) {
      const int a = g.index_of(e.at("from").get<std::string>()), b = g.index_of(e.at("to").get<std::string>());
      g.add_directed(a, b);
      scm.weight(a, b) = e.at("weight").get<double>();
    }
    for (const auto& [id, s] : j.at("noise_scale").items()) scm.noise_scale(g.index_of(id)) = s.get<double>();
    detail::check_scm_graph(g);
    scm.order = topological_order(g);
    scm.graph = std::move(g);
    scm.seed = j.value("seed", std::uint64_t{0});
    return scm;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Format, std::string("invalid SCM JSON: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Identifiability check: E[Y | X = x, selected] versus E[Y | do(X = x), selected].

struct IdentifiabilityOptions {
  std::vector<double> grid{-1.0, -0.5, 0.0, 0.5, 1.0};
  double half_width = 0.25;
  std::size_t bootstrap = 200;
  double level = 0.99;
  std::size_t min_bin = 30;
  SelectionRule rule{};
  std::vector<std::string> hidden;
};

struct IdentifiabilityReport {
  std::vector<double> grid;  // grid points that kept enough observational rows
  std::vector<double> dropped;
  std::vector<double> observational;
  std::vector<double> interventional;
  double max_discrepancy = 0.0;
  /// Half-width of the simultaneous bootstrap band for the differences.
  double band = 0.0;
  bool consistent = false;  // max_discrepancy <= band
  std::size_t n_observational = 0;
  std::size_t n_interventional = 0;
};

namespace detail {

// Local linear fit of y on x among |x - x0| <= h, evaluated at x0.
inline std::optional<double> local_linear(const std::vector<double>& xs, const std::vector<double>& ys,
                                          const std::vector<std::size_t>& rows, double x0, std::size_t min_rows) {
  if (rows.size() < min_rows) return std::nullopt;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (auto i : rows) {
    const double dx = xs[i] - x0;
    sx += dx;
    sy += ys[i];
    sxx += dx * dx;
    sxy += dx * ys[i];
  }
  const double m = static_cast<double>(rows.size());
  const double det = m * sxx - sx * sx;
  if (!(det > 0)) return sy / m;
  return (sxx * sy - sx * sxy) / det;
}

}  // namespace detail

inline IdentifiabilityReport check_identifiability(const LinearScm& scm, const std::string& x, const std::string& y,
                                                   std::size_t n, std::uint64_t seed, const IdentifiabilityOptions& opt = {}) {
  const Dmg& g = scm.graph;
  g.index_of(x);
  g.index_of(y);
  if (opt.grid.empty()) fail(ErrorCode::InvalidArgument, "identifiability grid is empty");
  const bool has_sel = g.nodes_with_role(NodeRole::Selection).any();
  std::optional<SelectionRule> rule;
  if (has_sel) rule = opt.rule;

  SimulationOptions obs_opt;
  obs_opt.selection = rule;
  obs_opt.hidden = opt.hidden;
  const Dataset obs = simulate_run(scm, n, obs_opt, derive_seed(seed, 0)).data;
  const auto xo = obs.col(obs.index_of(x)), yo = obs.col(obs.index_of(y));
  std::vector<double> xs(xo.begin(), xo.end()), ys(yo.begin(), yo.end());

  const std::size_t per_point = std::max<std::size_t>(1, n / opt.grid.size());
  IdentifiabilityReport rep;
  rep.n_observational = obs.rows();
  std::vector<std::vector<double>> do_y;
  std::vector<std::vector<std::size_t>> bins;
  for (std::size_t k = 0; k < opt.grid.size(); ++k) {
    const double x0 = opt.grid[k];
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < xs.size(); ++i)
      if (std::abs(xs[i] - x0) <= opt.half_width) rows.push_back(i);
    if (rows.size() < opt.min_bin) {
      rep.dropped.push_back(x0);
      continue;
    }
    SimulationOptions iv_opt;
    iv_opt.selection = rule;
    iv_opt.hidden = opt.hidden;
    iv_opt.intervention = Intervention{x, InterventionKind::SetValue, x0};
    const Dataset dd = simulate_run(scm, per_point, iv_opt, derive_seed(seed, 1 + k)).data;
    const auto col = dd.col(dd.index_of(y));
    do_y.emplace_back(col.begin(), col.end());
    rep.n_interventional += dd.rows();
    bins.push_back(std::move(rows));
    rep.grid.push_back(x0);
  }
  if (rep.grid.empty()) fail(ErrorCode::InvalidArgument, "every identifiability bin was too sparse");

  auto mean = [](const std::vector<double>& v) {
    double s = 0;
    for (double a : v) s += a;
    return s / static_cast<double>(v.size());
  };
  std::vector<double> diff;
  for (std::size_t k = 0; k < rep.grid.size(); ++k) {
    const double o = *detail::local_linear(xs, ys, bins[k], rep.grid[k], 1);
    const double d = mean(do_y[k]);
    rep.observational.push_back(o);
    rep.interventional.push_back(d);
    diff.push_back(o - d);
    rep.max_discrepancy = std::max(rep.max_discrepancy, std::abs(o - d));
  }

  // Centered bootstrap of max_k |d_k* - d_k| gives a simultaneous band.
  std::mt19937_64 rng(derive_seed(seed, 1000));
  std::vector<double> stats;
  stats.reserve(opt.bootstrap);
  for (std::size_t b = 0; b < opt.bootstrap; ++b) {
    double t = 0.0;
    for (std::size_t k = 0; k < rep.grid.size(); ++k) {
      const auto& rows = bins[k];
      std::uniform_int_distribution<std::size_t> pick_obs(0, rows.size() - 1);
      std::vector<std::size_t> resampled(rows.size());
      for (auto& r : resampled) r = rows[pick_obs(rng)];
      const double o = *detail::local_linear(xs, ys, resampled, rep.grid[k], 1);
      std::uniform_int_distribution<std::size_t> pick_do(0, do_y[k].size() - 1);
      double s = 0.0;
      for (std::size_t i = 0; i < do_y[k].size(); ++i) s += do_y[k][pick_do(rng)];
      const double d = s / static_cast<double>(do_y[k].size());
      t = std::max(t, std::abs((o - d) - diff[k]));
    }
    stats.push_back(t);
  }
  std::sort(stats.begin(), stats.end());
  if (!stats.empty()) {
    const auto idx = std::min(stats.size() - 1, static_cast<std::size_t>(std::ceil(opt.level * static_cast<double>(stats.size()))) - 1);
    rep.band = stats[idx];
  }
  rep.consistent = rep.max_discrepancy <= rep.band;
  return rep;
}

/// Identifiability check for the claim carried by a Y-Structure hit.
inline IdentifiabilityReport check_identifiability(const LinearScm& scm, const PatternHit& hit, std::size_t n,
                                                   std::uint64_t seed, const IdentifiabilityOptions& opt = {}) {
  if (hit.kind != Method::YSt && hit.kind != Method::YStExt)
    fail(ErrorCode::InvalidArgument, "identifiability check expects a Y-Structure hit");
  return check_identifiability(scm, hit.source_name(), hit.target_name(), n, seed, opt);
}

}  // namespace selbias

#endif  // SELBIAS_SCM_HPP_
