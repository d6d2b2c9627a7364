#ifndef SELBIAS_EVAL_HPP_
#define SELBIAS_EVAL_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "selbias/citest.hpp"
#include "selbias/dataset.hpp"
#include "selbias/graph.hpp"
#include "selbias/icp.hpp"
#include "selbias/parallel.hpp"
#include "selbias/patterns.hpp"
#include "selbias/randgraph.hpp"
#include "selbias/scm.hpp"
#include "selbias/separation.hpp"

namespace selbias {

// ---------------------------------------------------------------------------
// Ground truth

enum class Provenance { GraphAncestral, OraclePattern, InterventionEffect };

inline std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::GraphAncestral: return "graph-ancestral";
    case Provenance::OraclePattern: return "oracle-pattern";
    case Provenance::InterventionEffect: return "intervention-effect";
  }
  return "?";
}

using Pair = std::pair<std::string, std::string>;

/// Positive ordered pairs over the evaluated variables. Candidates are all
/// ordered pairs of distinct variables, or an explicit list when given.
struct GroundTruth {
  Provenance provenance = Provenance::GraphAncestral;
  std::vector<std::string> variables;
  std::set<Pair> positives;
  std::optional<std::set<Pair>> candidates;

  bool is_candidate(const Pair& p) const {
    if (p.first == p.second) return false;
    if (candidates) return candidates->count(p) > 0;
    auto has = [&](const std::string& v) { return std::find(variables.begin(), variables.end(), v) != variables.end(); };
    return has(p.first) && has(p.second);
  }
  bool is_positive(const Pair& p) const { return positives.count(p) > 0; }
  std::size_t num_candidates() const {
    return candidates ? candidates->size() : variables.size() * (variables.size() > 0 ? variables.size() - 1 : 0);
  }
};

/// Ordered pairs (a, b), a != b, with a a proper ancestor of b. Context
/// variables are left out of the evaluated set unless include_context.
inline GroundTruth ancestral_ground_truth(const Dmg& g, bool include_context = false) {
  GroundTruth t;
  std::vector<int> vars;
  for (std::size_t v = 0; v < g.size(); ++v) {
    const NodeRole r = g.role(static_cast<int>(v));
    if (r == NodeRole::System || (include_context && r == NodeRole::Context)) {
      vars.push_back(static_cast<int>(v));
      t.variables.push_back(g.id(static_cast<int>(v)));
    }
  }
  for (int a : vars) {
    const NodeSet de = descendants(g, a);
    for (int b : vars)
      if (a != b && de.test(static_cast<std::size_t>(b))) t.positives.emplace(g.id(a), g.id(b));
  }
  return t;
}

/// True iff the hit's defining constraints hold under the sigma-oracle of g.
inline bool oracle_pattern_check(const Dmg& g, const PatternHit& hit) {
  const GraphOracle oracle(g);
  return pattern_holds(oracle, hit);
}

/// Interventional ground truth from single samples: S_ij = |x_{j;i} - mu_j| / sigma_j.
struct InterventionTruth {
  GroundTruth truth;
  std::map<Pair, double> effect;
  double threshold = 0.0;
};

/// `iv_rows[i]` is one sample (in obs column order) taken under an
/// intervention on column i. The top `top_fraction` of pairs by S_ij are
/// positive (ties at the cut are included).
inline InterventionTruth intervention_ground_truth(const Dataset& obs, const std::map<std::string, std::vector<double>>& iv_rows,
                                                   double top_fraction = 0.01) {
  if (!(top_fraction > 0.0 && top_fraction <= 1.0)) fail(ErrorCode::InvalidArgument, "top_fraction must lie in (0, 1]");
  if (obs.rows() < 2) fail(ErrorCode::InvalidArgument, "observational data needs at least 2 rows");
  const auto sys = obs.system_columns();
  std::vector<double> mu(obs.cols()), sd(obs.cols());
  for (int j : sys) {
    const auto col = obs.col(j);
    mu[static_cast<std::size_t>(j)] = col.mean();
    const double var = (col.array() - col.mean()).square().sum() / static_cast<double>(obs.rows() - 1);
    sd[static_cast<std::size_t>(j)] = std::sqrt(var);
    if (!(sd[static_cast<std::size_t>(j)] > 0.0))
      fail(ErrorCode::Degenerate, "observational column '" + obs.column(j).id + "' has zero standard deviation");
  }
  InterventionTruth out;
  out.truth.provenance = Provenance::InterventionEffect;
  out.truth.candidates.emplace();
  for (int j : sys) out.truth.variables.push_back(obs.column(j).id);
  for (const auto& [target, row] : iv_rows) {
    const int i = obs.index_of(target);
    if (obs.column(i).role != NodeRole::System) fail(ErrorCode::InvalidArgument, "interventions must target System columns");
    if (row.size() != obs.cols()) fail(ErrorCode::InvalidArgument, "interventional row has the wrong width");
    for (int j : sys) {
      if (j == i) continue;
      const auto ju = static_cast<std::size_t>(j);
      const Pair p{target, obs.column(j).id};
      out.effect[p] = std::abs(row[ju] - mu[ju]) / sd[ju];
      out.truth.candidates->insert(p);
    }
  }
  if (out.effect.empty()) fail(ErrorCode::InvalidArgument, "no interventional pairs");
  std::vector<double> s;
  for (const auto& [p, v] : out.effect) s.push_back(v);
  std::sort(s.begin(), s.end(), std::greater<>());
  const auto m = static_cast<std::size_t>(std::ceil(top_fraction * static_cast<double>(s.size())));
  out.threshold = s[std::max<std::size_t>(m, 1) - 1];
  for (const auto& [p, v] : out.effect)
    if (v >= out.threshold) out.truth.positives.insert(p);
  return out;
}

/// One sample per System node under a knockout of that node, without selection.
inline std::map<std::string, std::vector<double>> knockout_samples(const LinearScm& scm, std::uint64_t seed,
                                                                   std::optional<SelectionRule> selection = std::nullopt) {
  std::map<std::string, std::vector<double>> out;
  const Dmg& g = scm.graph;
  for (std::size_t v = 0; v < g.size(); ++v) {
    if (g.role(static_cast<int>(v)) != NodeRole::System) continue;
    SimulationOptions opt;
    opt.selection = selection;
    opt.intervention = Intervention{g.id(static_cast<int>(v)), InterventionKind::Knockout, 0.0};
    const Dataset d = simulate_run(scm, 1, opt, derive_seed(seed, v)).data;
    out[g.id(static_cast<int>(v))] = std::vector<double>(d.values().row(0).begin(), d.values().row(0).end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Curves

/// Score threshold equivalent to p = 0.01 for each method's score scale.
inline double marker_threshold(Method m) { return m == Method::ICP ? 0.01 : -std::log(0.01); }

struct ScoredItem {
  double score = 0.0;
  bool positive = false;
};

struct CurvePoint {
  double threshold = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  double precision = 0.0;
  double recall = 0.0;
  double tpr = 0.0;
  double fpr = 0.0;
  bool marker = false;
};

/// Sweep of unique score thresholds, descending; equal scores enter together.
/// `marker` flags the last point whose threshold is still >= marker_at.
inline std::vector<CurvePoint> sweep_curve(std::vector<ScoredItem> items, std::size_t total_positives, std::size_t total_negatives,
                                           std::optional<double> marker_at = std::nullopt) {
  std::stable_sort(items.begin(), items.end(), [](const ScoredItem& a, const ScoredItem& b) { return a.score > b.score; });
  std::vector<CurvePoint> out;
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < items.size();) {
    const double s = items[i].score;
    for (; i < items.size() && items[i].score == s; ++i) (items[i].positive ? tp : fp)++;
    CurvePoint pt;
    pt.threshold = s;
    pt.tp = tp;
    pt.fp = fp;
    pt.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    pt.recall = total_positives ? static_cast<double>(tp) / static_cast<double>(total_positives) : 0.0;
    pt.tpr = pt.recall;
    pt.fpr = total_negatives ? static_cast<double>(fp) / static_cast<double>(total_negatives) : 0.0;
    out.push_back(pt);
  }
  if (marker_at) {
    for (std::size_t k = out.size(); k-- > 0;)
      if (out[k].threshold >= *marker_at) {
        out[k].marker = true;
        break;
      }
  }
  return out;
}

/// Items for predictions evaluated against `truth`; non-candidate pairs are dropped.
inline std::vector<ScoredItem> label_predictions(const std::vector<Prediction>& preds, const GroundTruth& truth) {
  std::vector<ScoredItem> items;
  for (const auto& p : preds) {
    const Pair pr{p.source, p.target};
    if (!truth.is_candidate(pr)) continue;
    items.push_back({p.score, truth.is_positive(pr)});
  }
  return items;
}

inline std::vector<CurvePoint> pr_curve(const std::vector<Prediction>& preds, const GroundTruth& truth,
                                        std::optional<double> marker_at = std::nullopt) {
  std::size_t pos = 0;
  for (const auto& p : truth.positives)
    if (truth.is_candidate(p)) ++pos;
  return sweep_curve(label_predictions(preds, truth), pos, truth.num_candidates() - pos, marker_at);
}

inline std::vector<CurvePoint> roc_curve(const std::vector<Prediction>& preds, const GroundTruth& truth,
                                         std::optional<double> marker_at = std::nullopt) {
  return pr_curve(preds, truth, marker_at);
}

/// Step-wise average precision: sum over points of (recall gain) * precision.
/// Recall never reached by the predictions contributes nothing.
inline double average_precision(const std::vector<CurvePoint>& curve) {
  double ap = 0.0, prev = 0.0;
  for (const auto& pt : curve) {
    ap += (pt.recall - prev) * pt.precision;
    prev = pt.recall;
  }
  return ap;
}

/// Trapezoidal ROC area; unscored candidates are treated as tied below every prediction.
inline double roc_auc(const std::vector<CurvePoint>& curve) {
  double auc = 0.0, x = 0.0, y = 0.0;
  for (const auto& pt : curve) {
    auc += (pt.fpr - x) * (pt.tpr + y) / 2.0;
    x = pt.fpr;
    y = pt.tpr;
  }
  auc += (1.0 - x) * (1.0 + y) / 2.0;
  return auc;
}

/// Pointwise band of TPR at fixed FPR values for random rankings of the candidates.
struct NullBand {
  std::vector<double> fpr, lower, upper;
};

inline NullBand roc_null_band(std::size_t positives, std::size_t negatives, std::size_t permutations, std::uint64_t seed,
                              double level = 0.99, std::size_t grid = 101) {
  if (positives == 0 || negatives == 0) fail(ErrorCode::InvalidArgument, "null band needs positives and negatives");
  if (grid < 2) fail(ErrorCode::InvalidArgument, "null band needs at least 2 grid points");
  std::vector<char> labels(positives + negatives, 0);
  std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(positives), 1);
  std::vector<std::vector<double>> tpr(grid);
  std::mt19937_64 rng(seed);
  for (std::size_t b = 0; b < permutations; ++b) {
    std::shuffle(labels.begin(), labels.end(), rng);
    std::size_t tp = 0, fp = 0, g = 0;
    for (char l : labels) {
      (l ? tp : fp)++;
      const double f = static_cast<double>(fp) / static_cast<double>(negatives);
      while (g < grid && static_cast<double>(g) / static_cast<double>(grid - 1) <= f) {
        tpr[g].push_back(static_cast<double>(tp) / static_cast<double>(positives));
        ++g;
      }
    }
  }
  NullBand band;
  const double tail = (1.0 - level) / 2.0;
  for (std::size_t g = 0; g < grid; ++g) {
    auto& v = tpr[g];
    std::sort(v.begin(), v.end());
    band.fpr.push_back(static_cast<double>(g) / static_cast<double>(grid - 1));
    if (v.empty()) {
      band.lower.push_back(0.0);
      band.upper.push_back(0.0);
      continue;
    }
    auto at = [&](double q) { return v[std::min(v.size() - 1, static_cast<std::size_t>(q * static_cast<double>(v.size() - 1) + 0.5))]; };
    band.lower.push_back(at(tail));
    band.upper.push_back(at(1.0 - tail));
  }
  return band;
}

// ---------------------------------------------------------------------------
// Curve CSVs

inline void write_pr_csv_header(std::ostream& out) { out << "method,dataset,threshold,precision,recall,tp,fp,marker\n"; }
inline void write_roc_csv_header(std::ostream& out) { out << "method,dataset,threshold,fpr,tpr,tp,fp,marker\n"; }

inline void write_pr_rows(std::ostream& out, std::string_view method, std::string_view dataset, const std::vector<CurvePoint>& c) {
  for (const auto& p : c)
    out << method << ',' << dataset << ',' << format_double(p.threshold) << ',' << format_double(p.precision) << ','
        << format_double(p.recall) << ',' << p.tp << ',' << p.fp << ',' << (p.marker ? 1 : 0) << '\n';
}

inline void write_roc_rows(std::ostream& out, std::string_view method, std::string_view dataset, const std::vector<CurvePoint>& c) {
  for (const auto& p : c)
    out << method << ',' << dataset << ',' << format_double(p.threshold) << ',' << format_double(p.fpr) << ','
        << format_double(p.tpr) << ',' << p.tp << ',' << p.fp << ',' << (p.marker ? 1 : 0) << '\n';
}

/// Ground truth file: header "source,target", one positive pair per line, plus
/// a "# variables: a b c" comment naming the evaluated variables.
inline void write_truth_csv(std::ostream& out, const GroundTruth& t) {
  out << "# variables:";
  for (const auto& v : t.variables) out << ' ' << v;
  out << "\nsource,target\n";
  for (const auto& [a, b] : t.positives) out << a << ',' << b << '\n';
}

inline GroundTruth read_truth_csv(std::istream& in) {
  GroundTruth t;
  std::string line;
  bool header = false;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.rfind("# variables:", 0) == 0) {
      std::istringstream ss(line.substr(12));
      std::string v;
      while (ss >> v) t.variables.push_back(v);
      continue;
    }
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
    const auto f = detail::split_csv_line(line);
    if (!header) {
      if (f != std::vector<std::string>{"source", "target"}) fail(ErrorCode::Format, "truth CSV must start with 'source,target'");
      header = true;
      continue;
    }
    if (f.size() != 2 || f[0].empty() || f[1].empty()) fail(ErrorCode::Format, "line " + std::to_string(lineno) + ": expected 'source,target'");
    if (f[0] == f[1]) fail(ErrorCode::Format, "line " + std::to_string(lineno) + ": self-pair");
    t.positives.emplace(f[0], f[1]);
  }
  if (!header) fail(ErrorCode::Format, "truth CSV is empty");
  if (t.variables.empty()) {
    std::set<std::string> vs;
    for (const auto& [a, b] : t.positives) vs.insert({a, b});
    t.variables.assign(vs.begin(), vs.end());
  }
  return t;
}

// ---------------------------------------------------------------------------
// Running methods

struct MethodOptions {
  DecisionPolicy policy{};
  ContextTest context_test = ContextTest::PartialCorrelation;
  /// Fix V to the context column in Y-Structure searches.
  bool fix_v_to_context = false;
  /// Boosting preselection (up to 8 variables per target) for LCD / Y-Structures.
  bool preselect = false;
  IcpOptions icp{};
};

inline Preselection preselect_all(const Dataset& d, const BoostOptions& opt = {}) {
  Preselection out;
  for (int y : d.system_columns()) out[y] = boost_preselect(d, y, opt);
  return out;
}

/// Hits of a pattern method on data (not used for ICP).
inline std::vector<PatternHit> find_hits(Method m, const Dataset& d, const MethodOptions& opt = {}) {
  const DataCiModel model(d, opt.policy, opt.context_test);
  SearchOptions so;
  Preselection pre;
  if (opt.preselect) {
    pre = preselect_all(d, opt.icp.boost);
    so.preselection = &pre;
  }
  const auto ctx = d.context_index();
  if (opt.fix_v_to_context) {
    if (!ctx) fail(ErrorCode::InvalidArgument, "fixing V needs a context column");
    so.fixed_v = *ctx;
  }
  switch (m) {
    case Method::LCD:
      if (!ctx) fail(ErrorCode::InvalidArgument, "LCD needs a context column");
      return find_lcd(model, *ctx, so);
    case Method::YSt: return find_y_structures(model, false, so);
    case Method::YStExt: return find_y_structures(model, true, so);
    case Method::ICP: break;
  }
  fail(ErrorCode::InvalidArgument, "find_hits does not apply to ICP");
}

/// Scored predictions of one method on a dataset. ICP binarizes a continuous context at its mean.
inline std::vector<Prediction> run_method(Method m, const Dataset& d, const MethodOptions& opt = {}) {
  if (m == Method::ICP) {
    const auto ctx = d.context_index();
    if (!ctx) fail(ErrorCode::InvalidArgument, "ICP needs a context column");
    if (d.column(*ctx).discrete) return icp_predictions(d, opt.icp);
    return icp_predictions(d.binarized_at_mean(*ctx), opt.icp);
  }
  return score_predictions(find_hits(m, d, opt));
}

/// Oracle hits of a pattern method on a graph.
inline std::vector<PatternHit> oracle_hits(Method m, const Dmg& g, std::optional<std::string> fixed_v = std::nullopt) {
  const GraphOracle oracle(g);
  SearchOptions so;
  if (fixed_v) so.fixed_v = oracle.index_of(*fixed_v);
  switch (m) {
    case Method::LCD: {
      const auto ctx = g.nodes_with_role(NodeRole::Context);
      if (ctx.count() != 1) fail(ErrorCode::InvalidArgument, "oracle LCD needs exactly one context node");
      return find_lcd(oracle, oracle.index_of(g.id(static_cast<int>(ctx.find_first()))), so);
    }
    case Method::YSt: return find_y_structures(oracle, false, so);
    case Method::YStExt: return find_y_structures(oracle, true, so);
    case Method::ICP: break;
  }
  fail(ErrorCode::InvalidArgument, "ICP has no oracle pattern");
}

/// Mean score over B half-size subsamples drawn without replacement; a pair
/// missing from a run contributes 0. n_hits counts the runs that predicted it.
inline std::vector<Prediction> bootstrap_scores(const std::function<std::vector<Prediction>(const Dataset&)>& method, const Dataset& d,
                                                std::size_t runs, std::uint64_t seed, std::size_t threads = 0) {
  if (runs == 0) fail(ErrorCode::InvalidArgument, "bootstrap needs at least one run");
  const std::size_t half = d.rows() / 2;
  if (half < 5) fail(ErrorCode::InvalidArgument, "too few rows to subsample");
  std::vector<std::vector<Prediction>> per_run(runs);
  parallel_for(
      runs,
      [&](std::size_t b) {
        std::vector<std::size_t> idx(d.rows());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::mt19937_64 rng(derive_seed(seed, b));
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(half);
        std::sort(idx.begin(), idx.end());
        per_run[b] = method(d.select_rows(idx));
      },
      threads);
  std::map<Pair, Prediction> acc;
  for (const auto& run : per_run)
    for (const auto& p : run) {
      auto [it, fresh] = acc.try_emplace(Pair{p.source, p.target});
      if (fresh) {
        it->second.source = p.source;
        it->second.target = p.target;
        it->second.kind = p.kind;
      }
      it->second.score += p.score;
      ++it->second.n_hits;
    }
  std::vector<Prediction> out;
  for (auto& [k, p] : acc) {
    p.score /= static_cast<double>(runs);
    out.push_back(std::move(p));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Experiments

inline constexpr std::string_view kBiased = "D_S";
inline constexpr std::string_view kUnbiased = "D_0";

struct TableRow {
  Method method;
  std::string dataset;
  std::size_t n_pred = 0;
  std::size_t tp = 0;
  std::size_t fp = 0;
};

struct FixedGraphConfig {
  std::size_t models = 200;
  std::size_t n = 10000;
  std::uint64_t seed = 1;
  std::vector<Method> methods{Method::ICP, Method::LCD, Method::YSt, Method::YStExt};
  MethodOptions options{};
  SelectionRule rule{};
  std::size_t threads = 0;
};

struct FixedGraphResult {
  std::vector<TableRow> rows;  // method-major, biased before unbiased
  const TableRow& at(Method m, std::string_view dataset) const {
    for (const auto& r : rows)
      if (r.method == m && r.dataset == dataset) return r;
    fail(ErrorCode::InvalidArgument, "no table row for " + std::string(to_string(m)) + "/" + std::string(dataset));
  }
};

inline FixedGraphResult run_fixed_graph_experiment(const FixedGraphConfig& cfg) {
  const Dmg g = fixed_graph();
  const GroundTruth truth = ancestral_ground_truth(g);
  const std::size_t nm = cfg.methods.size();
  // counts[model][method][dataset] = {n_pred, tp, fp}
  std::vector<std::vector<std::array<std::array<std::size_t, 3>, 2>>> counts(cfg.models, std::vector<std::array<std::array<std::size_t, 3>, 2>>(nm));
  parallel_for(
      cfg.models,
      [&](std::size_t m) {
        const LinearScm scm = sample_weights(g, derive_seed(cfg.seed, 2 * m));
        const auto [biased, unbiased] = simulate_paired(scm, cfg.n, derive_seed(cfg.seed, 2 * m + 1), cfg.rule);
        for (std::size_t k = 0; k < nm; ++k)
          for (int ds = 0; ds < 2; ++ds) {
            const auto preds = run_method(cfg.methods[k], ds == 0 ? biased : unbiased, cfg.options);
            auto& c = counts[m][k][static_cast<std::size_t>(ds)];
            for (const auto& p : preds) {
              const Pair pr{p.source, p.target};
              if (!truth.is_candidate(pr)) continue;
              ++c[0];
              ++(truth.is_positive(pr) ? c[1] : c[2]);
            }
          }
      },
      cfg.threads);
  FixedGraphResult res;
  for (std::size_t k = 0; k < nm; ++k)
    for (int ds = 0; ds < 2; ++ds) {
      TableRow row{cfg.methods[k], std::string(ds == 0 ? kBiased : kUnbiased)};
      for (std::size_t m = 0; m < cfg.models; ++m) {
        row.n_pred += counts[m][k][static_cast<std::size_t>(ds)][0];
        row.tp += counts[m][k][static_cast<std::size_t>(ds)][1];
        row.fp += counts[m][k][static_cast<std::size_t>(ds)][2];
      }
      res.rows.push_back(row);
    }
  return res;
}

inline void write_table_csv(std::ostream& out, const FixedGraphResult& r) {
  out << "method,dataset,n_pred,tp,fp\n";
  for (const auto& row : r.rows) out << to_string(row.method) << ',' << row.dataset << ',' << row.n_pred << ',' << row.tp << ',' << row.fp << '\n';
}

struct RandomGraphConfig {
  std::size_t p = 8;
  std::size_t models = 100;
  std::vector<std::size_t> sample_sizes{10000};
  std::uint64_t seed = 1;
  std::vector<Method> methods{Method::ICP, Method::LCD, Method::YSt, Method::YStExt};
  bool biased = true;
  bool unbiased = true;
  /// Also score each pattern hit against the oracle pattern in the true graph.
  bool oracle_patterns = true;
  MethodOptions options{};
  std::optional<GraphSamplerParams> sampler;
  SelectionRule rule{};
  std::size_t threads = 0;
};

struct CurveSet {
  Method method;
  std::string dataset;
  std::size_t n = 0;
  std::size_t positives = 0;
  std::size_t negatives = 0;
  std::vector<CurvePoint> curve;
  double average_precision = 0.0;
  double auc = 0.0;
};

struct RandomGraphResult {
  std::vector<CurveSet> ancestral;        // ground truth: ancestral pairs of the sampled graph
  std::vector<CurveSet> oracle_patterns;  // ground truth: the hit's pattern holds in the sampled graph
  std::vector<std::size_t> sampler_attempts;

  const CurveSet& at(Method m, std::string_view dataset, std::size_t n) const {
    for (const auto& c : ancestral)
      if (c.method == m && c.dataset == dataset && c.n == n) return c;
    fail(ErrorCode::InvalidArgument, "no curve for " + std::string(to_string(m)) + "/" + std::string(dataset));
  }
};

inline RandomGraphResult run_random_graph_experiment(const RandomGraphConfig& cfg) {
  const GraphSamplerParams params = cfg.sampler.value_or(default_sampler_params(cfg.p));
  std::vector<std::string> datasets;
  if (cfg.biased) datasets.emplace_back(kBiased);
  if (cfg.unbiased) datasets.emplace_back(kUnbiased);
  if (datasets.empty() || cfg.methods.empty() || cfg.sample_sizes.empty())
    fail(ErrorCode::InvalidArgument, "random-graph experiment needs datasets, methods and sample sizes");
  const std::size_t nm = cfg.methods.size(), nd = datasets.size(), nn = cfg.sample_sizes.size();

  struct ModelOut {
    std::vector<ScoredItem> ancestral;
    std::vector<ScoredItem> patterns;
    std::size_t positives = 0, negatives = 0, oracle_positives = 0;
  };
  // slot index: ((model * nn + size) * nd + dataset) * nm + method
  std::vector<ModelOut> out(cfg.models * nn * nd * nm);
  std::vector<std::size_t> attempts(cfg.models);
  parallel_for(
      cfg.models,
      [&](std::size_t m) {
        const SampledGraph sg = sample_random_graph(params, derive_seed(cfg.seed, 3 * m));
        attempts[m] = sg.attempts;
        const LinearScm scm = sample_weights(sg.graph, derive_seed(cfg.seed, 3 * m + 1));
        const GroundTruth truth = ancestral_ground_truth(sg.graph);
        std::size_t pos = truth.positives.size();
        std::size_t neg = truth.num_candidates() - pos;
        std::map<Method, std::size_t> oracle_count;
        if (cfg.oracle_patterns)
          for (Method me : cfg.methods)
            if (me != Method::ICP) oracle_count[me] = oracle_hits(me, sg.graph).size();
        const GraphOracle oracle(sg.graph);
        for (std::size_t s = 0; s < nn; ++s) {
          const std::uint64_t data_seed = derive_seed(derive_seed(cfg.seed, 3 * m + 2), s);
          for (std::size_t di = 0; di < nd; ++di) {
            const bool biased = datasets[di] == kBiased;
            const Dataset d = biased ? simulate(scm, cfg.sample_sizes[s], cfg.rule, std::nullopt, derive_seed(data_seed, 0))
                                     : simulate(scm, cfg.sample_sizes[s], std::nullopt, std::nullopt, derive_seed(data_seed, 1));
            for (std::size_t k = 0; k < nm; ++k) {
              ModelOut& slot = out[((m * nn + s) * nd + di) * nm + k];
              slot.positives = pos;
              slot.negatives = neg;
              const Method me = cfg.methods[k];
              if (me == Method::ICP) {
                slot.ancestral = label_predictions(run_method(me, d, cfg.options), truth);
                continue;
              }
              const auto hits = find_hits(me, d, cfg.options);
              slot.ancestral = label_predictions(score_predictions(hits), truth);
              if (cfg.oracle_patterns) {
                slot.oracle_positives = oracle_count[me];
                for (const auto& h : hits) slot.patterns.push_back({hit_score(h), pattern_holds(oracle, h)});
              }
            }
          }
        }
      },
      cfg.threads);

  RandomGraphResult res;
  res.sampler_attempts = attempts;
  for (std::size_t s = 0; s < nn; ++s)
    for (std::size_t di = 0; di < nd; ++di)
      for (std::size_t k = 0; k < nm; ++k) {
        CurveSet anc;
        anc.method = cfg.methods[k];
        anc.dataset = datasets[di];
        anc.n = cfg.sample_sizes[s];
        CurveSet pat = anc;
        std::vector<ScoredItem> items, pitems;
        std::size_t opos = 0;
        for (std::size_t m = 0; m < cfg.models; ++m) {
          const ModelOut& slot = out[((m * nn + s) * nd + di) * nm + k];
          items.insert(items.end(), slot.ancestral.begin(), slot.ancestral.end());
          pitems.insert(pitems.end(), slot.patterns.begin(), slot.patterns.end());
          anc.positives += slot.positives;
          anc.negatives += slot.negatives;
          opos += slot.oracle_positives;
        }
        const double mark = marker_threshold(anc.method);
        anc.curve = sweep_curve(items, anc.positives, anc.negatives, mark);
        anc.average_precision = average_precision(anc.curve);
        anc.auc = roc_auc(anc.curve);
        res.ancestral.push_back(std::move(anc));
        if (cfg.oracle_patterns && cfg.methods[k] != Method::ICP) {
          pat.positives = opos;
          std::size_t neg = 0;
          for (const auto& it : pitems) neg += it.positive ? 0 : 1;
          pat.negatives = neg;
          pat.curve = sweep_curve(pitems, opos, neg, mark);
          pat.average_precision = average_precision(pat.curve);
          pat.auc = std::nan("");
          res.oracle_patterns.push_back(std::move(pat));
        }
      }
  return res;
}

inline void write_curve_sets_pr(std::ostream& out, const std::vector<CurveSet>& sets) {
  write_pr_csv_header(out);
  for (const auto& c : sets) write_pr_rows(out, to_string(c.method), c.dataset, c.curve);
}

inline void write_curve_sets_roc(std::ostream& out, const std::vector<CurveSet>& sets) {
  write_roc_csv_header(out);
  for (const auto& c : sets) write_roc_rows(out, to_string(c.method), c.dataset, c.curve);
}

// One random-ranking band per dataset; methods on the same dataset share candidates.
inline void write_roc_null_csv(std::ostream& out, const std::vector<CurveSet>& sets, std::size_t permutations,
                               std::uint64_t seed, double level = 0.99) {
  out << "dataset,fpr,lower,upper\n";
  std::set<std::string> done;
  for (const auto& c : sets) {
    if (c.positives == 0 || c.negatives == 0 || !done.insert(c.dataset).second) continue;
    const NullBand b = roc_null_band(c.positives, c.negatives, permutations, derive_seed(seed, done.size()), level);
    for (std::size_t i = 0; i < b.fpr.size(); ++i)
      out << c.dataset << ',' << format_double(b.fpr[i]) << ',' << format_double(b.lower[i]) << ','
          << format_double(b.upper[i]) << '\n';
  }
}

inline nlohmann::json summary_json(const std::vector<CurveSet>& sets) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& c : sets) {
    nlohmann::json e{{"method", std::string(to_string(c.method))},
                     {"dataset", c.dataset},
                     {"n", c.n},
                     {"positives", c.positives},
                     {"negatives", c.negatives},
                     {"predictions", c.curve.empty() ? 0 : c.curve.back().tp + c.curve.back().fp},
                     {"average_precision", c.average_precision}};
    e["auc"] = std::isfinite(c.auc) ? nlohmann::json(c.auc) : nlohmann::json(nullptr);
    j.push_back(std::move(e));
  }
  return j;
}

}  // namespace selbias

#endif  // SELBIAS_EVAL_HPP_
