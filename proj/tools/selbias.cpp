// selbias command-line tool.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "selbias/selbias.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace selbias;

namespace {

constexpr const char* kVersion = "0.1.0";

struct Global {
  std::uint64_t seed = 1;
  std::size_t threads = 0;
  std::vector<std::string> argv;
};

std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(p.parent_path(), ec);
  }
  std::ofstream out(p, std::ios::binary);
  if (!out) fail(ErrorCode::Io, "cannot write '" + p.string() + "'");
  return out;
}

void ensure_dir(const fs::path& d) {
  std::error_code ec;
  fs::create_directories(d, ec);
  if (ec || !fs::is_directory(d)) fail(ErrorCode::Io, "cannot create directory '" + d.string() + "'");
}

void write_text(const fs::path& p, const std::string& text) {
  auto out = open_out(p);
  out << text;
}

void write_manifest(const fs::path& p, const Global& g, const std::string& command, const json& config,
                    const std::vector<std::string>& outputs) {
  json m{{"tool", "selbias"}, {"version", kVersion}, {"command", command}, {"argv", g.argv}, {"seed", g.seed},
         {"config", config}, {"outputs", outputs}};
  write_text(p, m.dump(2) + "\n");
}

/// Output either to a file (plus `<file>.manifest.json`) or to stdout.
template <typename Fn>
void emit(const std::string& out, const Global& g, const std::string& command, const json& config, Fn&& write) {
  if (out.empty() || out == "-") {
    write(std::cout);
    return;
  }
  {
    auto f = open_out(out);
    write(f);
  }
  write_manifest(out + ".manifest.json", g, command, config, {fs::path(out).filename().string()});
}

Dmg load_graph_arg(const std::string& path) {
  if (path == "fixed") return fixed_graph();
  return read_graph_file(path);
}

DecisionPolicy make_policy(double alpha, bool dual, std::size_t divisor) {
  DecisionPolicy p;
  p.alpha = alpha;
  p.mode = dual ? ThresholdMode::Dual : ThresholdMode::Single;
  p.dual_divisor = divisor;
  p.validate();
  return p;
}

std::vector<Method> parse_methods(const std::vector<std::string>& names) {
  std::vector<Method> out;
  for (const auto& n : names) {
    try {
      out.push_back(parse_method(n));
    } catch (const Error& e) {
      fail(ErrorCode::Usage, e.what());
    }
  }
  return out;
}

std::vector<std::string> method_names(const std::vector<Method>& ms) {
  std::vector<std::string> out;
  for (Method m : ms) out.emplace_back(to_string(m));
  return out;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string graph = "fixed";
  std::string scm;
  std::size_t random_p = 0;
  std::size_t n = 10000;
  bool paired = false;
  bool no_selection = false;
  std::string intervene;
  std::string knockout;
  double lower = 2.0, upper = 2.5;
  std::string out_dir = "out";
};

void run_simulate(const SimulateArgs& a, const Global& g) {
  Dmg graph;
  LinearScm scm;
  if (!a.scm.empty()) {
    std::ifstream in(a.scm);
    if (!in) fail(ErrorCode::Io, "cannot open SCM file '" + a.scm + "'");
    try {
      scm = scm_from_json(json::parse(in));
    } catch (const json::exception& e) {
      fail(ErrorCode::Format, std::string("invalid SCM JSON: ") + e.what());
    }
    graph = scm.graph;
  } else {
    if (a.random_p > 0)
      graph = sample_random_graph(default_sampler_params(a.random_p), derive_seed(g.seed, 0)).graph;
    else
      graph = load_graph_arg(a.graph);
    scm = sample_weights(graph, derive_seed(g.seed, 1));
  }
  const SelectionRule rule{a.lower, a.upper};
  std::optional<Intervention> iv;
  if (!a.intervene.empty()) {
    const auto eq = a.intervene.find('=');
    if (eq == std::string::npos) fail(ErrorCode::Usage, "--intervene expects NODE=VALUE");
    double v = 0.0;
    try {
      v = std::stod(a.intervene.substr(eq + 1));
    } catch (...) {
      fail(ErrorCode::Usage, "--intervene expects NODE=VALUE");
    }
    iv = Intervention{a.intervene.substr(0, eq), InterventionKind::SetValue, v};
  } else if (!a.knockout.empty()) {
    iv = Intervention{a.knockout, InterventionKind::Knockout, 0.0};
  }

  const fs::path dir(a.out_dir);
  ensure_dir(dir);
  std::vector<std::string> outputs{"graph.txt", "scm.json", "truth.csv"};
  write_text(dir / "graph.txt", format_graph(graph));
  write_text(dir / "scm.json", scm_to_json(scm).dump(2) + "\n");
  {
    auto t = open_out(dir / "truth.csv");
    write_truth_csv(t, ancestral_ground_truth(graph));
  }
  const std::uint64_t data_seed = derive_seed(g.seed, 2);
  if (a.paired) {
    if (iv) fail(ErrorCode::Usage, "--paired cannot be combined with interventions");
    const auto [biased, unbiased] = simulate_paired(scm, a.n, data_seed, rule);
    write_dataset((dir / "biased.csv").string(), biased);
    write_dataset((dir / "unbiased.csv").string(), unbiased);
    outputs.insert(outputs.end(), {"biased.csv", "biased.csv.json", "unbiased.csv", "unbiased.csv.json"});
  } else {
    std::optional<SelectionRule> sel;
    if (!a.no_selection) sel = rule;
    const Dataset d = simulate(scm, a.n, sel, iv, data_seed);
    write_dataset((dir / "data.csv").string(), d);
    outputs.insert(outputs.end(), {"data.csv", "data.csv.json"});
  }
  json cfg{{"graph", a.scm.empty() ? (a.random_p ? "random p=" + std::to_string(a.random_p) : a.graph) : a.scm},
           {"n", a.n},
           {"paired", a.paired},
           {"selection", !a.no_selection},
           {"selection_rule", {a.lower, a.upper}},
           {"intervene", a.intervene},
           {"knockout", a.knockout}};
  write_manifest(dir / "manifest.json", g, "simulate", cfg, outputs);
}

// ---------------------------------------------------------------------------

struct DiscoverArgs {
  std::string data;
  std::string meta;
  std::vector<std::string> methods{"lcd"};
  double alpha = 0.01;
  bool dual = false;
  std::size_t dual_divisor = 0;
  std::string context_test = "pc";
  std::string fixed_v;
  bool preselect = false;
  std::size_t bootstrap = 0;
  std::string out;
  std::string hits_out;
};

void run_discover(const DiscoverArgs& a, const Global& g) {
  const auto methods = parse_methods(a.methods);
  const Dataset d = read_dataset(a.data, a.meta.empty() ? std::nullopt : std::optional<std::string>(a.meta));
  MethodOptions opt;
  opt.policy = make_policy(a.alpha, a.dual, a.dual_divisor ? a.dual_divisor : std::max<std::size_t>(1, d.cols()));
  if (a.context_test == "mv")
    opt.context_test = ContextTest::MeanVariance;
  else if (a.context_test != "pc")
    fail(ErrorCode::Usage, "--context-test must be 'pc' or 'mv'");
  opt.preselect = a.preselect;
  opt.icp.policy = opt.policy;
  SearchOptions so;
  std::optional<int> fixed_v;
  if (!a.fixed_v.empty()) fixed_v = d.index_of(a.fixed_v);

  std::vector<Prediction> all;
  json hits_json = json::array();
  for (Method m : methods) {
    auto one = [&](const Dataset& data) {
      if (m == Method::ICP) return run_method(m, data, opt);
      const DataCiModel model(data, opt.policy, opt.context_test);
      SearchOptions s;
      Preselection pre;
      if (opt.preselect) {
        pre = preselect_all(data, opt.icp.boost);
        s.preselection = &pre;
      }
      s.fixed_v = fixed_v;
      std::vector<PatternHit> hits;
      if (m == Method::LCD) {
        const auto ctx = data.context_index();
        if (!ctx) fail(ErrorCode::InvalidArgument, "LCD needs a context column (mark it in the sidecar JSON)");
        hits = find_lcd(model, *ctx, s);
      } else {
        hits = find_y_structures(model, m == Method::YStExt, s);
      }
      return score_predictions(hits);
    };
    std::vector<Prediction> preds;
    if (a.bootstrap > 0) {
      preds = bootstrap_scores(one, d, a.bootstrap, derive_seed(g.seed, static_cast<std::uint64_t>(m)), g.threads);
    } else {
      preds = one(d);
      for (const auto& p : preds)
        for (const auto& h : p.supporting_hits) hits_json.push_back(hit_to_json(h));
    }
    all.insert(all.end(), preds.begin(), preds.end());
  }
  json cfg{{"data", a.data}, {"methods", method_names(methods)}, {"alpha", a.alpha}, {"dual", a.dual},
           {"context_test", a.context_test}, {"fixed_v", a.fixed_v}, {"preselect", a.preselect}, {"bootstrap", a.bootstrap}};
  emit(a.out, g, "discover", cfg, [&](std::ostream& os) { write_predictions_csv(os, all); });
  if (!a.hits_out.empty()) write_text(a.hits_out, hits_json.dump(2) + "\n");
}

// ---------------------------------------------------------------------------

struct OracleArgs {
  std::string graph;
  std::vector<std::string> methods{"lcd", "yst", "yst-ext"};
  std::string fixed_v;
  std::string out;
};

void run_oracle(const OracleArgs& a, const Global& g) {
  const Dmg graph = load_graph_arg(a.graph);
  json j = json::object();
  j["graph"] = a.graph;
  j["hits"] = json::array();
  for (Method m : parse_methods(a.methods)) {
    const auto hits = oracle_hits(m, graph, a.fixed_v.empty() ? std::nullopt : std::optional<std::string>(a.fixed_v));
    for (const auto& h : hits) j["hits"].push_back(hit_to_json(h));
  }
  json cfg{{"graph", a.graph}, {"methods", a.methods}, {"fixed_v", a.fixed_v}};
  emit(a.out, g, "oracle-discover", cfg, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
}

// ---------------------------------------------------------------------------

struct Enumerate3Args {
  std::size_t selection = 1;
  bool jci = false;
  bool sinks = false;
  std::string out;
};

void run_enumerate3(const Enumerate3Args& a, const Global& g) {
  const ThreeVarReport r = verify_no_sound_3var_rule(a.selection, a.jci, a.sinks, g.threads);
  const json j = to_json(r);
  json cfg{{"selection", a.selection}, {"jci", a.jci}, {"selection_sinks", a.sinks}};
  emit(a.out, g, "enumerate3", cfg, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
  if (!a.out.empty() && a.out != "-")
    std::cout << "graphs " << r.filtered_graphs << " of " << r.raw_graphs << ", buckets " << r.buckets.size()
              << ", forcing buckets " << r.forcing_buckets << " (with active selection " << r.forcing_selection_buckets
              << "), LCD buckets force X in an(Y): " << (r.lcd_forces_x_anc_y ? "yes" : "no") << '\n';
}

// ---------------------------------------------------------------------------

struct VerifyYstArgs {
  std::size_t graphs = 100000;
  std::size_t max_selection = 2;
  std::size_t min_nodes = 4, max_nodes = 6;
  bool acyclic = false;
  double sparse_fraction = 0.5;
  std::vector<std::string> inject;
  std::string out;
};

void run_verify_yst(const VerifyYstArgs& a, const Global& g) {
  YStSamplerOptions opt;
  opt.min_observables = a.min_nodes;
  opt.max_observables = a.max_nodes;
  opt.max_selection = a.max_selection;
  opt.allow_cycles = !a.acyclic;
  opt.sparse_fraction = a.sparse_fraction;
  if (!(a.sparse_fraction >= 0.0 && a.sparse_fraction <= 1.0)) fail(ErrorCode::Usage, "--sparse-fraction must lie in [0, 1]");
  YStVerificationReport r = verify_extended_ystructure(a.graphs, g.seed, opt, g.threads);
  json injected = json::array();
  for (const auto& path : a.inject) {
    YStVerificationReport one;
    check_ystructures_on(load_graph_arg(path), one);
    injected.push_back({{"graph", path}, {"hits", one.hits}, {"counterexamples", one.counterexamples}});
    r.hits += one.hits;
    r.counterexamples += one.counterexamples;
  }
  json j = to_json(r);
  j["injected"] = injected;
  json cfg{{"graphs", a.graphs}, {"max_selection", a.max_selection}, {"min_nodes", a.min_nodes}, {"max_nodes", a.max_nodes},
           {"cycles", !a.acyclic}, {"sparse_fraction", a.sparse_fraction}, {"inject", a.inject}};
  emit(a.out, g, "verify-yst", cfg, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
}

// ---------------------------------------------------------------------------

struct FixedArgs {
  std::size_t models = 200;
  std::size_t n = 10000;
  std::vector<std::string> methods{"icp", "lcd", "yst", "yst-ext"};
  std::string out_dir;
};

void run_fixed(const FixedArgs& a, const Global& g) {
  FixedGraphConfig cfg;
  cfg.models = a.models;
  cfg.n = a.n;
  cfg.seed = g.seed;
  cfg.methods = parse_methods(a.methods);
  cfg.threads = g.threads;
  const FixedGraphResult r = run_fixed_graph_experiment(cfg);
  write_table_csv(std::cout, r);
  if (!a.out_dir.empty()) {
    ensure_dir(a.out_dir);
    auto out = open_out(fs::path(a.out_dir) / "table.csv");
    write_table_csv(out, r);
    write_manifest(fs::path(a.out_dir) / "manifest.json", g, "experiment fixed-graph",
                   {{"models", a.models}, {"n", a.n}, {"methods", method_names(cfg.methods)}}, {"table.csv"});
  }
}

constexpr std::size_t kNullPermutations = 1000;

struct RandomArgs {
  std::size_t p = 8;
  std::size_t models = 100;
  std::vector<std::size_t> n{10000};
  std::vector<std::string> methods{"icp", "lcd", "yst", "yst-ext"};
  bool biased_only = false;
  bool no_oracle_patterns = false;
  std::string out_dir = "random-graphs";
};

void run_random(const RandomArgs& a, const Global& g) {
  RandomGraphConfig cfg;
  cfg.p = a.p;
  cfg.models = a.models;
  cfg.sample_sizes = a.n;
  cfg.seed = g.seed;
  cfg.methods = parse_methods(a.methods);
  cfg.unbiased = !a.biased_only;
  cfg.oracle_patterns = !a.no_oracle_patterns;
  cfg.threads = g.threads;
  const RandomGraphResult r = run_random_graph_experiment(cfg);
  const fs::path dir(a.out_dir);
  ensure_dir(dir);
  std::vector<std::string> outputs;
  for (std::size_t n : a.n) {
    std::vector<CurveSet> anc, pat;
    for (const auto& c : r.ancestral)
      if (c.n == n) anc.push_back(c);
    for (const auto& c : r.oracle_patterns)
      if (c.n == n) pat.push_back(c);
    const std::string suffix = a.n.size() > 1 ? "_n" + std::to_string(n) : "";
    {
      auto out = open_out(dir / ("pr" + suffix + ".csv"));
      write_curve_sets_pr(out, anc);
      auto roc = open_out(dir / ("roc" + suffix + ".csv"));
      write_curve_sets_roc(roc, anc);
      auto null = open_out(dir / ("roc_null" + suffix + ".csv"));
      write_roc_null_csv(null, anc, kNullPermutations, derive_seed(g.seed, n));
    }
    outputs.push_back("pr" + suffix + ".csv");
    outputs.push_back("roc" + suffix + ".csv");
    outputs.push_back("roc_null" + suffix + ".csv");
    if (!pat.empty()) {
      auto out = open_out(dir / ("pr_oracle_patterns" + suffix + ".csv"));
      write_curve_sets_pr(out, pat);
      outputs.push_back("pr_oracle_patterns" + suffix + ".csv");
    }
  }
  json summary{{"ancestral", summary_json(r.ancestral)}, {"oracle_patterns", summary_json(r.oracle_patterns)},
               {"sampler_attempts", r.sampler_attempts}};
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  outputs.push_back("summary.json");
  write_manifest(dir / "manifest.json", g, "experiment random-graphs",
                 {{"p", a.p}, {"models", a.models}, {"n", a.n}, {"methods", method_names(cfg.methods)},
                  {"unbiased", cfg.unbiased}, {"oracle_patterns", cfg.oracle_patterns}},
                 outputs);
  for (const auto& c : r.ancestral)
    std::cout << to_string(c.method) << ',' << c.dataset << ",n=" << c.n << ",AP=" << format_double(c.average_precision) << '\n';
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::vector<std::string> predictions;
  std::string truth;
  std::string graph;
  bool include_context = false;
  std::string dataset = "data";
  std::string out_dir = "eval";
};

void run_eval(const EvalArgs& a, const Global& g) {
  GroundTruth truth;
  if (!a.truth.empty() == !a.graph.empty()) fail(ErrorCode::Usage, "give exactly one of --truth or --graph");
  if (!a.truth.empty()) {
    std::ifstream in(a.truth);
    if (!in) fail(ErrorCode::Io, "cannot open truth file '" + a.truth + "'");
    truth = read_truth_csv(in);
  } else {
    truth = ancestral_ground_truth(load_graph_arg(a.graph), a.include_context);
  }
  std::map<Method, std::vector<Prediction>> by_method;
  for (const auto& path : a.predictions) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::Io, "cannot open predictions '" + path + "'");
    for (auto& p : read_predictions_csv(in)) by_method[p.kind].push_back(std::move(p));
  }
  std::vector<CurveSet> sets;
  for (auto& [m, preds] : by_method) {
    CurveSet c;
    c.method = m;
    c.dataset = a.dataset;
    c.curve = pr_curve(preds, truth, marker_threshold(m));
    for (const auto& p : truth.positives)
      if (truth.is_candidate(p)) ++c.positives;
    c.negatives = truth.num_candidates() - c.positives;
    c.average_precision = average_precision(c.curve);
    c.auc = roc_auc(c.curve);
    sets.push_back(std::move(c));
  }
  const fs::path dir(a.out_dir);
  ensure_dir(dir);
  {
    auto pr = open_out(dir / "pr.csv");
    write_curve_sets_pr(pr, sets);
    auto roc = open_out(dir / "roc.csv");
    write_curve_sets_roc(roc, sets);
    auto null = open_out(dir / "roc_null.csv");
    write_roc_null_csv(null, sets, kNullPermutations, g.seed);
  }
  write_text(dir / "summary.json", summary_json(sets).dump(2) + "\n");
  write_manifest(dir / "manifest.json", g, "eval",
                 {{"predictions", a.predictions}, {"truth", a.truth}, {"graph", a.graph}, {"include_context", a.include_context},
                  {"dataset", a.dataset}},
                 {"pr.csv", "roc.csv", "roc_null.csv", "summary.json"});
}

int report_error(ErrorCode code, const std::string& msg) {
  json e{{"error", {{"code", static_cast<int>(code)}, {"kind", std::string(to_string(code))}, {"message", msg}}}};
  std::cerr << e.dump() << '\n';
  return static_cast<int>(code);
}

}  // namespace

int main(int argc, char** argv) {
  Global g;
  for (int i = 1; i < argc; ++i) g.argv.emplace_back(argv[i]);

  CLI::App app{"Causal discovery under selection bias: simulation, pattern search, enumeration and evaluation"};
  app.set_version_flag("--version", std::string("selbias ") + kVersion);
  app.require_subcommand(1);
  app.add_option("--seed", g.seed, "Root seed for every random stream")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads (default: SELBIAS_THREADS or all cores)");

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Sample a linear-Gaussian SCM and write datasets");
  c_sim->add_option("--graph", sim.graph, "Graph file, or 'fixed' for the benchmark graph")->capture_default_str();
  c_sim->add_option("--scm", sim.scm, "SCM JSON with explicit weights (overrides --graph)");
  c_sim->add_option("--random", sim.random_p, "Sample a random graph with this many system variables (8 or 16)");
  c_sim->add_option("--n", sim.n, "Rows per dataset")->capture_default_str();
  c_sim->add_flag("--paired", sim.paired, "Write biased.csv and unbiased.csv");
  c_sim->add_flag("--no-selection", sim.no_selection, "Disable the selection mechanism");
  c_sim->add_option("--intervene", sim.intervene, "Perfect intervention NODE=VALUE");
  c_sim->add_option("--knockout", sim.knockout, "Knockout intervention on NODE");
  c_sim->add_option("--lower", sim.lower, "Selection window lower bound")->capture_default_str();
  c_sim->add_option("--upper", sim.upper, "Selection window upper bound")->capture_default_str();
  c_sim->add_option("--out-dir", sim.out_dir, "Output directory")->capture_default_str();

  DiscoverArgs dis;
  auto* c_dis = app.add_subcommand("discover", "Run pattern methods or ICP on a dataset");
  c_dis->add_option("data", dis.data, "Dataset CSV (roles from <data>.json)")->required();
  c_dis->add_option("--meta", dis.meta, "Sidecar JSON with context/discrete columns");
  c_dis->add_option("--method", dis.methods, "lcd, yst, yst-ext, icp (repeatable)")->capture_default_str();
  c_dis->add_option("--alpha", dis.alpha, "Significance threshold")->capture_default_str();
  c_dis->add_flag("--dual", dis.dual, "Dual thresholds: independent above alpha, dependent below alpha/divisor");
  c_dis->add_option("--dual-divisor", dis.dual_divisor, "Divisor for the lower threshold (default: column count)");
  c_dis->add_option("--context-test", dis.context_test, "Test for queries with the context: pc or mv")->capture_default_str();
  c_dis->add_option("--fixed-v", dis.fixed_v, "Fix V in Y-Structure searches to this column");
  c_dis->add_flag("--preselect", dis.preselect, "Boosting preselection of X and W candidates");
  c_dis->add_option("--bootstrap", dis.bootstrap, "Average scores over this many half subsamples");
  c_dis->add_option("-o,--out", dis.out, "Prediction CSV (default: stdout)");
  c_dis->add_option("--hits", dis.hits_out, "Also write supporting hits as JSON");

  OracleArgs orc;
  auto* c_orc = app.add_subcommand("oracle-discover", "List pattern hits under the sigma-separation oracle");
  c_orc->add_option("graph", orc.graph, "Graph file, or 'fixed'")->required();
  c_orc->add_option("--method", orc.methods, "lcd, yst, yst-ext (repeatable)")->capture_default_str();
  c_orc->add_option("--fixed-v", orc.fixed_v, "Fix V in Y-Structure searches");
  c_orc->add_option("-o,--out", orc.out, "Output JSON (default: stdout)");

  Enumerate3Args en;
  auto* c_en = app.add_subcommand("enumerate3", "Exhaustive three-variable check over all DMGs on {C,X,Y} plus selection");
  c_en->add_option("--selection", en.selection, "Number of selection nodes (0-2)")->capture_default_str();
  c_en->add_flag("--jci", en.jci, "Keep only graphs where C has no non-context ancestors");
  c_en->add_flag("--sink-selection", en.sinks, "Selection nodes have no children");
  c_en->add_option("-o,--out", en.out, "Report JSON (default: stdout)");

  VerifyYstArgs vy;
  auto* c_vy = app.add_subcommand("verify-yst", "Randomized check of Extended Y-Structure conclusions");
  c_vy->add_option("--graphs", vy.graphs, "Random graphs to check")->capture_default_str();
  c_vy->add_option("--max-selection", vy.max_selection, "Up to this many selection nodes")->capture_default_str();
  c_vy->add_option("--min-nodes", vy.min_nodes, "Fewest observed nodes")->capture_default_str();
  c_vy->add_option("--max-nodes", vy.max_nodes, "Most observed nodes")->capture_default_str();
  c_vy->add_flag("--acyclic", vy.acyclic, "Only acyclic graphs");
  c_vy->add_option("--sparse-fraction", vy.sparse_fraction, "Share of graphs drawn with sparse edge states")->capture_default_str();
  c_vy->add_option("--inject", vy.inject, "Extra graph files to check (repeatable)");
  c_vy->add_option("-o,--out", vy.out, "Report JSON (default: stdout)");

  auto* c_exp = app.add_subcommand("experiment", "Simulation experiments");
  c_exp->require_subcommand(1);
  FixedArgs fx;
  auto* c_fx = c_exp->add_subcommand("fixed-graph", "Benchmark graph: #Pred/TP/FP per method and dataset");
  c_fx->add_option("--models", fx.models, "Random weight draws")->capture_default_str();
  c_fx->add_option("--n", fx.n, "Rows per dataset")->capture_default_str();
  c_fx->add_option("--method", fx.methods, "Methods (repeatable)")->capture_default_str();
  c_fx->add_option("--out-dir", fx.out_dir, "Also write table.csv and manifest.json here");
  RandomArgs rg;
  auto* c_rg = c_exp->add_subcommand("random-graphs", "Random graphs: PR/ROC curve CSVs");
  c_rg->add_option("--p", rg.p, "System variables (8 or 16)")->capture_default_str();
  c_rg->add_option("--models", rg.models, "Random graphs")->capture_default_str();
  c_rg->add_option("--n", rg.n, "Rows per dataset (repeatable for a sweep)")->capture_default_str();
  c_rg->add_option("--method", rg.methods, "Methods (repeatable)")->capture_default_str();
  c_rg->add_flag("--biased-only", rg.biased_only, "Skip the selection-free datasets");
  c_rg->add_flag("--no-oracle-patterns", rg.no_oracle_patterns, "Skip the oracle-pattern curves");
  c_rg->add_option("--out-dir", rg.out_dir, "Output directory")->capture_default_str();

  EvalArgs ev;
  auto* c_ev = app.add_subcommand("eval", "PR/ROC curves for prediction CSVs against a ground truth");
  c_ev->add_option("predictions", ev.predictions, "Prediction CSVs")->required();
  c_ev->add_option("--truth", ev.truth, "Truth CSV (source,target)");
  c_ev->add_option("--graph", ev.graph, "Graph file for ancestral ground truth, or 'fixed'");
  c_ev->add_flag("--include-context", ev.include_context, "Evaluate context-sourced pairs too");
  c_ev->add_option("--dataset", ev.dataset, "Dataset label in the CSVs")->capture_default_str();
  c_ev->add_option("--out-dir", ev.out_dir, "Output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return report_error(ErrorCode::Usage, e.what());
  }

  try {
    if (*c_sim) run_simulate(sim, g);
    else if (*c_dis) run_discover(dis, g);
    else if (*c_orc) run_oracle(orc, g);
    else if (*c_en) run_enumerate3(en, g);
    else if (*c_vy) run_verify_yst(vy, g);
    else if (*c_fx) run_fixed(fx, g);
    else if (*c_rg) run_random(rg, g);
    else if (*c_ev) run_eval(ev, g);
  } catch (const Error& e) {
    return report_error(e.code(), e.what());
  } catch (const std::exception& e) {
    return report_error(ErrorCode::InvalidArgument, e.what());
  }
  return 0;
}
