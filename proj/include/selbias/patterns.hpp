#ifndef SELBIAS_PATTERNS_HPP_
#define SELBIAS_PATTERNS_HPP_

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "selbias/dataset.hpp"
#include "selbias/separation.hpp"

namespace selbias {

enum class Method { ICP, LCD, YStExt, YSt };

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::ICP: return "ICP";
    case Method::LCD: return "LCD";
    case Method::YStExt: return "YSt-Ext";
    case Method::YSt: return "YSt";
  }
  return "?";
}

inline Method parse_method(std::string_view s) {
  std::string l(s);
  std::transform(l.begin(), l.end(), l.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (l == "icp") return Method::ICP;
  if (l == "lcd") return Method::LCD;
  if (l == "yst-ext" || l == "ystext" || l == "yst_ext") return Method::YStExt;
  if (l == "yst") return Method::YSt;
  fail(ErrorCode::InvalidArgument, "unknown method '" + std::string(s) + "'");
}

/// One discovered pattern. `tuple` is <C,X,Y> for LCD and <V,W,X,Y> for the
/// Y-Structures; the claim is always tuple[-2] in an(tuple[-1]).
/// `pvalues` is empty for oracle hits.
struct PatternHit {
  Method kind = Method::LCD;
  std::vector<int> tuple;
  std::vector<std::string> names;
  std::map<std::string, double> pvalues;

  int source() const { return tuple.at(tuple.size() - 2); }
  int target() const { return tuple.back(); }
  const std::string& source_name() const { return names.at(names.size() - 2); }
  const std::string& target_name() const { return names.back(); }
  bool is_oracle() const { return pvalues.empty(); }

  friend bool operator<(const PatternHit& a, const PatternHit& b) {
    return std::tie(a.kind, a.tuple) < std::tie(b.kind, b.tuple);
  }
  friend bool operator==(const PatternHit& a, const PatternHit& b) {
    return a.kind == b.kind && a.tuple == b.tuple && a.names == b.names && a.pvalues == b.pvalues;
  }
};

struct Prediction {
  std::string source;
  std::string target;
  double score = 0.0;
  Method kind = Method::LCD;
  std::size_t n_hits = 0;
  std::vector<PatternHit> supporting_hits;
};

/// Candidate lists keyed by variable: for LCD/YSt, X ranges over preselected[Y]
/// and W over preselected[X].
using Preselection = std::map<int, std::vector<int>>;

struct SearchOptions {
  std::optional<int> fixed_v;
  const Preselection* preselection = nullptr;
};

namespace detail {

/// Memo of marginal and single-conditioned verdicts for one search call.
class VerdictCache {
 public:
  explicit VerdictCache(const CiModel& m) : m_(m), n_(m.num_variables()) {}

  const CiVerdict& get(int x, int y) { return get(x, y, -1); }

  const CiVerdict& get(int x, int y, int z) {
    if (x > y) std::swap(x, y);
    const std::uint64_t key = (static_cast<std::uint64_t>(x) * n_ + static_cast<std::uint64_t>(y)) * (n_ + 1) +
                              static_cast<std::uint64_t>(z + 1);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    CiVerdict v;
    if (z < 0) {
      v = m_.query(x, y, {});
    } else {
      const int zz[1] = {z};
      v = m_.query(x, y, zz);
    }
    return cache_.emplace(key, v).first->second;
  }

 private:
  const CiModel& m_;
  std::uint64_t n_;
  std::unordered_map<std::uint64_t, CiVerdict> cache_;
};

inline std::vector<int> candidates_for(const CiModel& m, const SearchOptions& opt, int key) {
  std::vector<int> out;
  if (opt.preselection) {
    auto it = opt.preselection->find(key);
    if (it != opt.preselection->end()) out = it->second;
    std::sort(out.begin(), out.end());
    return out;
  }
  for (std::size_t v = 0; v < m.num_variables(); ++v) out.push_back(static_cast<int>(v));
  return out;
}

inline void record(PatternHit& hit, const char* key, const CiVerdict& v) {
  if (v.p_value) hit.pvalues[key] = *v.p_value;
}

inline bool lcd_holds(VerdictCache& cache, int c, int x, int y, PatternHit* hit) {
  const auto& cx = cache.get(c, x);
  if (!cx.dependent()) return false;
  const auto& cy = cache.get(c, y);
  if (!cy.dependent()) return false;
  const auto& xy = cache.get(x, y);
  if (!xy.dependent()) return false;
  const auto& cy_x = cache.get(c, y, x);
  if (!cy_x.independent()) return false;
  if (hit) {
    record(*hit, "CX", cx);
    record(*hit, "CY", cy);
    record(*hit, "XY", xy);
    record(*hit, "CY|X", cy_x);
  }
  return true;
}

// V _||_ Y | [X]: dependent marginally, independent given X.
inline bool v_part_holds(VerdictCache& cache, int v, int x, int y) {
  return cache.get(v, y).dependent() && cache.get(v, y, x).independent();
}

inline bool w_part_holds(VerdictCache& cache, int v, int w, int x, int y, bool extended, PatternHit* hit) {
  const auto& vw = cache.get(v, w);
  if (!vw.independent()) return false;
  const auto& vw_x = cache.get(v, w, x);
  if (!vw_x.dependent()) return false;
  const auto& wy = cache.get(w, y);
  if (!extended && !wy.dependent()) return false;
  if (!extended && !cache.get(w, y, x).independent()) return false;
  if (hit) {
    record(*hit, "VY", cache.get(v, y));
    record(*hit, "VY|X", cache.get(v, y, x));
    record(*hit, "VW", vw);
    record(*hit, "VW|X", vw_x);
    record(*hit, "WY", wy);
    if (!extended) record(*hit, "WY|X", cache.get(w, y, x));
  }
  return true;
}

inline PatternHit make_hit(const CiModel& m, Method kind, std::vector<int> tuple) {
  PatternHit h;
  h.kind = kind;
  for (int v : tuple) h.names.push_back(m.name(v));
  h.tuple = std::move(tuple);
  return h;
}

}  // namespace detail

/// LCD search: every <C,X,Y> with C-X, C-Y, X-Y dependent and C _||_ Y | X.
/// X and Y range over System variables.
inline std::vector<PatternHit> find_lcd(const CiModel& m, int context, const SearchOptions& opt = {}) {
  const int n = static_cast<int>(m.num_variables());
  if (context < 0 || context >= n) fail(ErrorCode::UnknownNode, "context variable out of range");
  detail::VerdictCache cache(m);
  std::vector<PatternHit> hits;
  for (int y = 0; y < n; ++y) {
    if (y == context || m.role(y) != NodeRole::System) continue;
    for (int x : detail::candidates_for(m, opt, y)) {
      if (x == y || x == context || m.role(x) != NodeRole::System) continue;
      PatternHit hit = detail::make_hit(m, Method::LCD, {context, x, y});
      if (detail::lcd_holds(cache, context, x, y, &hit)) hits.push_back(std::move(hit));
    }
  }
  std::sort(hits.begin(), hits.end());
  return hits;
}

/// (Extended) Y-Structure search over ordered <V,W,X,Y>.
///
/// Extended: V-Y dependent, V _||_ Y | X, V _||_ W, V-W dependent given X.
/// Plain Y-Structure additionally needs W-Y dependent and W _||_ Y | X.
/// X and Y are System variables; V and W may be any variable.
inline std::vector<PatternHit> find_y_structures(const CiModel& m, bool extended, const SearchOptions& opt = {}) {
  const int n = static_cast<int>(m.num_variables());
  if (opt.fixed_v && (*opt.fixed_v < 0 || *opt.fixed_v >= n)) fail(ErrorCode::UnknownNode, "fixed V out of range");
  std::vector<PatternHit> hits;
  if (n < 4) return hits;
  detail::VerdictCache cache(m);
  const Method kind = extended ? Method::YStExt : Method::YSt;
  for (int y = 0; y < n; ++y) {
    if (m.role(y) != NodeRole::System) continue;
    for (int x : detail::candidates_for(m, opt, y)) {
      if (x == y || m.role(x) != NodeRole::System) continue;
      const std::vector<int> ws = detail::candidates_for(m, opt, x);
      for (int v = 0; v < n; ++v) {
        if (v == x || v == y || (opt.fixed_v && v != *opt.fixed_v)) continue;
        if (!detail::v_part_holds(cache, v, x, y)) continue;
        for (int w : ws) {
          if (w == v || w == x || w == y) continue;
          PatternHit hit = detail::make_hit(m, kind, {v, w, x, y});
          if (detail::w_part_holds(cache, v, w, x, y, extended, &hit)) hits.push_back(std::move(hit));
        }
      }
    }
  }
  std::sort(hits.begin(), hits.end());
  return hits;
}

/// Re-checks the defining constraints of `hit` on `m`, resolving variables by name.
inline bool pattern_holds(const CiModel& m, const PatternHit& hit) {
  std::vector<int> t;
  for (const auto& nm : hit.names) t.push_back(m.index_of(nm));
  detail::VerdictCache cache(m);
  switch (hit.kind) {
    case Method::LCD:
      return t.size() == 3 && detail::lcd_holds(cache, t[0], t[1], t[2], nullptr);
    case Method::YSt:
    case Method::YStExt:
      return t.size() == 4 && detail::v_part_holds(cache, t[0], t[2], t[3]) &&
             detail::w_part_holds(cache, t[0], t[1], t[2], t[3], hit.kind == Method::YStExt, nullptr);
    case Method::ICP:
      break;
  }
  fail(ErrorCode::InvalidArgument, "pattern_holds does not apply to ICP");
}

// ---------------------------------------------------------------------------
// Scoring

inline constexpr double kMinPValue = 1e-300;

inline double neg_log_p(double p) { return -std::log(std::max(p, kMinPValue)); }

/// Per-hit score: -log p_CY for LCD, min(-log p_VY, -log p_WY) for the Y-Structures; 1 for oracle hits.
inline double hit_score(const PatternHit& h) {
  if (h.is_oracle()) return 1.0;
  auto need = [&](const char* key) {
    auto it = h.pvalues.find(key);
    if (it == h.pvalues.end()) fail(ErrorCode::InvalidArgument, std::string("hit is missing p-value ") + key);
    return it->second;
  };
  switch (h.kind) {
    case Method::LCD: return neg_log_p(need("CY"));
    case Method::YSt:
    case Method::YStExt: return std::min(neg_log_p(need("VY")), neg_log_p(need("WY")));
    case Method::ICP: break;
  }
  fail(ErrorCode::InvalidArgument, "ICP hits are scored by the ICP module");
}

/// Groups hits by claim and keeps the best per-hit score.
inline std::vector<Prediction> score_predictions(const std::vector<PatternHit>& hits) {
  std::map<std::pair<std::string, std::string>, Prediction> grouped;
  for (const auto& h : hits) {
    const double s = hit_score(h);
    auto key = std::make_pair(h.source_name(), h.target_name());
    auto [it, fresh] = grouped.try_emplace(key);
    Prediction& p = it->second;
    if (fresh) {
      p.source = key.first;
      p.target = key.second;
      p.kind = h.kind;
      p.score = s;
    } else {
      p.score = std::max(p.score, s);
    }
    ++p.n_hits;
    p.supporting_hits.push_back(h);
  }
  std::vector<Prediction> out;
  out.reserve(grouped.size());
  for (auto& [k, p] : grouped) out.push_back(std::move(p));
  return out;
}

// ---------------------------------------------------------------------------
// Prediction CSV: source,target,score,kind,n_hits

inline void write_predictions_csv(std::ostream& out, const std::vector<Prediction>& preds) {
  out << "source,target,score,kind,n_hits\n";
  for (const auto& p : preds)
    out << p.source << ',' << p.target << ',' << format_double(p.score) << ',' << to_string(p.kind) << ',' << p.n_hits << '\n';
}

inline std::vector<Prediction> read_predictions_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || detail::split_csv_line(line) != std::vector<std::string>{"source", "target", "score", "kind", "n_hits"})
    fail(ErrorCode::Format, "prediction CSV must start with 'source,target,score,kind,n_hits'");
  std::vector<Prediction> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != 5) fail(ErrorCode::Format, "line " + std::to_string(lineno) + ": expected 5 fields");
    Prediction p;
    p.source = f[0];
    p.target = f[1];
    try {
      std::size_t pos = 0;
      p.score = std::stod(f[2], &pos);
      if (pos != f[2].size()) throw std::invalid_argument("trailing");
      p.kind = parse_method(f[3]);
      p.n_hits = static_cast<std::size_t>(std::stoul(f[4], &pos));
      if (pos != f[4].size()) throw std::invalid_argument("trailing");
    } catch (const Error&) {
      fail(ErrorCode::Format, "line " + std::to_string(lineno) + ": unknown kind '" + f[3] + "'");
    } catch (const std::exception&) {
      fail(ErrorCode::Format, "line " + std::to_string(lineno) + ": bad numeric field");
    }
    out.push_back(std::move(p));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Hit JSON: {"kind", "tuple": [names], "claim": [source, target], "pvalues": {...}}

inline nlohmann::json hit_to_json(const PatternHit& h) {
  nlohmann::json j{{"kind", std::string(to_string(h.kind))}, {"tuple", h.names}, {"claim", {h.source_name(), h.target_name()}}};
  j["pvalues"] = nlohmann::json::object();
  for (const auto& [k, v] : h.pvalues) j["pvalues"][k] = v;
  return j;
}

/// Names only; indices are resolved against `m`.
inline PatternHit hit_from_json(const nlohmann::json& j, const CiModel& m) {
  try {
    PatternHit h;
    h.kind = parse_method(j.at("kind").get<std::string>());
    h.names = j.at("tuple").get<std::vector<std::string>>();
    const std::size_t want = h.kind == Method::LCD ? 3 : 4;
    if (h.kind == Method::ICP || h.names.size() != want) fail(ErrorCode::Format, "hit tuple has the wrong length");
    for (const auto& n : h.names) h.tuple.push_back(m.index_of(n));
    if (j.contains("pvalues"))
      for (const auto& [k, v] : j.at("pvalues").items()) h.pvalues[k] = v.get<double>();
    return h;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Format, std::string("invalid hit JSON: ") + e.what());
  }
}

}  // namespace selbias

#endif  // SELBIAS_PATTERNS_HPP_
