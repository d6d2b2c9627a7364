#ifndef SELBIAS_ICP_HPP_
#define SELBIAS_ICP_HPP_

#include <algorithm>
#include <bit>
#include <cmath>
#include <iterator>
#include <map>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "selbias/citest.hpp"
#include "selbias/dataset.hpp"
#include "selbias/patterns.hpp"

namespace selbias {

struct BoostOptions {
  std::size_t max_vars = 8;
  std::size_t steps = 100;
  double step_size = 0.1;
};

/// Componentwise linear L2-boosting. Each step picks the covariate with the
/// largest absolute correlation with the current residual and moves the fit by
/// step_size times its univariate least-squares coefficient. Returns distinct
/// picks in first-pick order, truncated to max_vars.
///
/// Covariates default to all System columns other than the target.
inline std::vector<int> boost_preselect(const Dataset& d, int target, const BoostOptions& opt = {},
                                        std::optional<std::vector<int>> covariates = std::nullopt) {
  if (target < 0 || static_cast<std::size_t>(target) >= d.cols()) fail(ErrorCode::UnknownNode, "target column out of range");
  if (d.column(target).role != NodeRole::System) fail(ErrorCode::InvalidArgument, "boosting target must be a System column");
  if (opt.max_vars == 0 || !(opt.step_size > 0.0)) fail(ErrorCode::InvalidArgument, "boosting needs max_vars >= 1 and step_size > 0");
  std::vector<int> cov;
  if (covariates) {
    cov = *covariates;
  } else {
    for (int j : d.system_columns())
      if (j != target) cov.push_back(j);
  }
  const Eigen::Index n = d.values().rows();
  const auto k = static_cast<Eigen::Index>(cov.size());
  Eigen::VectorXd y = d.col(target).array() - d.col(target).mean();
  if (y.squaredNorm() <= 0.0) fail(ErrorCode::Degenerate, "boosting target '" + d.column(target).id + "' is constant");
  Eigen::MatrixXd x(n, k);
  for (Eigen::Index j = 0; j < k; ++j) x.col(j) = d.col(cov[static_cast<std::size_t>(j)]).array() - d.col(cov[static_cast<std::size_t>(j)]).mean();
  // Residual inner products c_j = <x_j, r> are updated through the Gram matrix.
  const Eigen::MatrixXd gram = x.transpose() * x;
  Eigen::VectorXd c = x.transpose() * y;
  std::vector<int> picked;
  for (std::size_t step = 0; step < opt.steps; ++step) {
    Eigen::Index best = -1;
    double best_score = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      if (gram(j, j) <= 0.0) continue;
      const double s = std::abs(c(j)) / std::sqrt(gram(j, j));
      if (s > best_score) {
        best_score = s;
        best = j;
      }
    }
    if (best < 0) break;
    const double beta = c(best) / gram(best, best);
    c -= opt.step_size * beta * gram.col(best);
    const int col = cov[static_cast<std::size_t>(best)];
    if (std::find(picked.begin(), picked.end(), col) == picked.end()) picked.push_back(col);
  }
  if (picked.size() > opt.max_vars) picked.resize(opt.max_vars);
  return picked;
}

enum class PreselectMode { Auto, Always, Never };

struct IcpOptions {
  DecisionPolicy policy{};
  /// Largest conditioning set tried; unset means every subset of the pool.
  std::optional<std::size_t> max_set_size;
  /// Auto preselects by boosting when the pool has more than 8 covariates.
  PreselectMode preselect = PreselectMode::Auto;
  BoostOptions boost{};
};

struct IcpResult {
  int target = -1;
  std::vector<int> pool;
  std::vector<std::vector<int>> accepted_sets;
  std::vector<int> parent_estimate;
  std::map<int, double> parent_pvalues;
  bool rejected = true;
  std::size_t sets_tested = 0;
};

/// Simplified Invariant Causal Prediction: exhaustive subsets of the pool,
/// mean-variance invariance test against the discrete context, intersection of
/// the accepted sets. A parent's p-value is the largest p over accepted sets
/// that contain it.
inline IcpResult icp_predict(const Dataset& d, int target, int context, const IcpOptions& opt = {}) {
  opt.policy.validate();
  if (context < 0 || static_cast<std::size_t>(context) >= d.cols()) fail(ErrorCode::UnknownNode, "context column out of range");
  if (!d.column(context).discrete) fail(ErrorCode::InvalidArgument, "ICP needs a discrete context column");
  if (target < 0 || static_cast<std::size_t>(target) >= d.cols()) fail(ErrorCode::UnknownNode, "target column out of range");
  if (d.column(target).role != NodeRole::System) fail(ErrorCode::InvalidArgument, "ICP target must be a System column");

  IcpResult res;
  res.target = target;
  for (int j : d.system_columns())
    if (j != target) res.pool.push_back(j);
  if (res.pool.empty()) fail(ErrorCode::InvalidArgument, "ICP candidate pool is empty");
  const bool boost = opt.preselect == PreselectMode::Always || (opt.preselect == PreselectMode::Auto && res.pool.size() > 8);
  if (boost) {
    res.pool = boost_preselect(d, target, opt.boost, res.pool);
    std::sort(res.pool.begin(), res.pool.end());
  }
  const std::size_t k = res.pool.size();
  if (k > 24) fail(ErrorCode::InvalidArgument, "ICP pool too large for exhaustive subsets");
  const std::size_t max_size = std::min(k, opt.max_set_size.value_or(k));

  const InvarianceTester tester(d, target, context, res.pool);
  // Subsets ordered by size, then lexicographically on the bit mask.
  std::vector<std::uint32_t> masks;
  for (std::uint32_t m = 0; m < (1u << k); ++m)
    if (static_cast<std::size_t>(std::popcount(m)) <= max_size) masks.push_back(m);
  std::stable_sort(masks.begin(), masks.end(), [](auto a, auto b) { return std::popcount(a) < std::popcount(b); });

  std::vector<int> idx;
  bool first = true;
  for (std::uint32_t m : masks) {
    idx.clear();
    for (std::size_t i = 0; i < k; ++i)
      if (m >> i & 1u) idx.push_back(static_cast<int>(i));
    double p = 0.0;
    try {
      p = tester.pvalue(idx);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::Degenerate) throw;
      continue;  // collinear subset: not testable
    }
    ++res.sets_tested;
    if (p < opt.policy.alpha) continue;
    std::vector<int> set;
    for (int i : idx) set.push_back(res.pool[static_cast<std::size_t>(i)]);
    for (int v : set) {
      auto [it, fresh] = res.parent_pvalues.try_emplace(v, p);
      if (!fresh) it->second = std::max(it->second, p);
    }
    if (first) {
      res.parent_estimate = set;
      first = false;
    } else {
      std::vector<int> meet;
      std::set_intersection(res.parent_estimate.begin(), res.parent_estimate.end(), set.begin(), set.end(), std::back_inserter(meet));
      res.parent_estimate = std::move(meet);
    }
    res.accepted_sets.push_back(std::move(set));
  }
  res.rejected = res.accepted_sets.empty();
  std::map<int, double> kept;
  for (int v : res.parent_estimate) kept[v] = res.parent_pvalues.at(v);
  res.parent_pvalues = std::move(kept);
  return res;
}

/// Runs ICP for every System target. `d` must carry a discrete context
/// column; use Dataset::binarized_at_mean first for a continuous one.
/// Each estimated parent becomes a Prediction scored by its p-value.
inline std::vector<Prediction> icp_predictions(const Dataset& d, const IcpOptions& opt = {}) {
  const auto ctx = d.context_index();
  if (!ctx) fail(ErrorCode::InvalidArgument, "ICP needs a context column");
  std::vector<Prediction> out;
  for (int y : d.system_columns()) {
    const IcpResult r = icp_predict(d, y, *ctx, opt);
    if (r.rejected) continue;
    for (const auto& [parent, p] : r.parent_pvalues) {
      Prediction pr;
      pr.source = d.column(parent).id;
      pr.target = d.column(y).id;
      pr.score = p;
      pr.kind = Method::ICP;
      pr.n_hits = 1;
      out.push_back(std::move(pr));
    }
  }
  std::sort(out.begin(), out.end(), [](const Prediction& a, const Prediction& b) {
    return std::tie(a.source, a.target) < std::tie(b.source, b.target);
  });
  return out;
}

}  // namespace selbias

#endif  // SELBIAS_ICP_HPP_
