#ifndef SELBIAS_CITEST_HPP_
#define SELBIAS_CITEST_HPP_

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "selbias/dataset.hpp"
#include "selbias/separation.hpp"

namespace selbias {

enum class ThresholdMode { Single, Dual };

struct DecisionPolicy {
  double alpha = 0.01;
  ThresholdMode mode = ThresholdMode::Single;
  /// Lower threshold is alpha / dual_divisor; conventionally the variable count.
  std::size_t dual_divisor = 1;

  void validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) fail(ErrorCode::InvalidArgument, "alpha must lie in (0, 1)");
    if (dual_divisor == 0) fail(ErrorCode::InvalidArgument, "dual_divisor must be positive");
  }
};

/// Maps a p-value to a verdict. With the usual null of independence, small p
/// means Dependent; the dual-threshold band [alpha/divisor, alpha) is Inconclusive.
inline CiVerdict decide(double p, const DecisionPolicy& policy, bool null_is_independence = true) {
  policy.validate();
  Verdict reject = null_is_independence ? Verdict::Dependent : Verdict::Independent;
  Verdict accept = null_is_independence ? Verdict::Independent : Verdict::Dependent;
  Verdict v;
  if (policy.mode == ThresholdMode::Single) {
    v = p < policy.alpha ? reject : accept;
  } else {
    const double lower = policy.alpha / static_cast<double>(policy.dual_divisor);
    v = p >= policy.alpha ? accept : (p < lower ? reject : Verdict::Inconclusive);
  }
  return CiVerdict{v, p};
}

// ---------------------------------------------------------------------------
// Fisher-z partial correlation

inline constexpr double kMaxAbsCorrelation = 1.0 - 1e-12;

/// Two-sided Fisher-z p-value for partial correlation r on n samples given k conditioning variables.
inline double fisher_z_pvalue(double r, std::size_t n, std::size_t k) {
  if (n <= k + 3) fail(ErrorCode::InvalidArgument, "Fisher-z test needs more than |Z| + 3 samples");
  r = std::clamp(r, -kMaxAbsCorrelation, kMaxAbsCorrelation);
  const double stat = std::atanh(r) * std::sqrt(static_cast<double>(n - k - 3));
  return std::erfc(std::abs(stat) / std::sqrt(2.0));
}

/// Sample correlation matrix. Throws Degenerate on a constant column.
inline Eigen::MatrixXd correlation_matrix(const Eigen::MatrixXd& values) {
  const Eigen::RowVectorXd mean = values.colwise().mean();
  const Eigen::MatrixXd centered = values.rowwise() - mean;
  Eigen::MatrixXd cov = centered.transpose() * centered;
  const Eigen::VectorXd sd = cov.diagonal().array().sqrt();
  for (Eigen::Index j = 0; j < sd.size(); ++j)
    if (!(sd(j) > 1e-12 * std::sqrt(static_cast<double>(std::max<Eigen::Index>(values.rows(), 1)))))
      fail(ErrorCode::Degenerate, "column " + std::to_string(j) + " has zero variance");
  Eigen::MatrixXd corr = cov.array() / (sd * sd.transpose()).array();
  corr.diagonal().setOnes();
  return corr;
}

/// Partial correlation of x and y given z, from a correlation (or covariance) matrix.
inline double partial_correlation(const Eigen::MatrixXd& corr, int x, int y, std::span<const int> z) {
  if (z.empty()) {
    return corr(x, y) / std::sqrt(corr(x, x) * corr(y, y));
  }
  if (z.size() == 1) {
    const int c = z[0];
    const double rxy = corr(x, y) / std::sqrt(corr(x, x) * corr(y, y));
    const double rxz = corr(x, c) / std::sqrt(corr(x, x) * corr(c, c));
    const double ryz = corr(y, c) / std::sqrt(corr(y, y) * corr(c, c));
    const double dx = 1.0 - rxz * rxz, dy = 1.0 - ryz * ryz;
    if (dx <= 1e-14 || dy <= 1e-14) fail(ErrorCode::Degenerate, "variable is determined by the conditioning set");
    return (rxy - rxz * ryz) / std::sqrt(dx * dy);
  }
  const auto k = static_cast<Eigen::Index>(z.size());
  Eigen::MatrixXd rzz(k, k);
  Eigen::VectorXd rxz(k), ryz(k);
  for (Eigen::Index a = 0; a < k; ++a) {
    rxz(a) = corr(x, z[static_cast<std::size_t>(a)]);
    ryz(a) = corr(y, z[static_cast<std::size_t>(a)]);
    for (Eigen::Index b = 0; b < k; ++b) rzz(a, b) = corr(z[static_cast<std::size_t>(a)], z[static_cast<std::size_t>(b)]);
  }
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(rzz);
  if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() <= 1e-14 * rzz.diagonal().maxCoeff())
    fail(ErrorCode::Degenerate, "conditioning set is collinear");
  const Eigen::VectorXd bx = ldlt.solve(rxz), by = ldlt.solve(ryz);
  const double cxy = corr(x, y) - rxz.dot(by);
  const double vx = corr(x, x) - rxz.dot(bx);
  const double vy = corr(y, y) - ryz.dot(by);
  if (vx <= 1e-14 * corr(x, x) || vy <= 1e-14 * corr(y, y))
    fail(ErrorCode::Degenerate, "variable is determined by the conditioning set");
  return cxy / std::sqrt(vx * vy);
}

inline void check_test_columns(const Dataset& d, int x, int y, std::span<const int> z) {
  auto in_range = [&](int j) {
    if (j < 0 || static_cast<std::size_t>(j) >= d.cols()) fail(ErrorCode::UnknownNode, "column index out of range");
  };
  in_range(x);
  in_range(y);
  for (int c : z) {
    in_range(c);
    if (c == x || c == y) fail(ErrorCode::InvalidArgument, "X and Y must not be in the conditioning set");
  }
}

/// Fisher-z partial-correlation test of x _||_ y | z. Returns the two-sided p-value.
inline double partial_correlation_test(const Dataset& d, int x, int y, std::span<const int> z) {
  check_test_columns(d, x, y, z);
  if (d.rows() <= z.size() + 3) fail(ErrorCode::InvalidArgument, "insufficient rows for partial correlation test");
  std::vector<int> cols{x, y};
  cols.insert(cols.end(), z.begin(), z.end());
  Eigen::MatrixXd sub(d.values().rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) sub.col(static_cast<Eigen::Index>(j)) = d.col(cols[j]);
  const Eigen::MatrixXd corr = correlation_matrix(sub);
  std::vector<int> zi(z.size());
  for (std::size_t j = 0; j < z.size(); ++j) zi[j] = static_cast<int>(j + 2);
  const double r = x == y ? 1.0 : partial_correlation(corr, 0, 1, zi);
  return fisher_z_pvalue(r, d.rows(), z.size());
}

// ---------------------------------------------------------------------------
// Mean-variance invariance test

namespace detail {

inline double welch_t_pvalue(double m1, double v1, double n1, double m2, double v2, double n2) {
  const double a = v1 / n1, b = v2 / n2;
  const double se2 = a + b;
  if (!(se2 > 0.0)) return m1 == m2 ? 1.0 : 0.0;
  const double t = (m1 - m2) / std::sqrt(se2);
  const double df = se2 * se2 / (a * a / (n1 - 1.0) + b * b / (n2 - 1.0));
  const boost::math::students_t dist(df);
  return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))));
}

inline double f_test_pvalue(double v1, double n1, double v2, double n2) {
  if (!(v1 > 0.0) || !(v2 > 0.0)) return (v1 > 0.0) == (v2 > 0.0) ? 1.0 : 0.0;
  const boost::math::fisher_f dist(n1 - 1.0, n2 - 1.0);
  const double f = v1 / v2;
  const double lo = boost::math::cdf(dist, f);
  const double hi = boost::math::cdf(boost::math::complement(dist, f));
  return std::min(1.0, 2.0 * std::min(lo, hi));
}

}  // namespace detail

/// Sufficient-statistic engine for the mean-variance invariance test.
///
/// Regresses the target on a subset of `candidates` (with intercept) over all
/// rows, then compares the residuals of each context level against the rest:
/// Welch t-test for the means and a two-sided F-test for the variances. Each
/// family is Bonferroni-combined over levels, then the two families are
/// Bonferroni-combined. Per-level cross products are precomputed so any
/// subset costs O(k^3) rather than O(n).
class InvarianceTester {
 public:
  InvarianceTester(const Dataset& d, int target, int context, std::vector<int> candidates)
      : candidates_(std::move(candidates)) {
    const auto n = d.values().rows();
    auto check = [&](int j) {
      if (j < 0 || static_cast<std::size_t>(j) >= d.cols()) fail(ErrorCode::UnknownNode, "column index out of range");
    };
    check(target);
    check(context);
    for (int c : candidates_) {
      check(c);
      if (c == target || c == context) fail(ErrorCode::InvalidArgument, "conditioning set overlaps target or context");
    }
    if (target == context) fail(ErrorCode::InvalidArgument, "target must differ from context");

    std::map<double, std::vector<Eigen::Index>> levels;
    for (Eigen::Index i = 0; i < n; ++i) levels[d.values()(i, context)].push_back(i);
    const auto k = static_cast<Eigen::Index>(candidates_.size());
    // Augmented row a = [1, candidates..., target], centered at the pooled means.
    Eigen::VectorXd mean(k + 2);
    mean(0) = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) mean(j + 1) = d.col(candidates_[static_cast<std::size_t>(j)]).mean();
    mean(k + 1) = d.col(target).mean();
    total_ = Eigen::MatrixXd::Zero(k + 2, k + 2);
    Eigen::VectorXd a(k + 2);
    for (const auto& [value, rows] : levels) {
      if (levels.size() > 1 && rows.size() < 3)
        fail(ErrorCode::InvalidArgument, "context level with fewer than 3 rows");
      Eigen::MatrixXd m = Eigen::MatrixXd::Zero(k + 2, k + 2);
      for (Eigen::Index i : rows) {
        a(0) = 1.0;
        for (Eigen::Index j = 0; j < k; ++j) a(j + 1) = d.values()(i, candidates_[static_cast<std::size_t>(j)]) - mean(j + 1);
        a(k + 1) = d.values()(i, target) - mean(k + 1);
        m.selfadjointView<Eigen::Lower>().rankUpdate(a);
      }
      m.triangularView<Eigen::StrictlyUpper>() = m.transpose();
      total_ += m;
      level_stats_.push_back(std::move(m));
    }
  }

  std::size_t num_levels() const { return level_stats_.size(); }
  const std::vector<int>& candidates() const { return candidates_; }

  /// p-value for conditioning on candidates()[i] for every i in `subset`.
  double pvalue(std::span<const int> subset) const {
    if (level_stats_.size() < 2) return 1.0;
    const auto k = static_cast<Eigen::Index>(candidates_.size());
    std::vector<Eigen::Index> idx{0};
    for (int s : subset) {
      if (s < 0 || s >= k) fail(ErrorCode::InvalidArgument, "subset index out of range");
      idx.push_back(s + 1);
    }
    const auto q = static_cast<Eigen::Index>(idx.size());
    Eigen::MatrixXd xx(q, q);
    Eigen::VectorXd xy(q);
    for (Eigen::Index a = 0; a < q; ++a) {
      xy(a) = total_(idx[static_cast<std::size_t>(a)], k + 1);
      for (Eigen::Index b = 0; b < q; ++b) xx(a, b) = total_(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]);
    }
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xx);
    if (qr.rank() < q) fail(ErrorCode::Degenerate, "singular regression in invariance test");
    const Eigen::VectorXd beta = qr.solve(xy);
    // Residual r = a . gamma with gamma = [-beta, 1] on the selected coordinates.
    Eigen::VectorXd gamma = Eigen::VectorXd::Zero(k + 2);
    for (Eigen::Index a = 0; a < q; ++a) gamma(idx[static_cast<std::size_t>(a)]) = -beta(a);
    gamma(k + 1) = 1.0;

    const double n_all = total_(0, 0);
    const double sum_all = total_.row(0).dot(gamma);
    const double ss_all = gamma.dot(total_ * gamma);
    double p_mean = 1.0, p_var = 1.0;
    for (const auto& m : level_stats_) {
      const double n1 = m(0, 0), s1 = m.row(0).dot(gamma), ss1 = gamma.dot(m * gamma);
      const double n2 = n_all - n1, s2 = sum_all - s1, ss2 = ss_all - ss1;
      const double m1 = s1 / n1, m2 = s2 / n2;
      const double v1 = std::max(0.0, (ss1 - n1 * m1 * m1) / (n1 - 1.0));
      const double v2 = std::max(0.0, (ss2 - n2 * m2 * m2) / (n2 - 1.0));
      p_mean = std::min(p_mean, detail::welch_t_pvalue(m1, v1, n1, m2, v2, n2));
      p_var = std::min(p_var, detail::f_test_pvalue(v1, n1, v2, n2));
    }
    const double levels = static_cast<double>(level_stats_.size());
    p_mean = std::min(1.0, p_mean * levels);
    p_var = std::min(1.0, p_var * levels);
    return std::min(1.0, 2.0 * std::min(p_mean, p_var));
  }

 private:
  std::vector<int> candidates_;
  std::vector<Eigen::MatrixXd> level_stats_;
  Eigen::MatrixXd total_;
};

/// Mean-variance ("approximate") invariance test of target given cond across context levels.
/// A single context level yields p = 1.
inline double context_invariance_test(const Dataset& d, int target, std::span<const int> cond, int context) {
  InvarianceTester tester(d, target, context, std::vector<int>(cond.begin(), cond.end()));
  std::vector<int> all(cond.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  return tester.pvalue(all);
}

// ---------------------------------------------------------------------------

enum class ContextTest { PartialCorrelation, MeanVariance };

/// Statistical CiModel over a dataset. Fisher-z on a precomputed correlation
/// matrix for system pairs; queries involving the context column use either
/// Fisher-z or the mean-variance test. The dataset must outlive the model.
class DataCiModel final : public CiModel {
 public:
  DataCiModel(const Dataset& d, DecisionPolicy policy, ContextTest context_test = ContextTest::PartialCorrelation)
      : d_(d), policy_(policy), context_test_(context_test), corr_(correlation_matrix(d.values())), context_(d.context_index()) {
    policy_.validate();
    if (context_test_ == ContextTest::MeanVariance) {
      if (!context_) fail(ErrorCode::InvalidArgument, "mean-variance context test needs a context column");
      if (!d.column(*context_).discrete) fail(ErrorCode::InvalidArgument, "mean-variance context test needs a discrete context");
    }
  }

  std::size_t num_variables() const override { return d_.cols(); }
  const std::string& name(int var) const override { return d_.column(var).id; }
  NodeRole role(int var) const override { return d_.column(var).role; }

  double pvalue(int x, int y, std::span<const int> z) const {
    check_test_columns(d_, x, y, z);
    if (x == y) fail(ErrorCode::InvalidArgument, "X and Y must differ");
    if (context_test_ == ContextTest::MeanVariance && context_ && (x == *context_ || y == *context_)) {
      const int target = x == *context_ ? y : x;
      return context_invariance_test(d_, target, z, *context_);
    }
    if (d_.rows() <= z.size() + 3) fail(ErrorCode::InvalidArgument, "insufficient rows for partial correlation test");
    return fisher_z_pvalue(partial_correlation(corr_, x, y, z), d_.rows(), z.size());
  }

  CiVerdict query(int x, int y, std::span<const int> z) const override { return decide(pvalue(x, y, z), policy_); }

  const DecisionPolicy& policy() const { return policy_; }
  const Dataset& data() const { return d_; }

 private:
  const Dataset& d_;
  DecisionPolicy policy_;
  ContextTest context_test_;
  Eigen::MatrixXd corr_;
  std::optional<int> context_;
};

}  // namespace selbias

#endif  // SELBIAS_CITEST_HPP_
