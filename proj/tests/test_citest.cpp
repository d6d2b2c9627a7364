#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "selbias/citest.hpp"
#include "selbias/dataset.hpp"

using namespace selbias;

namespace {

double normal_two_sided(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

Dataset gaussian(std::mt19937_64& rng, std::size_t n, std::size_t k) {
  std::normal_distribution<double> z;
  Eigen::MatrixXd v(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
  for (Eigen::Index i = 0; i < v.rows(); ++i)
    for (Eigen::Index j = 0; j < v.cols(); ++j) v(i, j) = z(rng);
  std::vector<Column> cols;
  for (std::size_t j = 0; j < k; ++j) cols.push_back({"V" + std::to_string(j), NodeRole::System, false});
  return Dataset(cols, v);
}

// Kolmogorov-Smirnov distance of a sample from Uniform(0,1).
double ks_uniform(std::vector<double> p) {
  std::sort(p.begin(), p.end());
  const double n = static_cast<double>(p.size());
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    d = std::max(d, static_cast<double>(i + 1) / n - p[i]);
    d = std::max(d, p[i] - static_cast<double>(i) / n);
  }
  return d;
}

// Context column with `levels` values, target Y = b*X + shift*[C==L-1] + scale noise.
Dataset context_data(std::mt19937_64& rng, std::size_t n, int levels, double shift, double scale) {
  std::normal_distribution<double> z;
  Eigen::MatrixXd v(static_cast<Eigen::Index>(n), 3);
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    const int c = static_cast<int>(i % levels);
    const double x = z(rng);
    const bool last = c == levels - 1;
    v(i, 0) = c;
    v(i, 1) = x;
    v(i, 2) = 0.8 * x + (last ? shift : 0.0) + (last ? scale : 1.0) * z(rng);
  }
  return Dataset({{"C", NodeRole::Context, true}, {"X", NodeRole::System, false}, {"Y", NodeRole::System, false}}, v);
}

// Direct route: OLS residuals from the raw rows, then per-level Welch t and F.
double invariance_reference(const Dataset& d, int target, int context, const std::vector<int>& cond) {
  const auto n = d.values().rows();
  Eigen::MatrixXd x(n, static_cast<Eigen::Index>(cond.size() + 1));
  x.col(0).setOnes();
  for (std::size_t j = 0; j < cond.size(); ++j) x.col(static_cast<Eigen::Index>(j + 1)) = d.col(cond[j]);
  const Eigen::VectorXd y = d.col(target);
  const Eigen::VectorXd r = y - x * x.householderQr().solve(y);
  std::map<double, std::vector<double>> by_level;
  for (Eigen::Index i = 0; i < n; ++i) by_level[d.values()(i, context)].push_back(r(i));
  auto moments = [](const std::vector<double>& a) {
    double m = 0.0;
    for (double v : a) m += v;
    m /= static_cast<double>(a.size());
    double s = 0.0;
    for (double v : a) s += (v - m) * (v - m);
    return std::pair{m, s / static_cast<double>(a.size() - 1)};
  };
  double pm = 1.0, pv = 1.0;
  for (const auto& [lev, in] : by_level) {
    std::vector<double> out;
    for (const auto& [l2, other] : by_level)
      if (l2 != lev) out.insert(out.end(), other.begin(), other.end());
    const auto [m1, v1] = moments(in);
    const auto [m2, v2] = moments(out);
    const double n1 = static_cast<double>(in.size()), n2 = static_cast<double>(out.size());
    pm = std::min(pm, detail::welch_t_pvalue(m1, v1, n1, m2, v2, n2));
    pv = std::min(pv, detail::f_test_pvalue(v1, n1, v2, n2));
  }
  const double l = static_cast<double>(by_level.size());
  return std::min(1.0, 2.0 * std::min(std::min(1.0, pm * l), std::min(1.0, pv * l)));
}

}  // namespace

TEST(FisherZ, PinnedFixture) {
  // r = 0.5, n = 103, empty conditioning set.
  const double want = normal_two_sided(std::atanh(0.5) * std::sqrt(100.0));
  EXPECT_NEAR(want, 3.950252785e-8, 1e-16);
  EXPECT_NEAR(fisher_z_pvalue(0.5, 103, 0), want, 1e-12 * want + 1e-18);
  EXPECT_NEAR(fisher_z_pvalue(-0.5, 103, 0), want, 1e-12 * want + 1e-18);
}

TEST(FisherZ, ConditioningReducesDegreesOfFreedom) {
  const double p2 = fisher_z_pvalue(0.2, 50, 2);
  EXPECT_NEAR(p2, normal_two_sided(std::atanh(0.2) * std::sqrt(45.0)), 1e-12);
  EXPECT_DOUBLE_EQ(fisher_z_pvalue(0.0, 50, 2), 1.0);
}

TEST(FisherZ, ExtremeCorrelationStaysFinite) {
  const double p = fisher_z_pvalue(1.0, 1000, 0);
  EXPECT_TRUE(std::isfinite(p));
  EXPECT_GE(p, 0.0);
  EXPECT_LT(p, 1e-100);
}

TEST(FisherZ, TooFewRowsIsAnError) {
  EXPECT_THROW(fisher_z_pvalue(0.1, 4, 1), Error);
}

TEST(PartialCorrelation, MatchesRegressionResiduals) {
  std::mt19937_64 rng(3);
  Dataset d = gaussian(rng, 500, 4);
  Eigen::MatrixXd v = d.values();
  v.col(1) += 0.7 * v.col(0) + 0.3 * v.col(2);
  v.col(3) += 0.5 * v.col(1) - 0.4 * v.col(2);
  d = Dataset(d.columns(), v);
  const std::vector<int> z{1, 2};
  Eigen::MatrixXd x(500, 3);
  x.col(0).setOnes();
  x.col(1) = v.col(1);
  x.col(2) = v.col(2);
  const auto qr = x.householderQr();
  const Eigen::VectorXd r0 = v.col(0) - x * qr.solve(Eigen::VectorXd(v.col(0)));
  const Eigen::VectorXd r3 = v.col(3) - x * qr.solve(Eigen::VectorXd(v.col(3)));
  const double want = r0.dot(r3) / std::sqrt(r0.squaredNorm() * r3.squaredNorm());
  const Eigen::MatrixXd corr = correlation_matrix(v);
  EXPECT_NEAR(partial_correlation(corr, 0, 3, z), want, 1e-10);
  EXPECT_NEAR(partial_correlation_test(d, 0, 3, z), fisher_z_pvalue(want, 500, 2), 1e-9);
  const std::vector<int> one{1};
  Eigen::MatrixXd x1(500, 2);
  x1.col(0).setOnes();
  x1.col(1) = v.col(1);
  const auto q1 = x1.householderQr();
  const Eigen::VectorXd a = v.col(0) - x1 * q1.solve(Eigen::VectorXd(v.col(0)));
  const Eigen::VectorXd b = v.col(2) - x1 * q1.solve(Eigen::VectorXd(v.col(2)));
  EXPECT_NEAR(partial_correlation(corr, 0, 2, one), a.dot(b) / std::sqrt(a.squaredNorm() * b.squaredNorm()), 1e-10);
}

TEST(PartialCorrelation, NullPValuesAreUniform) {
  std::mt19937_64 rng(17);
  std::vector<double> p0, p2;
  for (int rep = 0; rep < 2000; ++rep) {
    const Dataset d = gaussian(rng, 100, 4);
    p0.push_back(partial_correlation_test(d, 0, 1, {}));
    const std::vector<int> z{2, 3};
    p2.push_back(partial_correlation_test(d, 0, 1, z));
  }
  // 1% critical value of the one-sample KS statistic.
  const double crit = 1.628 / std::sqrt(2000.0);
  EXPECT_LT(ks_uniform(p0), crit);
  EXPECT_LT(ks_uniform(p2), crit);
}

TEST(PartialCorrelation, ConstantColumnIsDegenerate) {
  Eigen::MatrixXd v = Eigen::MatrixXd::Random(50, 2);
  v.col(1).setConstant(3.0);
  const Dataset d({{"A", NodeRole::System, false}, {"B", NodeRole::System, false}}, v);
  try {
    partial_correlation_test(d, 0, 1, {});
    FAIL() << "no throw";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Degenerate);
  }
}

TEST(Decision, SingleAndDualThresholds) {
  DecisionPolicy single;
  EXPECT_TRUE(decide(0.005, single).dependent());
  EXPECT_TRUE(decide(0.01, single).independent());
  DecisionPolicy dual{0.01, ThresholdMode::Dual, 10};
  EXPECT_TRUE(decide(0.0005, dual).dependent());
  EXPECT_EQ(decide(0.005, dual).verdict, Verdict::Inconclusive);
  EXPECT_TRUE(decide(0.02, dual).independent());
  EXPECT_EQ(*decide(0.02, dual).p_value, 0.02);
  EXPECT_TRUE(decide(0.005, single, false).independent());
  EXPECT_THROW(decide(0.5, DecisionPolicy{1.5}), Error);
  EXPECT_THROW(decide(0.5, DecisionPolicy{0.01, ThresholdMode::Dual, 0}), Error);
}

TEST(WelchT, LargeSampleApproachesNormal) {
  const double p = detail::welch_t_pvalue(0.1, 1.0, 5000, 0.0, 1.2, 6000);
  const double z = 0.1 / std::sqrt(1.0 / 5000 + 1.2 / 6000);
  EXPECT_NEAR(p, normal_two_sided(z), 1e-4);
}

TEST(FTest, EqualVariancesGiveOne) {
  EXPECT_NEAR(detail::f_test_pvalue(2.0, 300, 2.0, 300), 1.0, 1e-9);
  EXPECT_LT(detail::f_test_pvalue(1.0, 500, 1.5, 500), 1e-4);
}

TEST(Invariance, SufficientStatisticsMatchDirectResiduals) {
  std::mt19937_64 rng(8);
  for (int levels : {2, 3, 5}) {
    const Dataset d = context_data(rng, 900, levels, 0.15, 1.1);
    const std::vector<int> cond{1};
    const InvarianceTester t(d, 2, 0, cond);
    const std::vector<int> all{0}, none{};
    EXPECT_NEAR(t.pvalue(all), invariance_reference(d, 2, 0, cond), 1e-9);
    EXPECT_NEAR(t.pvalue(none), invariance_reference(d, 2, 0, {}), 1e-9);
    EXPECT_NEAR(context_invariance_test(d, 2, cond, 0), invariance_reference(d, 2, 0, cond), 1e-9);
  }
}

TEST(Invariance, CalibratedUnderNull) {
  std::mt19937_64 rng(21);
  int rejections = 0;
  const int reps = 1000;
  for (int rep = 0; rep < reps; ++rep) {
    const Dataset d = context_data(rng, 400, 2, 0.0, 1.0);
    const std::vector<int> cond{1};
    if (context_invariance_test(d, 2, cond, 0) < 0.05) ++rejections;
  }
  // Bonferroni over two families keeps the size at or below nominal.
  EXPECT_LE(rejections, 65);
}

TEST(Invariance, DetectsMeanShiftAndVarianceChange) {
  std::mt19937_64 rng(4);
  const std::vector<int> cond{1};
  EXPECT_LT(context_invariance_test(context_data(rng, 2000, 2, 0.5, 1.0), 2, cond, 0), 1e-6);
  EXPECT_LT(context_invariance_test(context_data(rng, 2000, 2, 0.0, 2.0), 2, cond, 0), 1e-6);
}

TEST(Invariance, SingleLevelGivesOne) {
  std::mt19937_64 rng(4);
  const Dataset d = context_data(rng, 200, 1, 0.0, 1.0);
  const std::vector<int> cond{1};
  EXPECT_DOUBLE_EQ(context_invariance_test(d, 2, cond, 0), 1.0);
}

TEST(Invariance, CollinearSubsetIsDegenerate) {
  std::mt19937_64 rng(4);
  Dataset d = context_data(rng, 200, 2, 0.0, 1.0);
  Eigen::MatrixXd v(200, 4);
  v.leftCols(3) = d.values();
  v.col(3) = 2.0 * v.col(1);
  d = Dataset({{"C", NodeRole::Context, true}, {"X", NodeRole::System, false}, {"Y", NodeRole::System, false},
               {"X2", NodeRole::System, false}},
              v);
  const InvarianceTester t(d, 2, 0, {1, 3});
  const std::vector<int> both{0, 1};
  try {
    t.pvalue(both);
    FAIL() << "no throw";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Degenerate);
  }
}

TEST(DataCiModel, RoutesContextQueries) {
  std::mt19937_64 rng(9);
  const Dataset d = context_data(rng, 1000, 2, 1.0, 1.0);
  const DataCiModel pc(d, DecisionPolicy{});
  const DataCiModel mv(d, DecisionPolicy{}, ContextTest::MeanVariance);
  EXPECT_EQ(pc.num_variables(), 3u);
  EXPECT_EQ(pc.name(0), "C");
  EXPECT_EQ(pc.role(0), NodeRole::Context);
  const std::vector<int> cond{1};
  EXPECT_NEAR(mv.pvalue(0, 2, cond), context_invariance_test(d, 2, cond, 0), 1e-12);
  EXPECT_NEAR(pc.pvalue(0, 2, cond), partial_correlation_test(d, 0, 2, cond), 1e-9);
  EXPECT_TRUE(mv.query(0, 2, cond).dependent());
  EXPECT_TRUE(pc.query(0, 1, {}).independent() || pc.pvalue(0, 1, {}) < 0.01);
}

TEST(DataCiModel, MeanVarianceNeedsDiscreteContext) {
  std::mt19937_64 rng(1);
  const Dataset d = gaussian(rng, 50, 3);
  EXPECT_THROW(DataCiModel(d, DecisionPolicy{}, ContextTest::MeanVariance), Error);
}

TEST(DatasetIo, CsvAndSidecarRoundTrip) {
  Eigen::MatrixXd v(3, 3);
  v << 0, 1.5, -2.25, 1, 0.1, 3e-10, 0, -7, 12345.678;
  const Dataset d({{"C", NodeRole::Context, true}, {"X", NodeRole::System, false}, {"Y", NodeRole::System, false}}, v);
  std::stringstream csv;
  write_dataset_csv(csv, d);
  const DatasetMeta meta = parse_dataset_meta(format_dataset_meta(d));
  const Dataset back = parse_dataset_csv(csv, meta);
  EXPECT_TRUE(d == back);
  EXPECT_EQ(back.context_index(), std::optional<int>(0));
}

TEST(DatasetIo, RejectsBadInput) {
  auto code_of = [](const std::string& text) {
    std::istringstream in(text);
    try {
      parse_dataset_csv(in);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::Usage;
  };
  EXPECT_EQ(code_of("A,B\n1,2\n3\n"), ErrorCode::Format);
  EXPECT_EQ(code_of("A,B\n1,x\n"), ErrorCode::Format);
  EXPECT_EQ(code_of("A,A\n1,2\n"), ErrorCode::Format);
  EXPECT_EQ(code_of("A,B\n1,nan\n"), ErrorCode::Format);
}

TEST(DatasetIo, BinarizeAtMean) {
  Eigen::MatrixXd v(4, 2);
  v << 0, 1, 1, 2, 2, 3, 10, 4;
  const Dataset d({{"C", NodeRole::Context, false}, {"X", NodeRole::System, false}}, v);
  const Dataset b = d.binarized_at_mean(0);
  EXPECT_TRUE(b.column(0).discrete);
  EXPECT_EQ(b.values()(3, 0), 1.0);
  EXPECT_EQ(b.values()(2, 0), 0.0);
}
