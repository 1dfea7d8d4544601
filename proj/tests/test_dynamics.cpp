#include <gtest/gtest.h>

#include <unsupported/Eigen/MatrixFunctions>

#include "helpers.hpp"

using namespace dpos;
using namespace testing_util;

namespace {

Mat central_jacobian(const SystemModel& m, const Vec& x) {
  const int n = m.dim;
  Mat J(n, n);
  for (int j = 0; j < n; ++j) {
    Vec xp = x, xm = x;
    xp[j] += 1e-6;
    xm[j] -= 1e-6;
    J.col(j) = (m.field(xp) - m.field(xm)) / 2e-6;
  }
  return J;
}

}  // namespace

TEST(Jacobian, PendulumAtOrigin) {
  const auto m = pendulum_model(3.0, 0.0);
  const Mat J = eval_jacobian(m, vec({0.0, 0.0}));
  EXPECT_TRUE(J.isApprox(mat2(0, 1, -1, -3), 1e-14));
  EXPECT_LT((J - central_jacobian(m, vec({0.0, 0.0}))).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Jacobian, LinearIsConstant) {
  const Mat A = mat2(-1, 2, 0.5, -3);
  const auto m = linear(A);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (int k = 0; k < 10; ++k) {
    const Vec x = vec({g(rng), g(rng)});
    EXPECT_EQ(eval_jacobian(m, x), A);
  }
}

TEST(Jacobian, KuramotoAtSync) {
  const auto m = kuramoto_model(3);
  Mat C(3, 3);
  C << -2, 1, 1, 1, -2, 1, 1, 1, -2;
  EXPECT_LT((eval_jacobian(m, Vec::Zero(3)) - C / 3.0).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Jacobian, FiniteDifferenceFallbackMatches) {
  const auto with = pendulum_model(3.0, 0.7);
  SystemModel without(2, with.field, {}, with.wrap);
  const Vec x = vec({0.4, -0.3});
  EXPECT_LT((eval_jacobian(with, x) - eval_jacobian(without, x)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Jacobian, ZooAnalyticAgreesWithFiniteDifferences) {
  std::vector<ModelBundle> zoo = {pendulum(3, 0), pendulum(3, 1.5), cooperative_demo(2), cooperative_demo(0.5),
                                  metzler_linear(mat2(-1, 1, 1, -1)), kuramoto(5)};
  for (const auto& b : zoo) {
    CompactRegion r = b.default_region;
    r.grid_density = 4;
    for (const auto& x : r.grid()) EXPECT_LT(jacobian_mismatch(b.model, x), 1e-5) << b.name;
  }
}

TEST(Trajectory, ZeroFieldIsConstant) {
  SystemModel m(2, [](const Vec&) { return Vec(Vec::Zero(2)); });
  const Vec x0 = vec({0.3, -2.0});
  const auto tr = integrate_trajectory(m, x0, 1.0, 1e-3);
  for (const auto& x : tr.states) EXPECT_EQ(x, x0);
  EXPECT_NEAR(tr.times.back(), 1.0, 1e-12);
}

TEST(Trajectory, ExponentialDecay) {
  const auto m = linear(Mat::Constant(1, 1, -1.0));
  EXPECT_NEAR(flow(m, Vec::Ones(1), 1.0, 1e-3)[0], std::exp(-1.0), 1e-6);
}

TEST(Trajectory, KuramotoSyncIsInvariant) {
  const auto m = kuramoto_model(4);
  const Vec x0 = Vec::Constant(4, 0.8);
  const Vec xT = flow(m, x0, 5.0, 1e-2);
  EXPECT_LT((xT - x0).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Trajectory, PartialFinalStep) {
  const auto m = linear(Mat::Constant(1, 1, -1.0));
  const auto tr = integrate_trajectory(m, Vec::Ones(1), 0.25, 0.1);
  ASSERT_EQ(tr.times.size(), 4u);
  EXPECT_NEAR(tr.times.back(), 0.25, 1e-15);
}

TEST(Trajectory, WrappedAxesStayInChart) {
  const auto m = pendulum_model(3.0, 1.5);
  const auto tr = integrate_trajectory(m, vec({0.0, 0.5}), 40.0, 1e-2);
  for (const auto& x : tr.states) {
    EXPECT_GE(x[0], -kPi);
    EXPECT_LT(x[0], kPi);
  }
}

TEST(Trajectory, DivergenceIsReported) {
  SystemModel m(1, [](const Vec& x) { return Vec(x.array().square()); });
  try {
    flow(m, Vec::Ones(1), 5.0, 1e-2);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_GT(e.time(), 0.9);
    EXPECT_LT(e.time(), 1.2);
  }
}

TEST(Trajectory, NonFiniteFieldRaisesEvaluationError) {
  SystemModel m(2, [](const Vec& x) {
    Vec d = x;
    d[1] = std::log(x[1]);
    return d;
  });
  EXPECT_THROW(flow(m, vec({1.0, -1.0}), 1.0, 1e-2), EvaluationError);
}

TEST(Trajectory, NonPositiveStepRejected) {
  const auto m = linear(Mat::Identity(1, 1));
  EXPECT_THROW(flow(m, Vec::Ones(1), 1.0, 0.0), PreconditionError);
}

TEST(Prolonged, LinearMatchesMatrixExponential) {
  const Mat A = mat2(-1, 0, 0, -2);
  const auto tr = integrate_prolonged(linear(A), Vec::Zero(2), vec({1, 1}), 1.0, 1e-3);
  const Vec dx = tr.tangent(tr.times.size() - 1);
  EXPECT_NEAR(dx[0], std::exp(-1.0), 1e-6);
  EXPECT_NEAR(dx[1], std::exp(-2.0), 1e-6);
  const Mat E = Mat(A).exp();
  EXPECT_LT((dx - E * vec({1, 1})).norm(), 1e-6);
}

TEST(Prolonged, KuramotoConsensusTangentIsFixed) {
  const auto m = kuramoto_model(5);
  const Vec x0 = vec({0.1, -0.4, 0.6, 0.0, 0.3});
  const auto tr = integrate_prolonged(m, x0, Vec::Ones(5), 20.0, 1e-2);
  for (std::size_t k = 0; k < tr.times.size(); ++k) EXPECT_LT((tr.tangent(k) - Vec::Ones(5)).norm(), 1e-12);
}

TEST(Prolonged, ScalingShiftsLogMagnitude) {
  const auto m = pendulum_model(3.0, 0.4);
  const Vec x0 = vec({0.2, 0.1}), dx = vec({0.3, 0.7});
  const auto a = integrate_prolonged(m, x0, dx, 5.0, 1e-3);
  const auto b = integrate_prolonged(m, x0, 5.0 * dx, 5.0, 1e-3);
  for (std::size_t k = 0; k < a.times.size(); k += 97) {
    EXPECT_LT((a.directions[k] - b.directions[k]).norm(), 1e-12);
    EXPECT_NEAR(b.log_mags[k] - a.log_mags[k], std::log(5.0), 1e-12);
  }
}

TEST(Prolonged, ZeroTangentRejected) {
  EXPECT_THROW(integrate_prolonged(pendulum_model(3, 0), Vec::Zero(2), Vec::Zero(2), 1.0, 1e-2),
               DegenerateVectorError);
}

TEST(Prolonged, LogStorageSurvivesLargeGrowth) {
  const auto tr = integrate_prolonged(linear(Mat::Constant(1, 1, 10.0)), Vec::Ones(1) * 0.0, Vec::Ones(1), 100.0,
                                      1e-3);
  EXPECT_NEAR(tr.log_mags.back(), 1000.0, 1e-6);
}

TEST(Prolonged, VariationalLinearity) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> g;
  const auto m = cooperative_demo(2.0).model;
  for (int trial = 0; trial < 10; ++trial) {
    const Vec x0 = vec({g(rng), g(rng)});
    const Vec a = vec({g(rng), g(rng)}), b = vec({g(rng), g(rng)});
    const double al = g(rng), be = g(rng);
    const auto ta = integrate_prolonged(m, x0, a, 3.0, 1e-3);
    const auto tb = integrate_prolonged(m, x0, b, 3.0, 1e-3);
    const auto tc = integrate_prolonged(m, x0, al * a + be * b, 3.0, 1e-3);
    const std::size_t k = ta.times.size() - 1;
    const Vec lhs = tc.tangent(k);
    const Vec rhs = al * ta.tangent(k) + be * tb.tangent(k);
    EXPECT_LT((lhs - rhs).norm(), 1e-6 * std::max(1.0, rhs.norm()));
  }
}

TEST(Normalization, SkewSymmetricGivesZero) {
  const auto m = linear(mat2(0, -1, 1, 0));
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  for (int k = 0; k < 20; ++k) {
    Vec th = vec({g(rng), g(rng)});
    th.normalize();
    EXPECT_NEAR(normalization_lambda(m, Vec::Zero(2), th), 0.0, 1e-15);
  }
}

TEST(Normalization, DiagonalQuadraticForm) {
  const auto m = linear(mat2(-1, 0, 0, -2));
  EXPECT_DOUBLE_EQ(normalization_lambda(m, Vec::Zero(2), vec({1, 0})), -1.0);
  EXPECT_DOUBLE_EQ(normalization_lambda(m, Vec::Zero(2), vec({0, 1})), -2.0);
  EXPECT_THROW(normalization_lambda(m, Vec::Zero(2), vec({2, 0})), PreconditionError);
}

TEST(Normalization, ConstantMetric) {
  auto m = linear(mat2(-1, 0.5, 0.2, -2));
  const Mat G = mat2(2, 0.3, 0.3, 1);
  m.metric = [G](const Vec&) { return G; };
  Vec th = vec({0.6, 0.8});
  th /= std::sqrt(th.dot(G * th));
  const Mat A = mat2(-1, 0.5, 0.2, -2);
  EXPECT_NEAR(normalization_lambda(m, Vec::Zero(2), th), th.dot(G * A * th), 1e-14);
}

TEST(NormalizedFlow, RotationIsExact) {
  const auto m = linear(mat2(0, -1, 1, 0));
  const auto tr = integrate_normalized(m, Vec::Zero(2), vec({1, 0}), 3.0, 1e-3);
  const Vec th = tr.directions.back();
  EXPECT_NEAR(th[0], std::cos(3.0), 1e-10);
  EXPECT_NEAR(th[1], std::sin(3.0), 1e-10);
  for (const auto& d : tr.directions) EXPECT_NEAR(d.norm(), 1.0, 1e-12);
}

TEST(NormalizedFlow, EigenvectorIsFixed) {
  const auto m = linear(mat2(-1, 0, 0, -2));
  const auto tr = integrate_normalized(m, Vec::Zero(2), vec({1, 0}), 5.0, 1e-3);
  for (const auto& d : tr.directions) EXPECT_EQ(d, vec({1, 0}));
  EXPECT_NEAR(tr.log_mags.back(), -5.0, 1e-10);
}

TEST(NormalizedFlow, DominantDirectionAttracts) {
  const auto m = linear(mat2(-1, 0, 0, -2));
  Vec th0 = vec({0.3, 0.9});
  th0.normalize();
  const auto tr = integrate_normalized(m, Vec::Zero(2), th0, 30.0, 1e-3);
  EXPECT_NEAR(std::abs(tr.directions.back()[0]), 1.0, 1e-10);
}

TEST(NormalizedFlow, NormPreservedOverLongHorizon) {
  const auto m = pendulum_model(3.0, 1.5);
  Vec th0 = vec({1.0, 0.2});
  th0.normalize();
  const auto tr = integrate_normalized(m, vec({0.0, 0.5}), th0, 100.0, 1e-3);
  for (const auto& d : tr.directions) EXPECT_NEAR(d.norm(), 1.0, 1e-6);
  EXPECT_GT(tr.max_drift, 0.0);
  EXPECT_LT(tr.max_drift, 1e-6);
}

TEST(NormalizedFlow, AgreesWithProlonged) {
  const auto m = cooperative_demo(2.0).model;
  Vec th0 = vec({0.4, -0.2});
  th0.normalize();
  const Vec x0 = vec({0.5, -1.2});
  const auto a = integrate_prolonged(m, x0, th0, 10.0, 1e-3);
  const auto b = integrate_normalized(m, x0, th0, 10.0, 1e-3);
  ASSERT_EQ(a.times.size(), b.times.size());
  for (std::size_t k = 0; k < a.times.size(); ++k) {
    EXPECT_LT((a.directions[k] - b.directions[k]).norm(), 1e-5);
    EXPECT_NEAR(a.log_mags[k], b.log_mags[k], 1e-5);
  }
}

TEST(NormalizedFlow, CoarseStepOnStiffSystemRaises) {
  const auto m = linear(mat2(-60, 0, 0, 20));
  Vec th0 = vec({1, 1});
  th0.normalize();
  EXPECT_THROW(integrate_normalized(m, Vec::Zero(2), th0, 1.0, 0.05), NormalizationError);
}

TEST(NormalizedFlow, NonUnitStartRejected) {
  EXPECT_THROW(integrate_normalized(linear(Mat::Identity(2, 2)), Vec::Zero(2), vec({1, 1}), 1.0, 1e-2),
               PreconditionError);
}

TEST(ForwardInvariance, ContractingLine) {
  const auto r = check_forward_invariance(linear(Mat::Constant(1, 1, -1)), box(1, -1, 1), 5.0, 1e-2, 5);
  EXPECT_EQ(r.verdict, Verdict::Pass);
}

TEST(ForwardInvariance, ExpandingLineFailsAtBoundary) {
  const auto r = check_forward_invariance(linear(Mat::Constant(1, 1, 1)), box(1, -1, 1), 5.0, 1e-2, 5);
  EXPECT_EQ(r.verdict, Verdict::Fail);
  ASSERT_TRUE(r.witness);
  EXPECT_DOUBLE_EQ(std::abs(r.witness->x[0]), 1.0);
}

TEST(ForwardInvariance, KuramotoGapRegion) {
  const auto r = check_forward_invariance(kuramoto_model(3), max_gap_region(3, kPi / 2 - 0.1, 6), 5.0, 1e-2, 6);
  EXPECT_EQ(r.verdict, Verdict::Pass);
}

TEST(ForwardInvariance, FullTorusHasNoBoundary) {
  CompactRegion r(Vec::Constant(2, -kPi), Vec::Constant(2, kPi), {true, true}, 5);
  const auto rep = check_forward_invariance(kuramoto_model(2), r, 1.0, 1e-2, 5);
  EXPECT_EQ(rep.verdict, Verdict::Pass);
}

TEST(Chart, WrapAngleRange) {
  for (double a : {-10.0, -kPi, -1.0, 0.0, 3.0, kPi, 7.5, 100.0}) {
    const double w = wrap_angle(a);
    EXPECT_GE(w, -kPi);
    EXPECT_LT(w, kPi);
    EXPECT_NEAR(std::remainder(w - a, kTwoPi), 0.0, 1e-12);
  }
}

TEST(Chart, ShortestArcDifference) {
  const Vec d = chart_difference(vec({3.1, 0.0}), vec({-3.1, 0.0}), {true, false});
  EXPECT_NEAR(d[0], 6.2 - kTwoPi, 1e-12);
}

TEST(Region, BoxValidation) {
  EXPECT_THROW(CompactRegion(vec({1.0}), vec({0.0})).validate(), PreconditionError);
}
