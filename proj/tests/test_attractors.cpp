#include <gtest/gtest.h>

#include "helpers.hpp"

using namespace dpos;
using namespace testing_util;

namespace {

CompactRegion cylinder(double vmax, int density) {
  return CompactRegion(vec({-kPi, -vmax}), vec({kPi, vmax}), {true, false}, density);
}

// Cone of directions within 45 degrees of the counter-clockwise tangent of
// the circle through x; its center curves are circles around the origin.
ConeField rotating_cone() {
  auto frame = [](const Vec& x) {
    const double r = x.norm();
    Vec t = r > 1e-12 ? Vec(vec({-x[1], x[0]}) / r) : vec({0.0, 1.0});
    const Vec nrm = vec({t[1], -t[0]});
    Mat F(2, 2);
    F.row(0) = (t + nrm).transpose();
    F.row(1) = (t - nrm).transpose();
    return F;
  };
  const std::vector<Vec> samples = {vec({1.0, 0.0}), vec({0.0, 1.0})};
  return polyhedral_cone(frame, 2, {}, samples, false, "rotating");
}

}  // namespace

TEST(FixedPoints, PendulumOnCylinder) {
  const auto eq = find_fixed_points(pendulum_model(3, 0), cylinder(2.0, 9));
  ASSERT_EQ(eq.size(), 2u);
  int stable = 0, saddle = 0;
  for (const auto& e : eq) {
    EXPECT_NEAR(e.x[1], 0.0, 1e-9);
    if (std::abs(e.x[0]) < 1e-9) {
      EXPECT_EQ(e.stability, "stable");
      ++stable;
    } else {
      EXPECT_NEAR(std::abs(e.x[0]), kPi, 1e-9);
      EXPECT_EQ(e.stability, "saddle");
      ++saddle;
    }
  }
  EXPECT_EQ(stable, 1);
  EXPECT_EQ(saddle, 1);
}

TEST(FixedPoints, NoneWhenForcingExceedsOne) {
  EXPECT_TRUE(find_fixed_points(pendulum_model(3, 1.5), cylinder(2.0, 9)).empty());
}

TEST(FixedPoints, KuramotoSyncFamily) {
  const auto eq = find_fixed_points(kuramoto_model(3), max_gap_region(3, kPi / 2 - 0.1, 4));
  ASSERT_FALSE(eq.empty());
  for (const auto& e : eq) {
    EXPECT_LT(circular_spread(e.x), 1e-6);
    ASSERT_TRUE(e.family_direction);
    EXPECT_NEAR(std::abs(e.family_direction->dot(Vec::Ones(3))) / std::sqrt(3.0), 1.0, 1e-9);
    EXPECT_EQ(e.stability, "stable");
  }
  EXPECT_EQ(eq.size(), 1u);
}

TEST(FixedPoints, CooperativeDemoThreeEquilibria) {
  const auto eq = find_fixed_points(cooperative_demo(2.0).model, box(2, -2, 2, 9));
  ASSERT_EQ(eq.size(), 3u);
  int saddles = 0;
  for (const auto& e : eq) saddles += e.stability == "saddle";
  EXPECT_EQ(saddles, 1);
}

TEST(ConalExit, OrthantBoxPasses) {
  SystemModel zero(2, [](const Vec&) { return Vec(Vec::Zero(2)); });
  const auto r = check_conal_exit(zero, orthant_cone(2), box(2, -1, 1, 4), 10, 10.0);
  EXPECT_EQ(r.verdict, Verdict::Pass);
}

TEST(ConalExit, ClosedCurvesFail) {
  SystemModel zero(2, [](const Vec&) { return Vec(Vec::Zero(2)); });
  ConalExitOptions o;
  o.include_extreme_rays = false;
  const auto r = check_conal_exit(zero, rotating_cone(), box(2, -1, 1, 4), 10, 8.0, o);
  EXPECT_EQ(r.verdict, Verdict::Fail);
  ASSERT_TRUE(r.witness);
  EXPECT_LE(r.witness->x.norm(), 1.0 + 1e-9);
}

TEST(ConalExit, PendulumCone) {
  CompactRegion region = CompactRegion::box({{-1.0, 1.0}, {-1.0, 1.0}}, 5);
  region.wrap = {true, false};
  const auto r = check_conal_exit(pendulum_model(3, 0), pendulum_cone(), region, 10, 20.0);
  EXPECT_EQ(r.verdict, Verdict::Pass);
}

TEST(Bistable, CubicLine) {
  SystemModel m(1, [](const Vec& x) { return Vec(x.array() - x.array().cube()); },
                [](const Vec& x) { return Mat(Mat::Constant(1, 1, 1.0 - 3.0 * x[0] * x[0])); });
  BistableOptions o;
  o.check.directions = 10;
  const auto r = detect_bistable_convergence(m, orthant_cone(1), box(1, -2, 2, 9), 200, 30.0, o);
  EXPECT_EQ(r.kind, AttractorKind::FixedPoints);
  ASSERT_EQ(r.fixed_points.size(), 3u);
  for (std::size_t e = 0; e < r.fixed_points.size(); ++e) {
    if (std::abs(r.fixed_points[e].x[0]) < 1e-9)
      EXPECT_EQ(r.basin_per_equilibrium[e], 0.0);
    else
      EXPECT_NEAR(r.basin_per_equilibrium[e], 0.5, 0.1);
  }
}

TEST(Bistable, PendulumEnergyRegion) {
  BistableOptions o;
  o.check.directions = 20;
  const auto r = detect_bistable_convergence(pendulum_model(3, 0), pendulum_cone(), pendulum_energy_region(0.4, 8),
                                             50, 60.0, o);
  EXPECT_EQ(r.kind, AttractorKind::FixedPoints);
  ASSERT_EQ(r.fixed_points.size(), 1u);
  EXPECT_LT(r.fixed_points[0].x.norm(), 1e-9);
  EXPECT_DOUBLE_EQ(r.basin_fraction, 1.0);
}

TEST(Bistable, ContractingLinear) {
  BistableOptions o;
  o.check.directions = 20;
  const auto r = detect_bistable_convergence(linear(mat2(-2, 1, 1, -2)), orthant_cone(2), box(2, -1, 1), 50, 30.0, o);
  EXPECT_EQ(r.kind, AttractorKind::FixedPoints);
  ASSERT_EQ(r.fixed_points.size(), 1u);
  EXPECT_DOUBLE_EQ(r.basin_fraction, 1.0);
}

TEST(Bistable, UnsettledTrajectoriesAreNotCounted) {
  BistableOptions o;
  o.check.directions = 20;
  const auto b = cooperative_demo(2.0);
  const auto r = detect_bistable_convergence(b.model, b.cone, b.default_region, 50, 0.5, o);
  EXPECT_EQ(r.kind, AttractorKind::Undetermined);
  EXPECT_LT(r.basin_fraction, 0.1);
}

TEST(Bistable, RecordsCompletenessAssumption) {
  BistableOptions o;
  o.check.directions = 10;
  const auto r = detect_bistable_convergence(linear(mat2(-2, 1, 1, -2)), orthant_cone(2), box(2, -1, 1, 3), 5, 10.0, o);
  ASSERT_EQ(r.assumed.size(), 1u);
  EXPECT_EQ(r.assumed[0], kCompletenessAssumption);
}

TEST(VectorField, KuramotoConsensus) {
  const auto b = kuramoto(4);
  CompactRegion region = b.default_region;
  region.grid_density = 4;
  const double s = 0.5;
  const auto r = check_invariant_vector_field(b.model, b.cone, region,
                                              [s](const Vec&) { return Vec(Vec::Constant(4, s)); }, 20.0, 1e-2, 5);
  EXPECT_EQ(r.verdict, Verdict::Pass);
}

TEST(VectorField, LinearConsensus) {
  const int n = 4;
  const Mat L = n * Mat::Identity(n, n) - Mat::Ones(n, n);
  const auto r = check_invariant_vector_field(linear(-L), orthant_cone(n), box(n, -1, 1, 3),
                                              [n](const Vec&) { return Vec(Vec::Ones(n) / std::sqrt(n)); }, 10.0,
                                              1e-3, 5);
  EXPECT_EQ(r.verdict, Verdict::Pass);
}

TEST(VectorField, VanishingFieldFails) {
  const auto m = pendulum_model(3, 0);
  CompactRegion region = CompactRegion::box({{-1.0, 1.0}, {-1.0, 1.0}}, 5);
  const auto r = check_invariant_vector_field(m, pendulum_cone(), region, [m](const Vec& x) { return m.f(x); }, 5.0,
                                              1e-2, 3);
  EXPECT_EQ(r.verdict, Verdict::Fail);
  ASSERT_FALSE(r.preconditions.empty());
  EXPECT_EQ(r.preconditions[0].first, "a_field_in_cone");
  EXPECT_EQ(r.preconditions[0].second, Verdict::Fail);
}

TEST(LimitCycle, PendulumRotation) {
  const auto b = pendulum(3, 1.5);
  const auto r = detect_limit_cycle(b.model, b.cone, b.default_region, 100.0);
  ASSERT_EQ(r.kind, AttractorKind::LimitCycle);
  EXPECT_TRUE(r.fixed_points.empty());
  ASSERT_TRUE(r.cycle);
  const auto& c = *r.cycle;
  EXPECT_LT(c.closure_error, 1e-4);
  EXPECT_LT(c.max_hausdorff, 1e-4);
  EXPECT_DOUBLE_EQ(r.basin_fraction, 1.0);
  for (double q : c.return_ratios) EXPECT_LT(q, 0.5);
  for (double mu : c.transverse_multipliers) EXPECT_LT(mu, 1.0);
  // Re-integration from arbitrary orbit points closes after one period.
  for (std::size_t k = 0; k < c.orbit.size(); k += c.orbit.size() / 5) {
    const Vec end = flow(b.model, c.orbit[k], c.period, 1e-3);
    EXPECT_LT(chart_difference(end, c.orbit[k], b.model.wrap).norm(), 1e-4);
  }
  // One full rotation of the angle per period.
  double total = 0.0;
  for (std::size_t k = 1; k < c.orbit.size(); ++k) total += wrap_angle(c.orbit[k][0] - c.orbit[k - 1][0]);
  EXPECT_NEAR(total, kTwoPi, 1e-2);
}

TEST(LimitCycle, ConstantRotationPeriod) {
  SystemModel m(1, [](const Vec&) { return Vec(Vec::Ones(1)); }, [](const Vec&) { return Mat(Mat::Zero(1, 1)); },
                {true});
  CompactRegion circle(Vec::Constant(1, -kPi), Vec::Constant(1, kPi), {true}, 8);
  LimitCycleOptions o;
  o.n_ics = 4;
  const auto r = detect_limit_cycle(m, orthant_cone(1), circle, 30.0, o);
  ASSERT_TRUE(r.cycle);
  EXPECT_NEAR(r.cycle->period, kTwoPi, 1e-6);
  EXPECT_EQ(r.kind, AttractorKind::LimitCycle);
}

TEST(LimitCycle, FixedPointViolatesHypotheses) {
  const auto b = pendulum(3, 0);
  const auto r = detect_limit_cycle(b.model, b.cone, b.default_region, 20.0);
  EXPECT_EQ(r.kind, AttractorKind::Undetermined);
  ASSERT_FALSE(r.hypotheses_checked.empty());
  EXPECT_EQ(r.hypotheses_checked[0].first, "no_fixed_points");
  EXPECT_EQ(r.hypotheses_checked[0].second, Verdict::Fail);
  EXPECT_FALSE(r.cycle);
}

TEST(Kuramoto, SynchronizationPipeline) {
  SyncOptions o;
  o.n_ic = 20;
  const auto r = kuramoto_sync_analysis(5, max_gap_region(5, kPi / 2 - 0.1), 1.0, 50.0, o);
  EXPECT_EQ(r.kind, AttractorKind::Synchronization);
  ASSERT_TRUE(r.sync);
  EXPECT_GT(r.sync->min_derivative_margin, 0.0);
  EXPECT_LT(r.sync->max_final_spread, 1e-6);
  EXPECT_DOUBLE_EQ(r.sync->lambda_param, 1.0);
  // The invariant-vector-field check passed, so every spread series decays monotonically.
  ASSERT_EQ(r.spread_series.size(), 20u);
  for (const auto& s : r.spread_series)
    for (std::size_t j = 1; j < s.size(); ++j) EXPECT_LE(s[j].second, s[j - 1].second + 1e-12);
}

TEST(Kuramoto, SaddleRegionRejected) {
  // Two oscillators in antiphase: the balanced saddle lies inside this box.
  CompactRegion r(vec({-0.2, kPi - 0.2}), vec({0.2, kPi + 0.2}), {true, true}, 5);
  SyncOptions o;
  o.n_ic = 3;
  o.max_lambda = 2.0;
  o.vector_field_ics = 2;
  const auto rep = kuramoto_sync_analysis(2, r, 1.0, 5.0, o);
  EXPECT_EQ(rep.kind, AttractorKind::Undetermined);
  EXPECT_EQ(rep.hypotheses_checked[0].second, Verdict::Fail);
}
