#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dpos/checker.hpp"
#include "dpos/cones.hpp"
#include "dpos/dynamics.hpp"
#include "dpos/model_zoo.hpp"
#include "dpos/region.hpp"
#include "dpos/report.hpp"

namespace dpos {

// ---------------------------------------------------------------------------
// Equilibria
// ---------------------------------------------------------------------------

struct FixedPointOptions {
  double f_tol = 1e-8;
  double dedup_radius = 1e-6;
  int max_newton = 60;
  double singular_tol = 1e-8;
};

namespace detail {

/// Damped Gauss-Newton on |f|; the pseudo-inverse handles singular Jacobians
/// on continua of equilibria.
inline std::optional<Vec> newton_equilibrium(const SystemModel& model, Vec x, const FixedPointOptions& opt) {
  double r = model.f(x).norm();
  for (int it = 0; it < opt.max_newton; ++it) {
    if (r < 1e-13) break;
    const Mat J = eval_jacobian(model, x);
    const Vec step = Eigen::CompleteOrthogonalDecomposition<Mat>(J).solve(model.f(x));
    if (!step.allFinite()) return std::nullopt;
    double a = 1.0;
    bool moved = false;
    for (int b = 0; b < 30; ++b) {
      Vec y = x - a * step;
      wrap_state(y, model.wrap);
      double ry;
      try {
        ry = model.f(y).norm();
      } catch (const EvaluationError&) {
        ry = kInf;
      }
      if (ry < r) {
        x = y;
        r = ry;
        moved = true;
        break;
      }
      a *= 0.5;
    }
    if (!moved) break;
  }
  if (r < opt.f_tol) return x;
  return std::nullopt;
}

inline std::string classify(const Eigen::VectorXcd& ev, bool family) {
  int pos = 0, neg = 0, zero = 0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    const double re = ev[i].real();
    if (re > 1e-9) ++pos;
    else if (re < -1e-9) ++neg;
    else ++zero;
  }
  if (family && zero > 0) --zero;  // the neutral direction along the family
  if (zero > 0) return "nonhyperbolic";
  if (pos == 0) return "stable";
  if (neg == 0) return "unstable";
  return "saddle";
}

}  // namespace detail

/// Newton refinement from the region grid, deduplicated and classified.
inline std::vector<Equilibrium> find_fixed_points(const SystemModel& model, const CompactRegion& region,
                                                  int grid_density = 0, const FixedPointOptions& opt = {}) {
  CompactRegion seeds_region = region;
  if (grid_density > 0) seeds_region.grid_density = grid_density;
  std::vector<Equilibrium> out;
  for (const auto& seed : seeds_region.grid()) {
    std::optional<Vec> xe;
    try {
      xe = detail::newton_equilibrium(model, seed, opt);
    } catch (const EvaluationError&) {
      continue;
    }
    if (!xe || !region.contains(*xe)) continue;
    const Vec x = *xe;
    bool dup = false;
    for (const auto& e : out) {
      const Vec d = chart_difference(x, e.x, model.wrap);
      if (d.norm() < opt.dedup_radius) dup = true;
      if (!dup && e.family_direction) {
        const Vec& v = *e.family_direction;
        if ((d - d.dot(v) * v).norm() < opt.dedup_radius) dup = true;
      }
      if (dup) break;
    }
    if (dup) continue;
    Equilibrium e;
    e.x = x;
    const Mat J = eval_jacobian(model, x);
    Eigen::JacobiSVD<Mat> svd(J, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    if (sv[sv.size() - 1] < opt.singular_tol * std::max(1.0, sv[0])) {
      Vec v = svd.matrixV().col(sv.size() - 1);
      v /= v.norm();
      bool along = true;
      for (double s : {-0.1, 0.1, 0.5}) {
        Vec y = x + s * v;
        wrap_state(y, model.wrap);
        if (model.f(y).norm() >= opt.f_tol) along = false;
      }
      if (along) e.family_direction = v;
    }
    const Eigen::VectorXcd ev = Eigen::EigenSolver<Mat>(J).eigenvalues();
    for (Eigen::Index i = 0; i < ev.size(); ++i) e.eigenvalues.emplace_back(ev[i].real(), ev[i].imag());
    std::sort(e.eigenvalues.begin(), e.eigenvalues.end());
    e.stability = detail::classify(ev, e.family_direction.has_value());
    out.push_back(std::move(e));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Conal curves
// ---------------------------------------------------------------------------

struct ConalExitOptions {
  double ds = 0.01;
  bool include_extreme_rays = true;
};

/// Unit-speed conal curves through sample points, following the cone center
/// and (for polyhedral cones) each extreme ray, forward and backward. PASS iff
/// every curve leaves the region both ways within max_arclen.
inline CheckReport check_conal_exit(const SystemModel& model, const ConeField& cone, const CompactRegion& region,
                                    int n_curves, double max_arclen, const ConalExitOptions& opt = {}) {
  region.validate();
  CheckReport rep;
  rep.check = "conal_exit";
  rep.threshold = 0.0;
  rep.config_echo = {{"n_curves", n_curves}, {"max_arclen", max_arclen}, {"ds", opt.ds},
                     {"include_extreme_rays", opt.include_extreme_rays}, {"region", region.describe()}};
  rep.warnings.push_back("tested family: center curve" +
                         std::string(opt.include_extreme_rays && cone.kind == ConeKind::Polyhedral
                                         ? " and extreme-ray curves"
                                         : "") +
                         "; other conal curves are not examined");
  auto grid = region.grid();
  if (grid.empty()) throw PreconditionError("region grid is empty");
  std::vector<Vec> starts;
  const auto total = grid.size();
  const auto want = static_cast<std::size_t>(std::max(1, n_curves));
  for (std::size_t k = 0; k < std::min(want, total); ++k) starts.push_back(grid[k * total / std::min(want, total)]);

  // Direction fields: index 0 is the center, 1.. the extreme rays at the start point.
  const Vec ref = starts.front();
  std::size_t n_fields = 1;
  if (opt.include_extreme_rays && cone.kind == ConeKind::Polyhedral) n_fields += extreme_rays(cone, ref).size();

  std::optional<Vec> fixed_center;
  auto direction = [&](std::size_t field, const Vec& x, const Vec& prev) -> Vec {
    if (field == 0) {
      if (cone.state_independent) {
        if (!fixed_center) fixed_center = cone_center(cone, x);
        return *fixed_center;
      }
      return cone_center(cone, x, prev.size() ? std::optional<Vec>(prev) : std::nullopt);
    }
    const auto rays = extreme_rays(cone, x);
    if (rays.empty()) return cone_center(cone, x);
    if (prev.size() == 0) return rays[std::min(field - 1, rays.size() - 1)];
    std::size_t best = 0;
    for (std::size_t r = 1; r < rays.size(); ++r)
      if (rays[r].dot(prev) > rays[best].dot(prev)) best = r;
    return rays[best];
  };

  for (const auto& x0 : starts) {
    for (std::size_t field = 0; field < n_fields; ++field) {
      double exit_len[2] = {kInf, kInf};
      for (int dir = 0; dir < 2; ++dir) {
        const double sgn = dir == 0 ? 1.0 : -1.0;
        Vec x = x0;
        Vec prev;
        double s = 0.0;
        while (s < max_arclen) {
          Vec u = direction(field, x, prev);
          prev = u;
          // Midpoint step on the unit direction field.
          Vec mid = x + 0.5 * opt.ds * sgn * u / cone.norm(x, u);
          Vec um = direction(field, mid, prev);
          x = x + opt.ds * sgn * um / cone.norm(mid, um);
          wrap_state(x, model.wrap);
          s += opt.ds;
          if (region.margin(x) < 0.0) {
            exit_len[dir] = s;
            break;
          }
        }
      }
      const double worst = std::max(exit_len[0], exit_len[1]);
      const double slack = std::isinf(worst) ? -kInf : max_arclen - worst;
      rep.record(slack, x0, Vec(), static_cast<int>(field));
    }
  }
  rep.finalize(false);
  return rep;
}

// ---------------------------------------------------------------------------
// Bistable convergence
// ---------------------------------------------------------------------------

struct BistableOptions {
  double h = 1e-2;
  std::uint64_t seed = 5;
  double f_tol = 1e-8;
  double settle_tol = 1e-8;
  double assign_radius = 1e-5;
  CheckOptions check;
  int conal_curves = 25;
  double conal_arclen = 20.0;
};

inline constexpr const char* kCompletenessAssumption =
    "cone slices with the Hilbert metric form complete metric spaces";

inline bool converged_endpoint(const SystemModel& model, const Trajectory& tr, double f_tol, double settle_tol) {
  const Vec& xT = tr.states.back();
  if (!(model.f(xT).norm() < f_tol)) return false;
  const double t_from = 0.9 * tr.times.back();
  double disp = 0.0;
  for (std::size_t k = 0; k < tr.times.size(); ++k)
    if (tr.times[k] >= t_from) disp = std::max(disp, chart_difference(tr.states[k], xT, model.wrap).norm());
  return disp < settle_tol;
}

/// Fixed-point convergence from sampled initial conditions, with the
/// pointwise and conal-exit hypotheses checked first.
inline AttractorReport detect_bistable_convergence(const SystemModel& model, const ConeField& cone,
                                                   const CompactRegion& region, int n_ic, double T,
                                                   const BistableOptions& opt = {}) {
  AttractorReport rep;
  rep.config_echo = {{"n_ic", n_ic}, {"T", T}, {"h", opt.h}, {"seed", opt.seed}, {"f_tol", opt.f_tol},
                     {"settle_tol", opt.settle_tol}, {"region", region.describe()}};
  const auto t3 = check_theorem3(model, cone, region, opt.check);
  rep.hypotheses_checked.emplace_back("theorem3", t3.verdict);
  for (const auto& [name, v] : t3.preconditions) rep.hypotheses_checked.emplace_back(name, v);
  const auto ce = check_conal_exit(model, cone, region, opt.conal_curves, opt.conal_arclen);
  rep.hypotheses_checked.emplace_back("conal_exit", ce.verdict);
  rep.assumed.push_back(kCompletenessAssumption);

  rep.fixed_points = find_fixed_points(model, region);
  rep.basin_per_equilibrium.assign(rep.fixed_points.size(), 0.0);
  std::mt19937_64 rng(opt.seed);
  std::size_t converged = 0, unassigned = 0;
  for (int i = 0; i < n_ic; ++i) {
    const Vec x0 = region.sample_uniform(rng);
    Trajectory tr;
    try {
      tr = integrate_trajectory(model, x0, T, opt.h);
    } catch (const DivergenceError&) {
      continue;
    }
    if (!converged_endpoint(model, tr, opt.f_tol, opt.settle_tol)) continue;
    const Vec& xT = tr.states.back();
    std::size_t best = 0;
    double bd = kInf;
    for (std::size_t e = 0; e < rep.fixed_points.size(); ++e) {
      const double d = chart_difference(xT, rep.fixed_points[e].x, model.wrap).norm();
      if (d < bd) {
        bd = d;
        best = e;
      }
    }
    if (bd < opt.assign_radius) {
      rep.basin_per_equilibrium[best] += 1.0;
      ++converged;
    } else {
      ++unassigned;
    }
  }
  rep.initial_conditions = static_cast<std::size_t>(n_ic);
  for (auto& b : rep.basin_per_equilibrium) b /= std::max(1, n_ic);
  rep.basin_fraction = static_cast<double>(converged) / std::max(1, n_ic);
  if (unassigned > 0)
    rep.notes.push_back(std::to_string(unassigned) + " trajectories settled away from every located equilibrium");
  rep.notes.push_back("theorem3 margin " + std::to_string(t3.worst_margin));
  rep.kind = rep.hypotheses_pass() && rep.basin_fraction >= 0.99 && !rep.fixed_points.empty()
                 ? AttractorKind::FixedPoints
                 : AttractorKind::Undetermined;
  return rep;
}

// ---------------------------------------------------------------------------
// Invariant vector field
// ---------------------------------------------------------------------------

struct VectorFieldOptions {
  double eps = 0.0;
  double growth_cap = 1e3;   // |dpsi_t v| / |v| must stay below this
  double angle_tol = 1e-6;
  std::uint64_t seed = 9;
};

/// Sub-checks: (a) v in the eps-cone on the grid, (b) bounded propagation,
/// (c) dpsi_t(x) v(x) parallel to v(psi_t(x)). Each record's constraint field
/// is the sub-check index 0, 1, 2.
inline CheckReport check_invariant_vector_field(const SystemModel& model, const ConeField& cone,
                                                const CompactRegion& region, const std::function<Vec(const Vec&)>& v,
                                                double T, double h, int n_ic, const VectorFieldOptions& opt = {}) {
  region.validate();
  CheckReport rep;
  rep.check = "invariant_vector_field";
  rep.threshold = 0.0;
  rep.config_echo = {{"T", T}, {"h", h}, {"n_ic", n_ic}, {"eps", opt.eps}, {"growth_cap", opt.growth_cap},
                     {"angle_tol", opt.angle_tol}, {"seed", opt.seed}, {"region", region.describe()}};
  double worst[3] = {kInf, kInf, kInf};
  auto note = [&](int sub, double value, const Vec& x, const Vec& th, double t = std::numeric_limits<double>::quiet_NaN(),
                  const Vec& reached = Vec()) {
    worst[sub] = std::min(worst[sub], value);
    rep.record(value, x, th, sub, t, reached);
  };
  for (const auto& x : region.grid()) {
    const Vec vx = v(x);
    if (!(cone.norm(x, vx) > 0.0)) {
      note(0, -kInf, x, vx);
      continue;
    }
    note(0, membership(cone, x, vx, opt.eps).margin + kBoundaryTol, x, vx);
  }
  std::mt19937_64 rng(opt.seed);
  for (int i = 0; i < n_ic; ++i) {
    const Vec x0 = region.sample_uniform(rng);
    const Vec v0 = v(x0);
    const double n0 = cone.norm(x0, v0);
    if (!(n0 > 0.0)) {
      note(0, -kInf, x0, v0);
      continue;
    }
    try {
      const auto tr = integrate_prolonged(model, x0, v0, T, h);
      double growth = -kInf, angle = 0.0, t_angle = 0.0;
      Vec x_angle = x0;
      for (std::size_t k = 0; k < tr.times.size(); ++k) {
        growth = std::max(growth, tr.log_mags[k] - std::log(n0));
        const Vec vk = v(tr.states[k]);
        const double nv = cone.norm(tr.states[k], vk);
        if (!(nv > 0.0)) {
          angle = kPi;
          t_angle = tr.times[k];
          x_angle = tr.states[k];
          break;
        }
        // Chord-based angle; acos loses precision near 1.
        const double a = 2.0 * std::asin(std::min(1.0, (tr.directions[k] - vk / nv).norm() / 2.0));
        if (a > angle) {
          angle = a;
          t_angle = tr.times[k];
          x_angle = tr.states[k];
        }
      }
      note(1, std::log(opt.growth_cap) - growth, x0, v0, T, tr.states.back());
      note(2, opt.angle_tol - angle, x0, v0, t_angle, x_angle);
    } catch (const DivergenceError& e) {
      note(1, -kInf, x0, v0, e.time());
    }
  }
  const char* names[3] = {"a_field_in_cone", "b_bounded", "c_direction_invariant"};
  for (int s = 0; s < 3; ++s) {
    rep.preconditions.emplace_back(names[s], worst[s] < 0.0 ? Verdict::Fail : Verdict::Pass);
    if (worst[s] < 0.0) rep.warnings.push_back(std::string("sub-check ") + names[s] + " failed");
  }
  rep.finalize(false);
  return rep;
}

// ---------------------------------------------------------------------------
// Limit cycles
// ---------------------------------------------------------------------------

struct LimitCycleOptions {
  double h = 1e-3;
  std::vector<double> eps_sweep = {0.5, 0.2, 0.1, 0.05, 0.02, 0.01, 0.001};
  int n_ics = 10;
  std::uint64_t seed = 13;
  double event_tol = 1e-10;
  double locality_radius = 1.0;
  double perturbation = 0.04;
  double return_floor = 1e-9;
  double hausdorff_tol = 1e-4;
  double closure_tol = 1e-4;
  std::size_t max_orbit_points = 2000;
  CheckOptions check;
};

struct SectionCrossing {
  double time = 0.0;
  Vec point;
};

namespace detail {

/// Crossings of the hyperplane <n, x - p> = 0 in the positive direction
/// within `radius` of p, each localized by bisection on the sub-step time.
inline std::vector<SectionCrossing> section_crossings(const SystemModel& model, const Vec& x0, double T, double h,
                                                      const Vec& p, const Vec& nrm, double radius, double tol,
                                                      std::size_t max_crossings = 1000) {
  auto rhs = [&](const Vec& y) { return model.f(y); };
  auto sigma = [&](const Vec& x) { return nrm.dot(chart_difference(x, p, model.wrap)); };
  std::vector<SectionCrossing> out;
  Vec x = x0;
  wrap_state(x, model.wrap);
  double t = 0.0;
  double s_prev = sigma(x);
  for (double step : step_plan(T, h)) {
    const Vec x_prev = x;
    x = rk4_step(rhs, x_prev, step);
    if (!all_finite(x)) throw DivergenceError(t + step);
    wrap_state(x, model.wrap);
    const double s_new = sigma(x);
    if (s_prev < 0.0 && s_new >= 0.0 && chart_difference(x, p, model.wrap).norm() < radius) {
      double lo = 0.0, hi = step;
      Vec xh = x;
      while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        Vec xm = rk4_step(rhs, x_prev, mid);
        wrap_state(xm, model.wrap);
        if (sigma(xm) < 0.0) {
          lo = mid;
        } else {
          hi = mid;
          xh = xm;
        }
      }
      out.push_back({t + hi, xh});
      if (out.size() >= max_crossings) return out;
    }
    s_prev = s_new;
    t += step;
  }
  return out;
}

inline double point_segment_distance(const Vec& q, const Vec& a, const Vec& b, const std::vector<bool>& wrap) {
  const Vec ab = chart_difference(b, a, wrap);
  const Vec aq = chart_difference(q, a, wrap);
  const double L2 = ab.squaredNorm();
  const double s = L2 > 0 ? std::clamp(aq.dot(ab) / L2, 0.0, 1.0) : 0.0;
  return (aq - s * ab).norm();
}

inline std::vector<Vec> subsample(const std::vector<Vec>& pts, std::size_t max_points) {
  if (pts.size() <= max_points) return pts;
  std::vector<Vec> out;
  const double stride = static_cast<double>(pts.size() - 1) / static_cast<double>(max_points - 1);
  for (std::size_t k = 0; k < max_points; ++k) out.push_back(pts[static_cast<std::size_t>(std::llround(k * stride))]);
  return out;
}

/// One-sided distance from the points of `a` to the polyline `b`.
inline double directed_hausdorff(const std::vector<Vec>& a, const std::vector<Vec>& b, const std::vector<bool>& wrap) {
  double worst = 0.0;
  for (const auto& q : a) {
    double best = kInf;
    if (b.size() == 1) best = chart_difference(q, b[0], wrap).norm();
    for (std::size_t k = 0; k + 1 < b.size(); ++k) best = std::min(best, point_segment_distance(q, b[k], b[k + 1], wrap));
    worst = std::max(worst, best);
  }
  return worst;
}

}  // namespace detail

inline double orbit_hausdorff(const std::vector<Vec>& a, const std::vector<Vec>& b, const std::vector<bool>& wrap,
                              std::size_t max_points = 2000) {
  const auto sa = detail::subsample(a, max_points);
  const auto sb = detail::subsample(b, max_points);
  return std::max(detail::directed_hausdorff(sa, sb, wrap), detail::directed_hausdorff(sb, sa, wrap));
}

/// Largest eps in the sweep with f(x) in K_eps(x) at every grid point, or nullopt.
inline std::optional<double> field_cone_margin(const SystemModel& model, const ConeField& cone,
                                               const CompactRegion& region, const std::vector<double>& sweep) {
  double worst = kInf;
  for (const auto& x : region.grid()) {
    const Vec fx = model.f(x);
    if (!(cone.norm(x, fx) > 0.0)) return std::nullopt;
    worst = std::min(worst, membership(cone, x, fx).margin);
  }
  std::vector<double> s = sweep;
  std::sort(s.rbegin(), s.rend());
  for (double e : s)
    if (worst >= e - kBoundaryTol) return e;
  return std::nullopt;
}

/// Periodic-orbit pipeline: hypotheses, section, return map, uniqueness.
inline AttractorReport detect_limit_cycle(const SystemModel& model, const ConeField& cone, const CompactRegion& region,
                                          double T, const LimitCycleOptions& opt = {}) {
  AttractorReport rep;
  rep.config_echo = {{"T", T}, {"h", opt.h}, {"n_ics", opt.n_ics}, {"seed", opt.seed},
                     {"event_tol", opt.event_tol}, {"hausdorff_tol", opt.hausdorff_tol},
                     {"closure_tol", opt.closure_tol}, {"eps_sweep", opt.eps_sweep}, {"region", region.describe()}};
  rep.assumed.push_back(kCompletenessAssumption);

  rep.fixed_points = find_fixed_points(model, region);
  rep.hypotheses_checked.emplace_back("no_fixed_points", rep.fixed_points.empty() ? Verdict::Pass : Verdict::Fail);
  const auto eps = field_cone_margin(model, cone, region, opt.eps_sweep);
  rep.hypotheses_checked.emplace_back("field_in_cone", eps ? Verdict::Pass : Verdict::Fail);
  if (eps) rep.notes.push_back("f(x) lies in K_eps on the grid for eps=" + std::to_string(*eps));
  const auto t3 = check_theorem3(model, cone, region, opt.check);
  rep.hypotheses_checked.emplace_back("theorem3", t3.verdict);
  for (const auto& [name, v] : t3.preconditions) rep.hypotheses_checked.emplace_back(name, v);
  if (!rep.hypotheses_pass()) {
    rep.notes.push_back("hypotheses not met; no cycle search performed");
    return rep;
  }

  const int n = model.dim;
  const double transient = 0.5 * T;
  auto grid = region.grid();
  const Vec start = grid[grid.size() / 2];
  const Vec xs = flow(model, start, transient, opt.h);
  const Vec fs = model.f(xs);
  const Vec nrm = fs / fs.norm();
  auto crossings = detail::section_crossings(model, xs, T - transient, opt.h, xs, nrm, opt.locality_radius,
                                             opt.event_tol);
  if (crossings.size() < 2) {
    rep.notes.push_back("fewer than two section crossings within the horizon");
    return rep;
  }
  CycleInfo cyc;
  cyc.section_normal = nrm;
  // Period from the mean of the last few return times.
  const std::size_t m = std::min<std::size_t>(crossings.size() - 1, 5);
  cyc.period = (crossings.back().time - crossings[crossings.size() - 1 - m].time) / static_cast<double>(m);
  const Vec pstar = crossings.back().point;
  cyc.section_point = pstar;
  cyc.section_residual = std::abs(nrm.dot(chart_difference(pstar, xs, model.wrap)));

  // Reference orbit over one period from the fixed point of the return map.
  const auto orbit = integrate_trajectory(model, pstar, cyc.period, opt.h);
  cyc.orbit = orbit.states;
  cyc.closure_error = chart_difference(orbit.states.back(), pstar, model.wrap).norm();

  // Return-map contraction: successive distances from a point displaced within the section.
  bool contracting = true;
  if (n >= 2) {
    Vec tangent = Vec::Zero(n);
    for (int j = 0; j < n && tangent.norm() < 1e-12; ++j) {
      Vec e = Vec::Zero(n);
      e[j] = 1.0;
      tangent = e - e.dot(nrm) * nrm;
    }
    tangent /= tangent.norm();
    // Section through p* with the same normal: displacement stays on it.
    const Vec xp = pstar + opt.perturbation * tangent;
    const auto pc = detail::section_crossings(model, xp, 6.0 * cyc.period, opt.h, pstar, nrm, opt.locality_radius,
                                              opt.event_tol, 6);
    cyc.return_distances.push_back(opt.perturbation);
    for (const auto& c : pc) cyc.return_distances.push_back(chart_difference(c.point, pstar, model.wrap).norm());
    for (std::size_t k = 0; k + 1 < cyc.return_distances.size(); ++k) {
      if (cyc.return_distances[k] < opt.return_floor) break;
      cyc.return_ratios.push_back(cyc.return_distances[k + 1] / cyc.return_distances[k]);
    }
    std::vector<double> gt, gy;
    for (std::size_t k = 0; k < cyc.return_distances.size(); ++k)
      if (cyc.return_distances[k] >= opt.return_floor) {
        gt.push_back(static_cast<double>(k));
        gy.push_back(std::log(cyc.return_distances[k]));
      }
    if (gt.size() >= 3) cyc.geometric_fit_r_squared = fit_line(gt, gy).r_squared;
    if (cyc.return_ratios.empty() || pc.empty()) contracting = false;
    for (double r : cyc.return_ratios)
      if (!(r < 1.0)) contracting = false;

    // Monodromy matrix over one period; drop the eigenvalue whose eigenvector follows the flow.
    Mat M(n, n);
    for (int j = 0; j < n; ++j) {
      Vec e = Vec::Zero(n);
      e[j] = 1.0;
      const auto tr = integrate_prolonged(model, pstar, e, cyc.period, opt.h);
      M.col(j) = tr.tangent(tr.times.size() - 1);
    }
    Eigen::EigenSolver<Mat> es(M);
    const Vec fp = model.f(pstar).normalized();
    Eigen::Index flow_idx = 0;
    double best = -1.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::VectorXcd w = es.eigenvectors().col(i);
      const double align = std::abs(w.dot(fp.cast<std::complex<double>>())) / w.norm();
      if (align > best) {
        best = align;
        flow_idx = i;
      }
    }
    for (Eigen::Index i = 0; i < n; ++i)
      if (i != flow_idx) cyc.transverse_multipliers.push_back(std::abs(es.eigenvalues()[i]));
    for (double mu : cyc.transverse_multipliers)
      if (!(mu < 1.0)) contracting = false;
  } else {
    rep.notes.push_back("one-dimensional state: no transverse direction, return map is the identity on the section");
  }

  // Uniqueness: dispersed initial conditions must settle onto the same orbit.
  std::mt19937_64 rng(opt.seed);
  std::size_t on_orbit = 0;
  for (int i = 0; i < opt.n_ics; ++i) {
    const Vec x0 = grid.size() >= static_cast<std::size_t>(opt.n_ics)
                       ? grid[static_cast<std::size_t>(i) * grid.size() / static_cast<std::size_t>(opt.n_ics)]
                       : region.sample_uniform(rng);
    const Vec xt = flow(model, x0, transient, opt.h);
    const auto tr = integrate_trajectory(model, xt, 1.05 * cyc.period, opt.h);
    const double hd = orbit_hausdorff(tr.states, cyc.orbit, model.wrap, opt.max_orbit_points);
    cyc.max_hausdorff = std::max(cyc.max_hausdorff, hd);
    if (hd < opt.hausdorff_tol) ++on_orbit;
  }
  rep.initial_conditions = static_cast<std::size_t>(opt.n_ics);
  rep.basin_fraction = static_cast<double>(on_orbit) / std::max(1, opt.n_ics);

  if (!contracting) rep.notes.push_back("return map not contracting");
  if (cyc.closure_error >= opt.closure_tol) rep.notes.push_back("orbit does not close within tolerance");
  const bool ok = contracting && cyc.closure_error < opt.closure_tol && cyc.max_hausdorff < opt.hausdorff_tol &&
                  rep.basin_fraction >= 0.99;
  rep.cycle = std::move(cyc);
  rep.kind = ok ? AttractorKind::LimitCycle : AttractorKind::Undetermined;
  return rep;
}

// ---------------------------------------------------------------------------
// Kuramoto synchronization
// ---------------------------------------------------------------------------

struct SyncOptions {
  double h = 1e-2;
  int n_ic = 50;
  std::uint64_t seed = 17;
  double spread_tol = 1e-6;
  double saddle_eps = 1e-3;
  double max_lambda = 256.0;
  double vector_field_T = 50.0;
  int vector_field_ics = 10;
  double spread_sample_dt = 0.1;
  CheckOptions check;
};

/// True when every pairwise shortest-arc gap is below pi/2.
inline bool within_half_circle_gaps(const Vec& th) {
  for (Eigen::Index i = 0; i < th.size(); ++i)
    for (Eigen::Index j = i + 1; j < th.size(); ++j)
      if (std::abs(wrap_angle(th[i] - th[j])) >= kPi / 2) return false;
  return true;
}

inline AttractorReport kuramoto_sync_analysis(int n, const CompactRegion& region, double lambda_param, double T,
                                              const SyncOptions& opt = {}) {
  AttractorReport rep;
  rep.config_echo = {{"n", n}, {"lambda_param", lambda_param}, {"T", T}, {"h", opt.h}, {"n_ic", opt.n_ic},
                     {"seed", opt.seed}, {"spread_tol", opt.spread_tol}, {"saddle_eps", opt.saddle_eps},
                     {"region", region.describe()}};
  rep.assumed.push_back(kCompletenessAssumption);
  const auto model = kuramoto_model(n);

  // Region must avoid balanced phases and the saddle family.
  std::size_t bad = 0;
  for (const auto& th : region.grid()) {
    const auto c = centroid(th);
    if (!c.phi_defined) {
      ++bad;
      continue;
    }
    double s = 0.0;
    for (Eigen::Index k = 0; k < th.size(); ++k) s += std::pow(std::sin(th[k] - c.phi), 2);
    if (s <= opt.saddle_eps && !within_half_circle_gaps(th)) ++bad;
  }
  rep.hypotheses_checked.emplace_back("region_avoids_balanced_and_saddle", bad == 0 ? Verdict::Pass : Verdict::Fail);

  // Cone-derivative sign, doubling lambda until the margin is positive.
  SyncInfo sync;
  double lam = lambda_param;
  CheckReport t3;
  double max_mismatch = 0.0;
  while (true) {
    const auto cone = kuramoto_rho_cone(n, lam);
    CheckOptions co = opt.check;
    co.record_samples = true;
    t3 = check_theorem3(model, cone, region, co);
    for (const auto& s : t3.samples)
      if (s.constraint == 1)
        max_mismatch = std::max(max_mismatch, std::abs(s.value - kuramoto_k2_derivative(s.x, s.theta, lam)) /
                                                  (1.0 + std::abs(s.value)));
    t3.samples.clear();
    sync.lambda_param = lam;
    sync.min_derivative_margin = t3.worst_margin;
    if (t3.verdict == Verdict::Pass || 2.0 * lam > opt.max_lambda) break;
    sync.suggestions.push_back("margin " + std::to_string(t3.worst_margin) + " at lambda=" + std::to_string(lam) +
                               "; retrying with lambda=" + std::to_string(2.0 * lam));
    lam *= 2.0;
  }
  if (t3.verdict != Verdict::Pass)
    sync.suggestions.push_back("no lambda up to " + std::to_string(opt.max_lambda) +
                               " gave a positive margin; shrink the region or raise the lambda ceiling");
  rep.hypotheses_checked.emplace_back("theorem3", t3.verdict);
  for (const auto& [name, v] : t3.preconditions) rep.hypotheses_checked.emplace_back(name, v);
  std::ostringstream mm;
  mm << "closed-form cone derivative agrees with the generic evaluation to " << std::setprecision(3) << max_mismatch;
  rep.notes.push_back(mm.str());

  // Consensus direction as the invariant vector field.
  const auto cone = kuramoto_rho_cone(n, lam);
  const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(n));
  VectorFieldOptions vo;
  vo.seed = opt.seed + 1;
  const auto vf = check_invariant_vector_field(
      model, cone, region, [n, inv_sqrt_n](const Vec&) { return Vec(Vec::Constant(n, inv_sqrt_n)); },
      opt.vector_field_T, opt.h, opt.vector_field_ics, vo);
  rep.hypotheses_checked.emplace_back("invariant_vector_field", vf.verdict);

  // Phase spread from random initial conditions.
  std::mt19937_64 rng(opt.seed);
  std::size_t synced = 0;
  std::size_t monotone = 0;
  const int every = std::max(1, static_cast<int>(std::lround(opt.spread_sample_dt / opt.h)));
  for (int i = 0; i < opt.n_ic; ++i) {
    const Vec x0 = region.sample_uniform(rng);
    std::vector<std::pair<double, double>> series;
    int k = 0;
    integrate_observed(model, x0, T, opt.h, [&](double t, const Vec& x) {
      if (k++ % every == 0 || t >= T - 1e-9) series.emplace_back(t, circular_spread(x));
      return true;
    });
    const double last = series.back().second;
    sync.max_final_spread = std::max(sync.max_final_spread, last);
    if (last < opt.spread_tol) ++synced;
    bool mono = true;
    for (std::size_t j = 1; j < series.size(); ++j)
      if (series[j].second > series[j - 1].second + 1e-12) mono = false;
    if (mono) ++monotone;
    rep.spread_series.push_back(std::move(series));
  }
  rep.initial_conditions = static_cast<std::size_t>(opt.n_ic);
  rep.basin_fraction = static_cast<double>(synced) / std::max(1, opt.n_ic);
  rep.notes.push_back(std::to_string(monotone) + " of " + std::to_string(opt.n_ic) +
                      " phase-spread series decrease monotonically");
  rep.sync = std::move(sync);
  rep.kind = rep.hypotheses_pass() && rep.basin_fraction >= 0.99 ? AttractorKind::Synchronization
                                                                 : AttractorKind::Undetermined;
  return rep;
}

}  // namespace dpos
