#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "dpos/common.hpp"
#include "dpos/region.hpp"
#include "dpos/report.hpp"

namespace dpos {

/// Autonomous system xdot = f(x) on R^n or a flat torus component-wise.
struct SystemModel {
  int dim = 0;
  std::function<Vec(const Vec&)> field;
  std::function<Mat(const Vec&)> jacobian;  // empty: central finite differences
  std::function<Mat(const Vec&)> metric;    // empty: identity
  bool metric_constant = true;              // only consulted when `metric` is set
  std::vector<bool> wrap;                   // true: axis lives on the circle, period 2*pi
  std::string name;

  SystemModel() = default;
  SystemModel(int n, std::function<Vec(const Vec&)> f, std::function<Mat(const Vec&)> jac = {},
              std::vector<bool> wrap_flags = {}, std::string model_name = {})
      : dim(n), field(std::move(f)), jacobian(std::move(jac)), wrap(std::move(wrap_flags)), name(std::move(model_name)) {
    if (wrap.empty()) wrap.assign(static_cast<std::size_t>(n), false);
    if (dim <= 0 || static_cast<int>(wrap.size()) != dim) throw PreconditionError("model dimension mismatch");
  }

  Vec f(const Vec& x) const {
    Vec v = field(x);
    if (const int bad = first_non_finite(v); bad >= 0) throw EvaluationError("vector field is not finite", bad);
    return v;
  }

  Mat G(const Vec& x) const { return metric ? metric(x) : Mat::Identity(dim, dim); }

  double inner(const Vec& x, const Vec& a, const Vec& b) const {
    return metric ? a.dot(metric(x) * b) : a.dot(b);
  }

  double norm(const Vec& x, const Vec& v) const { return std::sqrt(inner(x, v, v)); }
};

/// Discretized solution of xdot = f(x).
struct Trajectory {
  std::vector<double> times;
  std::vector<Vec> states;
};

/// Discretized solution of the prolonged system with the tangent stored as a
/// unit direction plus an accumulated log-magnitude.
struct TangentTrajectory {
  std::vector<double> times;
  std::vector<Vec> states;
  std::vector<Vec> directions;
  std::vector<double> log_mags;
  std::size_t renormalizations = 0;  // normalized flow only
  double max_drift = 0.0;            // normalized flow only: largest ||theta| - 1| before correction

  /// exp(log_mag) * direction at sample k.
  Vec tangent(std::size_t k) const { return std::exp(log_mags[k]) * directions[k]; }
};

namespace detail {

inline double fd_step(double xi) { return 1e-6 * (1.0 + std::abs(xi)); }

inline Mat finite_difference_jacobian(const SystemModel& model, const Vec& x) {
  const int n = model.dim;
  Mat J(n, n);
  for (int j = 0; j < n; ++j) {
    const double h = fd_step(x[j]);
    Vec xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    J.col(j) = (model.f(xp) - model.f(xm)) / (2.0 * h);
  }
  return J;
}

/// Sum_i dG/dx_i f_i, zero for constant metrics.
inline Mat metric_rate(const SystemModel& model, const Vec& x, const Vec& fx) {
  const int n = model.dim;
  Mat out = Mat::Zero(n, n);
  if (!model.metric || model.metric_constant) return out;
  for (int i = 0; i < n; ++i) {
    const double h = fd_step(x[i]);
    Vec xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    out += (model.metric(xp) - model.metric(xm)) / (2.0 * h) * fx[i];
  }
  return out;
}

/// One classical RK4 step of ydot = rhs(y).
template <class Rhs>
Vec rk4_step(const Rhs& rhs, const Vec& y, double h) {
  const Vec k1 = rhs(y);
  const Vec k2 = rhs(y + 0.5 * h * k1);
  const Vec k3 = rhs(y + 0.5 * h * k2);
  const Vec k4 = rhs(y + h * k3);
  return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// f evaluated at an RK4 stage; a failure on a blown-up stage state is a
/// divergence of the trajectory, not a defect of the field.
inline Vec stage_field(const SystemModel& model, const Vec& y, double t) {
  if (!all_finite(y) || y.cwiseAbs().maxCoeff() > 1e150) {
    try {
      return model.f(y);
    } catch (const EvaluationError&) {
      throw DivergenceError(t);
    }
  }
  return model.f(y);
}

/// Step sizes covering [0, T]: full steps of h and one shorter final step.
inline std::vector<double> step_plan(double T, double h) {
  if (!(h > 0.0)) throw PreconditionError("step size must be positive");
  if (!(T >= 0.0)) throw PreconditionError("horizon must be non-negative");
  std::vector<double> steps;
  const auto full = static_cast<std::size_t>(std::floor(T / h + 1e-9));
  steps.assign(full, h);
  const double rest = T - static_cast<double>(full) * h;
  if (rest > 1e-12 * std::max(1.0, T)) steps.push_back(rest);
  return steps;
}

}  // namespace detail

/// Analytic Jacobian if supplied, central differences otherwise.
inline Mat eval_jacobian(const SystemModel& model, const Vec& x) {
  Mat J = model.jacobian ? model.jacobian(x) : detail::finite_difference_jacobian(model, x);
  if (const int bad = first_non_finite(J); bad >= 0) throw EvaluationError("Jacobian is not finite", bad);
  return J;
}

/// Largest entrywise gap between the analytic and finite-difference Jacobians,
/// relative to max(1, |J|_max).
inline double jacobian_mismatch(const SystemModel& model, const Vec& x) {
  if (!model.jacobian) return 0.0;
  const Mat a = model.jacobian(x);
  const Mat fd = detail::finite_difference_jacobian(model, x);
  return (a - fd).cwiseAbs().maxCoeff() / std::max(1.0, a.cwiseAbs().maxCoeff());
}

/// Smallest eigenvalue of G(x); positive for a valid metric.
inline double metric_min_eigenvalue(const SystemModel& model, const Vec& x) {
  const Mat G = model.G(x);
  if ((G - G.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, G.cwiseAbs().maxCoeff())) return -kInf;
  return Eigen::SelfAdjointEigenSolver<Mat>(G).eigenvalues().minCoeff();
}

/// Fixed-step RK4 for xdot = f(x). The observer sees every accepted state and
/// may stop the run early by returning false.
template <class Observer>
void integrate_observed(const SystemModel& model, const Vec& x0, double T, double h, Observer&& observe) {
  double t = 0.0;
  auto rhs = [&](const Vec& y) { return detail::stage_field(model, y, t); };
  Vec x = x0;
  wrap_state(x, model.wrap);
  if (!observe(t, x)) return;
  for (double step : detail::step_plan(T, h)) {
    x = detail::rk4_step(rhs, x, step);
    t += step;
    if (!all_finite(x)) throw DivergenceError(t);
    wrap_state(x, model.wrap);
    if (!observe(t, x)) return;
  }
}

inline Trajectory integrate_trajectory(const SystemModel& model, const Vec& x0, double T, double h) {
  Trajectory out;
  integrate_observed(model, x0, T, h, [&](double t, const Vec& x) {
    out.times.push_back(t);
    out.states.push_back(x);
    return true;
  });
  return out;
}

/// Final state only.
inline Vec flow(const SystemModel& model, const Vec& x0, double T, double h) {
  Vec last = x0;
  integrate_observed(model, x0, T, h, [&](double, const Vec& x) {
    last = x;
    return true;
  });
  return last;
}

/// Co-integrates (x, dx) with RK4. After every step the tangent is rescaled to
/// unit metric norm and the scale folded into the log-magnitude, so
/// direction * exp(log_mag) reproduces dpsi_t(x0) dx0.
inline TangentTrajectory integrate_prolonged(const SystemModel& model, const Vec& x0, const Vec& dx0, double T,
                                             double h) {
  const int n = model.dim;
  Vec x = x0;
  wrap_state(x, model.wrap);
  const double n0 = model.norm(x, dx0);
  if (!(n0 > 0.0)) throw DegenerateVectorError();

  TangentTrajectory out;
  Vec y(2 * n);
  y.head(n) = x;
  y.tail(n) = dx0 / n0;
  double log_mag = std::log(n0);
  double t = 0.0;
  out.times.push_back(t);
  out.states.push_back(x);
  out.directions.push_back(y.tail(n));
  out.log_mags.push_back(log_mag);

  auto rhs = [&](const Vec& s) {
    Vec d(2 * n);
    d.head(n) = detail::stage_field(model, s.head(n), t);
    d.tail(n) = eval_jacobian(model, s.head(n)) * s.tail(n);
    return d;
  };
  for (double step : detail::step_plan(T, h)) {
    y = detail::rk4_step(rhs, y, step);
    t += step;
    if (!all_finite(y)) throw DivergenceError(t);
    Vec xs = y.head(n);
    wrap_state(xs, model.wrap);
    y.head(n) = xs;
    const double scale = model.norm(xs, y.tail(n));
    if (!(scale > 0.0) || !std::isfinite(scale)) throw DivergenceError(t);
    y.tail(n) /= scale;
    log_mag += std::log(scale);
    out.times.push_back(t);
    out.states.push_back(xs);
    out.directions.push_back(y.tail(n));
    out.log_mags.push_back(log_mag);
  }
  return out;
}

namespace detail {

inline double lambda_raw(const SystemModel& model, const Vec& x, const Vec& theta, const Mat& J, const Vec& fx) {
  if (!model.metric) return theta.dot(J * theta);
  const Mat G = model.metric(x);
  const Mat S = G * J + J.transpose() * G + metric_rate(model, x, fx);
  return 0.5 * theta.dot(S * theta);
}

}  // namespace detail

/// Growth rate of |dx| along the prolonged flow for a unit tangent theta:
/// 1/2 theta^T (G J + J^T G + sum_i dG/dx_i f_i) theta.
inline double normalization_lambda(const SystemModel& model, const Vec& x, const Vec& theta) {
  const double nrm = model.norm(x, theta);
  if (std::abs(nrm - 1.0) > 1e-8) throw PreconditionError("normalization_lambda needs a unit tangent");
  return detail::lambda_raw(model, x, theta, eval_jacobian(model, x), model.f(x));
}

struct NormalizedFlowOptions {
  double renormalize_above = 1e-8;
  double fail_above = 1e-6;
};

/// Projective flow thetadot = (J - lambda) theta together with x and the
/// log-magnitude rate lambda. Drift of |theta| beyond 1e-8 triggers a hard
/// renormalization (counted); beyond 1e-6 raises NormalizationError.
inline TangentTrajectory integrate_normalized(const SystemModel& model, const Vec& x0, const Vec& theta0, double T,
                                              double h, NormalizedFlowOptions opt = {}) {
  const int n = model.dim;
  Vec x = x0;
  wrap_state(x, model.wrap);
  if (std::abs(model.norm(x, theta0) - 1.0) > 1e-8) throw PreconditionError("initial direction must be unit length");

  TangentTrajectory out;
  Vec y(2 * n + 1);
  y.head(n) = x;
  y.segment(n, n) = theta0;
  y[2 * n] = 0.0;
  double t = 0.0;
  out.times.push_back(t);
  out.states.push_back(x);
  out.directions.push_back(theta0);
  out.log_mags.push_back(0.0);

  auto rhs = [&](const Vec& s) {
    const Vec xs = s.head(n);
    const Vec th = s.segment(n, n);
    const Vec fx = detail::stage_field(model, xs, t);
    const Mat J = eval_jacobian(model, xs);
    const double lam = detail::lambda_raw(model, xs, th, J, fx);
    Vec d(2 * n + 1);
    d.head(n) = fx;
    d.segment(n, n) = J * th - lam * th;
    d[2 * n] = lam;
    return d;
  };
  for (double step : detail::step_plan(T, h)) {
    y = detail::rk4_step(rhs, y, step);
    t += step;
    if (!all_finite(y)) throw DivergenceError(t);
    Vec xs = y.head(n);
    wrap_state(xs, model.wrap);
    y.head(n) = xs;
    const double nrm = model.norm(xs, y.segment(n, n));
    const double drift = std::abs(nrm - 1.0);
    out.max_drift = std::max(out.max_drift, drift);
    if (drift > opt.fail_above) throw NormalizationError(t, drift);
    if (drift > opt.renormalize_above) {
      y.segment(n, n) /= nrm;
      y[2 * n] += std::log(nrm);
      ++out.renormalizations;
    }
    out.times.push_back(t);
    out.states.push_back(xs);
    out.directions.push_back(y.segment(n, n));
    out.log_mags.push_back(y[2 * n]);
  }
  return out;
}

/// Integrates from the region boundary and reports the most negative region
/// margin reached. PASS iff no trajectory leaves by more than `tol`.
inline CheckReport check_forward_invariance(const SystemModel& model, const CompactRegion& region, double T, double h,
                                            int boundary_samples, double tol = 1e-9) {
  region.validate();
  CheckReport rep;
  rep.check = "forward_invariance";
  rep.threshold = -tol;
  rep.config_echo = {{"T", T}, {"h", h}, {"boundary_samples", boundary_samples}, {"tol", tol},
                     {"region", region.describe()}};
  const auto starts = region.boundary_grid(boundary_samples);
  if (starts.empty()) {
    // No boundary at all (e.g. the whole torus): nothing can leave.
    rep.worst_margin = kInf;
    rep.warnings.push_back("region has no boundary; invariance holds trivially");
    rep.finalize(false);
    return rep;
  }
  for (const auto& x0 : starts) {
    double worst = kInf, worst_t = 0.0;
    Vec worst_x = x0;
    try {
      integrate_observed(model, x0, T, h, [&](double t, const Vec& x) {
        const double m = region.margin(x);
        if (m < worst) {
          worst = m;
          worst_t = t;
          worst_x = x;
        }
        return true;
      });
    } catch (const DivergenceError& e) {
      worst = -kInf;
      worst_t = e.time();
    }
    rep.record(worst, x0, Vec(), -1, worst_t, worst_x);
  }
  rep.finalize(false);
  return rep;
}

}  // namespace dpos
