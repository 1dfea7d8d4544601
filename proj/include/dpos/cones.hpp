#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "dpos/common.hpp"

namespace dpos {

enum class ConeKind { Polyhedral, Quadratic, Custom };

inline const char* to_string(ConeKind k) {
  switch (k) {
    case ConeKind::Polyhedral: return "polyhedral";
    case ConeKind::Quadratic: return "quadratic";
    case ConeKind::Custom: return "custom";
  }
  return "?";
}

/// One smooth constraint K_i(x, dx) >= eps on unit tangents.
struct ConeConstraint {
  std::function<double(const Vec& x, const Vec& dx)> value;
  std::function<Vec(const Vec& x, const Vec& dx)> grad_dx;
  std::function<Vec(const Vec& x, const Vec& dx)> grad_x;  // empty: finite differences
  int degree = 1;                                          // positive homogeneity in dx
};

/// Cone field K_eps(x) = { dx != 0 : K_i(x, dx/|dx|_x) >= eps for all i } plus {0}.
struct ConeField {
  ConeKind kind = ConeKind::Custom;
  int dim = 0;
  std::vector<ConeConstraint> constraints;
  std::function<Mat(const Vec&)> frame;   // rows F_i(x), when built from generators
  std::function<Mat(const Vec&)> metric;  // empty: identity
  bool state_independent = true;          // K_i independent of x: gradients in x vanish
  double feasibility_eps = 0.0;           // estimated max over unit tangents of min_i K_i
  std::string name;

  std::size_t size() const { return constraints.size(); }

  double norm(const Vec& x, const Vec& v) const {
    return metric ? std::sqrt(v.dot(metric(x) * v)) : v.norm();
  }

  double value(std::size_t i, const Vec& x, const Vec& dx) const { return constraints[i].value(x, dx); }

  Vec grad_dx(std::size_t i, const Vec& x, const Vec& dx) const { return constraints[i].grad_dx(x, dx); }

  Vec grad_x(std::size_t i, const Vec& x, const Vec& dx) const {
    if (state_independent) return Vec::Zero(dim);
    if (constraints[i].grad_x) return constraints[i].grad_x(x, dx);
    Vec g(dim);
    for (int j = 0; j < dim; ++j) {
      const double h = 1e-6 * (1.0 + std::abs(x[j]));
      Vec xp = x, xm = x;
      xp[j] += h;
      xm[j] -= h;
      g[j] = (value(i, xp, dx) - value(i, xm, dx)) / (2.0 * h);
    }
    return g;
  }

  /// dK_i/dt along the vector field (xdot, dxdot) = (fx, v).
  double directional_derivative(std::size_t i, const Vec& x, const Vec& dx, const Vec& fx, const Vec& v) const {
    double d = grad_dx(i, x, dx).dot(v);
    if (!state_independent) d += grad_x(i, x, dx).dot(fx);
    return d;
  }

  double min_value(const Vec& x, const Vec& dx) const {
    double m = kInf;
    for (std::size_t i = 0; i < size(); ++i) m = std::min(m, value(i, x, dx));
    return m;
  }

  /// Exact closed-cone predicate on an unnormalized vector (zero included).
  /// Sign is scale-invariant because every K_i is positively homogeneous.
  bool contains(const Vec& x, const Vec& v) const {
    for (std::size_t i = 0; i < size(); ++i)
      if (value(i, x, v) < 0.0) return false;
    return true;
  }
};

// ---------------------------------------------------------------------------
// Membership
// ---------------------------------------------------------------------------

enum class MembershipStatus { Interior, Boundary, Outside };

inline const char* to_string(MembershipStatus s) {
  switch (s) {
    case MembershipStatus::Interior: return "Interior";
    case MembershipStatus::Boundary: return "Boundary";
    case MembershipStatus::Outside: return "Outside";
  }
  return "?";
}

struct MembershipVerdict {
  MembershipStatus status = MembershipStatus::Outside;
  double margin = 0.0;      // min_i K_i(x, dx/|dx|) - eps
  std::vector<int> active;  // zero-based indices attaining the minimum within tolerance
};

inline constexpr double kBoundaryTol = 1e-9;

inline MembershipVerdict membership(const ConeField& cone, const Vec& x, const Vec& dx, double eps = 0.0,
                                    double tol = kBoundaryTol) {
  const double nrm = cone.norm(x, dx);
  if (!(nrm > 0.0)) throw DegenerateVectorError();
  const Vec u = dx / nrm;
  std::vector<double> k(cone.size());
  double mn = kInf;
  for (std::size_t i = 0; i < cone.size(); ++i) {
    k[i] = cone.value(i, x, u);
    mn = std::min(mn, k[i]);
  }
  MembershipVerdict v;
  v.margin = mn - eps;
  for (std::size_t i = 0; i < k.size(); ++i)
    if (k[i] - mn <= tol) v.active.push_back(static_cast<int>(i));
  if (v.margin > tol)
    v.status = MembershipStatus::Interior;
  else if (std::abs(v.margin) <= tol)
    v.status = MembershipStatus::Boundary;
  else
    v.status = MembershipStatus::Outside;
  return v;
}

// ---------------------------------------------------------------------------
// Hilbert projective metric by bisection on the membership predicate.
// ---------------------------------------------------------------------------

struct HilbertOptions {
  double rel_tol = 1e-10;
  double bound = 1e12;
  double zero_floor = 1e-14;  // m below this (in units of |dx|/|dy|) counts as 0
};

struct HilbertResult {
  double M = kInf;
  double m = 0.0;
  double distance = kInf;
};

namespace detail {

inline void require_in_cone(const ConeField& cone, const Vec& x, const Vec& v, const char* which) {
  if (membership(cone, x, v).status == MembershipStatus::Outside)
    throw PreconditionError(std::string("hilbert metric: ") + which + " is outside the cone");
}

/// inf{ mu >= 0 : mu b - a in K } for unit a, b.
inline double hilbert_M_unit(const ConeField& cone, const Vec& x, const Vec& a, const Vec& b,
                             const HilbertOptions& opt) {
  auto feasible = [&](double mu) { return cone.contains(x, mu * b - a); };
  double lo = 0.0, hi = 1.0;
  while (!feasible(hi)) {
    lo = hi;
    hi *= 2.0;
    if (hi > opt.bound) return kInf;
  }
  for (int it = 0; it < 400 && hi - lo > opt.rel_tol * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (feasible(mid) ? hi : lo) = mid;
  }
  return hi;
}

/// sup{ mu >= 0 : a - mu b in K } for unit a, b.
inline double hilbert_m_unit(const ConeField& cone, const Vec& x, const Vec& a, const Vec& b,
                             const HilbertOptions& opt) {
  auto feasible = [&](double mu) { return cone.contains(x, a - mu * b); };
  double lo = 0.0, hi = 1.0;
  if (feasible(hi)) {
    while (feasible(hi)) {
      lo = hi;
      hi *= 2.0;
      if (hi > opt.bound) return opt.bound;
    }
  }
  for (int it = 0; it < 400 && hi - lo > opt.rel_tol * hi; ++it) {
    if (hi < opt.zero_floor) return 0.0;
    const double mid = 0.5 * (lo + hi);
    (feasible(mid) ? lo : hi) = mid;
  }
  return lo;
}

}  // namespace detail

inline double hilbert_M(const ConeField& cone, const Vec& x, const Vec& dx, const Vec& dy, HilbertOptions opt = {}) {
  detail::require_in_cone(cone, x, dx, "dx");
  detail::require_in_cone(cone, x, dy, "dy");
  const double nx = cone.norm(x, dx), ny = cone.norm(x, dy);
  const double mu = detail::hilbert_M_unit(cone, x, dx / nx, dy / ny, opt);
  return std::isinf(mu) ? kInf : mu * nx / ny;
}

inline double hilbert_m(const ConeField& cone, const Vec& x, const Vec& dx, const Vec& dy, HilbertOptions opt = {}) {
  detail::require_in_cone(cone, x, dx, "dx");
  detail::require_in_cone(cone, x, dy, "dy");
  const double nx = cone.norm(x, dx), ny = cone.norm(x, dy);
  return detail::hilbert_m_unit(cone, x, dx / nx, dy / ny, opt) * nx / ny;
}

/// d(dx, dy) = log(M/m), +inf when M is unbounded or m vanishes.
inline HilbertResult hilbert(const ConeField& cone, const Vec& x, const Vec& dx, const Vec& dy,
                             HilbertOptions opt = {}) {
  detail::require_in_cone(cone, x, dx, "dx");
  detail::require_in_cone(cone, x, dy, "dy");
  const double nx = cone.norm(x, dx), ny = cone.norm(x, dy);
  const Vec a = dx / nx, b = dy / ny;
  HilbertResult r;
  const double Mu = detail::hilbert_M_unit(cone, x, a, b, opt);
  const double mu = detail::hilbert_m_unit(cone, x, a, b, opt);
  r.M = std::isinf(Mu) ? kInf : Mu * nx / ny;
  r.m = mu * nx / ny;
  r.distance = (std::isinf(Mu) || mu <= 0.0) ? kInf : std::max(0.0, std::log(Mu / mu));
  return r;
}

inline double hilbert_distance(const ConeField& cone, const Vec& x, const Vec& dx, const Vec& dy,
                               HilbertOptions opt = {}) {
  return hilbert(cone, x, dx, dy, opt).distance;
}

// ---------------------------------------------------------------------------
// Sphere sampling and maximin directions
// ---------------------------------------------------------------------------

/// Uniform direction on the metric unit sphere.
template <class Rng>
Vec random_unit(const ConeField& cone, const Vec& x, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Vec v(cone.dim);
  double n2 = 0.0;
  while (n2 < 1e-20) {
    for (int i = 0; i < cone.dim; ++i) v[i] = g(rng);
    n2 = v.squaredNorm();
  }
  if (cone.metric) {
    const Eigen::LLT<Mat> llt(cone.metric(x));
    v = llt.matrixU().solve(v);  // G = U^T U, so |U^{-1} g|_G = |g|
  }
  return v / cone.norm(x, v);
}

struct MaximinResult {
  Vec direction;
  double value = -kInf;  // min_i of the (raw or scaled) constraints at `direction`
};

namespace detail {

/// min_i K_i(x, u/|u|), optionally with each K_i divided by |dK_i/ddx|, which
/// turns the minimum into a first-order distance to the nearest facet.
inline double maximin_objective(const ConeField& cone, const Vec& x, const Vec& u, bool scaled) {
  const Vec w = u / cone.norm(x, u);
  double m = kInf;
  for (std::size_t i = 0; i < cone.size(); ++i) {
    double k = cone.value(i, x, w);
    if (scaled) {
      const double g = cone.grad_dx(i, x, w).norm();
      if (g > 0) k /= g;
    }
    m = std::min(m, k);
  }
  return m;
}

inline double softmin_objective(const ConeField& cone, const Vec& x, const Vec& u, bool scaled, double tau) {
  const Vec w = u / cone.norm(x, u);
  std::vector<double> k(cone.size());
  double mn = kInf;
  for (std::size_t i = 0; i < cone.size(); ++i) {
    k[i] = cone.value(i, x, w);
    if (scaled) {
      const double g = cone.grad_dx(i, x, w).norm();
      if (g > 0) k[i] /= g;
    }
    mn = std::min(mn, k[i]);
  }
  double s = 0.0;
  for (double v : k) s += std::exp(-(v - mn) / tau);
  return mn - tau * std::log(s);
}

/// Gradient ascent of the soft minimum with a shrinking temperature.
inline Vec maximin_ascent(const ConeField& cone, const Vec& x, Vec u, bool scaled) {
  const int n = cone.dim;
  u /= u.norm();
  for (double tau : {5e-2, 1e-2, 2e-3, 4e-4, 1e-4}) {
    double step = 0.2;
    double cur = softmin_objective(cone, x, u, scaled, tau);
    for (int it = 0; it < 400 && step > 1e-10; ++it) {
      Vec g(n);
      for (int j = 0; j < n; ++j) {
        Vec up = u, um = u;
        up[j] += 1e-7;
        um[j] -= 1e-7;
        g[j] = (softmin_objective(cone, x, up, scaled, tau) - softmin_objective(cone, x, um, scaled, tau)) / 2e-7;
      }
      g -= g.dot(u) * u;
      const double gn = g.norm();
      if (!(gn > 1e-14)) break;
      Vec trial = u + step * g / gn;
      trial /= trial.norm();
      const double val = softmin_objective(cone, x, trial, scaled, tau);
      if (val > cur) {
        u = trial;
        cur = val;
        step = std::min(step * 1.5, 0.5);
      } else {
        step *= 0.5;
      }
    }
  }
  return u;
}

}  // namespace detail

/// Direction maximizing min_i K_i over the unit sphere, by multi-start local
/// search. `scaled` selects facet-distance scaling (the analytic center).
inline MaximinResult maximin_direction(const ConeField& cone, const Vec& x, bool scaled, int starts = 64,
                                       std::uint64_t seed = 0x5eed, const std::optional<Vec>& warm = std::nullopt) {
  MaximinResult best;
  auto consider = [&](const Vec& u) {
    const Vec w = u / cone.norm(x, u);
    const double v = detail::maximin_objective(cone, x, w, scaled);
    if (v > best.value) {
      best.value = v;
      best.direction = w;
    }
  };
  if (cone.dim == 1) {
    consider(Vec::Constant(1, 1.0));
    consider(Vec::Constant(1, -1.0));
    return best;
  }
  if (warm) consider(detail::maximin_ascent(cone, x, *warm, scaled));
  std::mt19937_64 rng(seed);
  for (int s = 0; s < starts; ++s) consider(detail::maximin_ascent(cone, x, random_unit(cone, x, rng), scaled));
  return best;
}

/// Analytic center direction of the cone at x.
inline Vec cone_center(const ConeField& cone, const Vec& x, const std::optional<Vec>& warm = std::nullopt) {
  return maximin_direction(cone, x, true, warm ? 0 : 16, 0xce47e5, warm).direction;
}

// ---------------------------------------------------------------------------
// Constructors
// ---------------------------------------------------------------------------

namespace detail {

inline void finish_feasibility(ConeField& cone, const Vec& x) {
  cone.feasibility_eps = maximin_direction(cone, x, false).value;
  if (!(cone.feasibility_eps > 1e-9))
    throw InfeasibleConeError("cone has no interior: estimated feasibility margin " +
                              std::to_string(cone.feasibility_eps));
}

inline std::vector<Vec> default_samples(int n, std::span<const Vec> samples) {
  if (!samples.empty()) return {samples.begin(), samples.end()};
  return {Vec::Zero(n)};
}

}  // namespace detail

/// K_i(x, dx) = <F_i(x), dx>_x for frame rows F_i. Requires m >= n nonzero
/// generators of full rank at every sample and a strictly feasible interior.
inline ConeField polyhedral_cone(std::function<Mat(const Vec&)> frame, int dim,
                                 std::function<Mat(const Vec&)> metric = {}, std::span<const Vec> samples = {},
                                 bool frame_constant = true, std::string name = "polyhedral") {
  ConeField cone;
  cone.kind = ConeKind::Polyhedral;
  cone.dim = dim;
  cone.frame = frame;
  cone.metric = metric;
  cone.state_independent = frame_constant && !metric;
  cone.name = std::move(name);
  const auto xs = detail::default_samples(dim, samples);
  const Mat F0 = frame(xs.front());
  if (F0.cols() != dim) throw ConeConstructionError("generator rows must have the state dimension");
  if (F0.rows() < dim) throw ConeConstructionError("polyhedral cone needs at least n generators");
  for (Eigen::Index i = 0; i < F0.rows(); ++i) {
    const auto idx = static_cast<std::size_t>(i);
    ConeConstraint c;
    c.degree = 1;
    c.value = [frame, metric, idx](const Vec& x, const Vec& dx) {
      const Vec Fi = frame(x).row(static_cast<Eigen::Index>(idx)).transpose();
      return metric ? Fi.dot(metric(x) * dx) : Fi.dot(dx);
    };
    c.grad_dx = [frame, metric, idx](const Vec& x, const Vec&) -> Vec {
      const Vec Fi = frame(x).row(static_cast<Eigen::Index>(idx)).transpose();
      return metric ? Vec(metric(x) * Fi) : Fi;
    };
    cone.constraints.push_back(std::move(c));
  }
  for (const auto& x : xs) {
    const Mat F = frame(x);
    for (Eigen::Index i = 0; i < F.rows(); ++i)
      if (F.row(i).norm() == 0.0) throw ConeConstructionError("generator " + std::to_string(i) + " vanishes");
  }
  detail::finish_feasibility(cone, xs.front());
  for (const auto& x : xs)
    if (Eigen::FullPivLU<Mat>(frame(x)).rank() < dim)
      throw ConeConstructionError("generator frame is rank deficient at a sample point");
  return cone;
}

/// Constant generators, one per row.
inline ConeField polyhedral_cone(const Mat& rows, std::function<Mat(const Vec&)> metric = {},
                                 std::string name = "polyhedral") {
  return polyhedral_cone([rows](const Vec&) { return rows; }, static_cast<int>(rows.cols()), std::move(metric), {},
                         true, std::move(name));
}

inline ConeField orthant_cone(int n) { return polyhedral_cone(Mat::Identity(n, n), {}, "orthant"); }

/// How the transverse sum of a quadratic cone is expanded.
enum class CrossTerms {
  Diagonal,  // sum_{i>=2} <F_i,dx>^2 : the round (ice-cream) cone for orthonormal frames
  Full       // sum_{i,j>=2} <F_i,dx><F_j,dx> = (sum_{i>=2} <F_i,dx>)^2
};

/// K_1 = <F_1,dx>, K_2 = <F_1,dx>^2 - transverse(dx). Requires <F_1, F_i> = 0 for i > 1.
inline ConeField quadratic_cone(std::function<Mat(const Vec&)> frame, int dim,
                                std::function<Mat(const Vec&)> metric = {}, std::span<const Vec> samples = {},
                                bool frame_constant = true, CrossTerms cross = CrossTerms::Diagonal,
                                std::string name = "quadratic") {
  ConeField cone;
  cone.kind = ConeKind::Quadratic;
  cone.dim = dim;
  cone.frame = frame;
  cone.metric = metric;
  cone.state_independent = frame_constant && !metric;
  cone.name = std::move(name);
  const auto xs = detail::default_samples(dim, samples);
  for (const auto& x : xs) {
    const Mat F = frame(x);
    if (F.cols() != dim || F.rows() < 2) throw ConeConstructionError("quadratic cone needs at least two generators");
    const Mat G = metric ? metric(x) : Mat::Identity(dim, dim);
    for (Eigen::Index i = 1; i < F.rows(); ++i) {
      const double ip = F.row(0).dot(G * F.row(i).transpose());
      if (std::abs(ip) > 1e-8)
        throw ConeConstructionError("generator " + std::to_string(i) + " is not orthogonal to the axis generator");
    }
    if (Eigen::FullPivLU<Mat>(F).rank() < dim)
      throw ConeConstructionError("generator frame is rank deficient at a sample point");
  }
  // Projections p_i = <F_i, dx>_x and their dx-gradients G F_i.
  auto proj = [frame, metric](const Vec& x, const Vec& dx, Vec& p, Mat& GF) {
    const Mat F = frame(x);
    GF = metric ? Mat(metric(x) * F.transpose()) : Mat(F.transpose());
    p = GF.transpose() * dx;
  };
  ConeConstraint k1;
  k1.degree = 1;
  k1.value = [proj](const Vec& x, const Vec& dx) {
    Vec p;
    Mat GF;
    proj(x, dx, p, GF);
    return p[0];
  };
  k1.grad_dx = [proj](const Vec& x, const Vec& dx) -> Vec {
    Vec p;
    Mat GF;
    proj(x, dx, p, GF);
    return GF.col(0);
  };
  ConeConstraint k2;
  k2.degree = 2;
  k2.value = [proj, cross](const Vec& x, const Vec& dx) {
    Vec p;
    Mat GF;
    proj(x, dx, p, GF);
    const auto rest = p.tail(p.size() - 1);
    const double t = cross == CrossTerms::Diagonal ? rest.squaredNorm() : rest.sum() * rest.sum();
    return p[0] * p[0] - t;
  };
  k2.grad_dx = [proj, cross](const Vec& x, const Vec& dx) -> Vec {
    Vec p;
    Mat GF;
    proj(x, dx, p, GF);
    Vec g = 2.0 * p[0] * GF.col(0);
    const auto m = p.size();
    if (cross == CrossTerms::Diagonal) {
      for (Eigen::Index i = 1; i < m; ++i) g -= 2.0 * p[i] * GF.col(i);
    } else {
      const double s = p.tail(m - 1).sum();
      for (Eigen::Index i = 1; i < m; ++i) g -= 2.0 * s * GF.col(i);
    }
    return g;
  };
  cone.constraints = {std::move(k1), std::move(k2)};
  detail::finish_feasibility(cone, xs.front());
  return cone;
}

inline ConeField quadratic_cone(const Mat& rows, CrossTerms cross = CrossTerms::Diagonal,
                                std::function<Mat(const Vec&)> metric = {}) {
  return quadratic_cone([rows](const Vec&) { return rows; }, static_cast<int>(rows.cols()), std::move(metric), {},
                        true, cross);
}

// ---------------------------------------------------------------------------
// Boundary sampling
// ---------------------------------------------------------------------------

struct SamplerOptions {
  double level_tol = 1e-10;     // |K_i - target| after projection
  double member_tol = 1e-10;    // K_j >= -member_tol for the other constraints
  double min_angle = 1e-3;      // duplicates closer than this are pruned
  int attempts_per_sample = 50;
  int probe_attempts = 200;     // give up on an empty facet after this many misses
  int saturation_attempts = 400;  // stop when this many attempts in a row add nothing new
};

struct SamplerResult {
  std::vector<Vec> samples;
  bool warning = false;      // fewer than `count` samples found
  bool facet_empty = false;  // no admissible point on the facet was ever found
  std::size_t attempts = 0;
};

/// Damped Newton projection of a unit vector onto {K_i = target}, renormalized
/// after every step. Returns false if it does not converge.
inline bool project_to_level(const ConeField& cone, const Vec& x, std::size_t i, Vec& v, double target,
                             double tol = 1e-10) {
  for (int it = 0; it < 60; ++it) {
    const double k = cone.value(i, x, v) - target;
    if (std::abs(k) <= tol) return true;
    const Vec g = cone.grad_dx(i, x, v);
    const double g2 = g.squaredNorm();
    if (!(g2 > 1e-300)) return false;
    double damp = 1.0;
    for (int b = 0; b < 30; ++b) {
      Vec w = v - damp * k / g2 * g;
      const double nw = cone.norm(x, w);
      if (nw > 0) {
        w /= nw;
        if (std::abs(cone.value(i, x, w) - target) < std::abs(k)) {
          v = w;
          break;
        }
      }
      damp *= 0.5;
      if (b == 29) return false;
    }
  }
  return std::abs(cone.value(i, x, v) - target) <= tol;
}

/// Unit tangents on the facet {K_i = target, K >= 0} obtained by projecting
/// uniform sphere samples that lie in the cone.
template <class Rng>
SamplerResult sample_level_set(const ConeField& cone, const Vec& x, std::size_t i, int count, double target, Rng& rng,
                               const SamplerOptions& opt = {}) {
  SamplerResult out;
  const double dup_cos = std::cos(opt.min_angle);
  const Mat G = cone.metric ? cone.metric(x) : Mat::Identity(cone.dim, cone.dim);
  const auto budget = static_cast<std::size_t>(std::max(1, count) * opt.attempts_per_sample);
  std::size_t since_new = 0;
  bool any_admissible = false;
  while (out.samples.size() < static_cast<std::size_t>(count) && out.attempts < budget) {
    ++out.attempts;
    ++since_new;
    Vec v = random_unit(cone, x, rng);
    if (cone.min_value(x, v) < 0.0) {
      if (!any_admissible && out.attempts >= static_cast<std::size_t>(opt.probe_attempts)) break;
      continue;
    }
    if (!project_to_level(cone, x, i, v, target, opt.level_tol)) continue;
    bool ok = true;
    for (std::size_t j = 0; j < cone.size() && ok; ++j)
      if (j != i && cone.value(j, x, v) < -opt.member_tol) ok = false;
    if (!ok) {
      if (!any_admissible && out.attempts >= static_cast<std::size_t>(opt.probe_attempts)) break;
      continue;
    }
    any_admissible = true;
    bool dup = false;
    for (const auto& s : out.samples)
      if (s.dot(G * v) > dup_cos) {
        dup = true;
        break;
      }
    if (!dup) {
      out.samples.push_back(v);
      since_new = 0;
    } else if (since_new >= static_cast<std::size_t>(opt.saturation_attempts)) {
      break;
    }
  }
  out.facet_empty = !any_admissible;
  out.warning = out.samples.size() < static_cast<std::size_t>(count);
  return out;
}

inline SamplerResult boundary_sampler(const ConeField& cone, const Vec& x, std::size_t i, int count,
                                      std::uint64_t seed = 1, const SamplerOptions& opt = {}) {
  std::mt19937_64 rng(seed);
  return sample_level_set(cone, x, i, count, 0.0, rng, opt);
}

/// Extreme rays of a polyhedral cone at x (unit vectors), by enumerating
/// (n-1)-subsets of active facets.
inline std::vector<Vec> extreme_rays(const ConeField& cone, const Vec& x) {
  std::vector<Vec> rays;
  if (cone.kind != ConeKind::Polyhedral || !cone.frame) return rays;
  const int n = cone.dim;
  const Mat F = cone.frame(x);
  const Mat A = cone.metric ? Mat(F * cone.metric(x)) : F;  // rows: dK_i/ddx
  const auto m = static_cast<int>(A.rows());
  if (n == 1) {
    for (double s : {1.0, -1.0}) {
      Vec v = Vec::Constant(1, s);
      if (cone.contains(x, v)) rays.push_back(v);
    }
    return rays;
  }
  std::vector<int> pick(static_cast<std::size_t>(n - 1));
  std::vector<bool> sel(static_cast<std::size_t>(m), false);
  std::fill(sel.begin(), sel.begin() + (n - 1), true);
  do {
    Mat S(n - 1, n);
    int r = 0;
    for (int i = 0; i < m; ++i)
      if (sel[static_cast<std::size_t>(i)]) S.row(r++) = A.row(i);
    Eigen::FullPivLU<Mat> lu(S);
    if (lu.rank() != n - 1) continue;
    Vec v = lu.kernel().col(0);
    v /= cone.norm(x, v);
    for (double s : {1.0, -1.0}) {
      const Vec w = s * v;
      bool in = true;
      for (int i = 0; i < m && in; ++i)
        if (A.row(i).dot(w) < -1e-12) in = false;
      if (!in) continue;
      bool dup = false;
      for (const auto& q : rays)
        if ((q - w).norm() < 1e-9) dup = true;
      if (!dup) rays.push_back(w);
    }
  } while (std::prev_permutation(sel.begin(), sel.end()));
  return rays;
}

// ---------------------------------------------------------------------------
// Sample-based screening of the structural assumptions on a cone field.
// ---------------------------------------------------------------------------

struct ConeScreen {
  double max_homogeneity_error = 0.0;
  bool homogeneity_ok = true;
  bool pointed_ok = true;
  bool nesting_ok = true;
  std::optional<bool> regularity_ok;  // polyhedral frames only: equal Gram matrices
};

inline ConeScreen screen_cone(const ConeField& cone, std::span<const Vec> xs, int directions = 64,
                              std::uint64_t seed = 11) {
  ConeScreen out;
  std::mt19937_64 rng(seed);
  for (const auto& x : xs) {
    for (int d = 0; d < directions; ++d) {
      const Vec v = random_unit(cone, x, rng);
      for (std::size_t i = 0; i < cone.size(); ++i) {
        const double k1 = cone.value(i, x, v);
        const int deg = cone.constraints[i].degree;
        for (double rho : {1e-3, 7.0}) {
          const double kr = cone.value(i, x, rho * v);
          const double err = std::abs(kr - std::pow(rho, deg) * k1) / (std::pow(rho, deg) * (1.0 + std::abs(k1)));
          out.max_homogeneity_error = std::max(out.max_homogeneity_error, err);
        }
      }
      const auto mv = membership(cone, x, v);
      if (mv.status == MembershipStatus::Interior &&
          membership(cone, x, Vec(-v)).status == MembershipStatus::Interior)
        out.pointed_ok = false;
      for (double e1 : {0.0, 0.01}) {
        for (double e2 : {0.01, 0.1}) {
          if (e2 <= e1) continue;
          if (membership(cone, x, v, e2).status == MembershipStatus::Interior &&
              membership(cone, x, v, e1).status != MembershipStatus::Interior)
            out.nesting_ok = false;
        }
      }
    }
  }
  out.homogeneity_ok = out.max_homogeneity_error < 1e-9;
  if (cone.kind == ConeKind::Polyhedral && cone.frame && xs.size() >= 2) {
    bool ok = true;
    auto gram = [&](const Vec& x) {
      const Mat F = cone.frame(x);
      return cone.metric ? Mat(F * cone.metric(x) * F.transpose()) : Mat(F * F.transpose());
    };
    const Mat G0 = gram(xs.front());
    for (std::size_t k = 1; k < xs.size(); ++k)
      if ((gram(xs[k]) - G0).cwiseAbs().maxCoeff() > 1e-8 * (1.0 + G0.cwiseAbs().maxCoeff())) ok = false;
    out.regularity_ok = ok;
  }
  return out;
}

}  // namespace dpos
