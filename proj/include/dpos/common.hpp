#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace dpos {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Error types. Every numerical failure the library can detect is reported by
// one of these; verdicts (PASS/FAIL) are never signalled by exceptions.
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A model function returned a non-finite value.
class EvaluationError : public Error {
 public:
  EvaluationError(const std::string& what, int coordinate)
      : Error(what + " (coordinate " + std::to_string(coordinate) + ")"), coordinate_(coordinate) {}
  int coordinate() const noexcept { return coordinate_; }

 private:
  int coordinate_;
};

/// The integrated state became non-finite.
class DivergenceError : public Error {
 public:
  explicit DivergenceError(double time)
      : Error("trajectory diverged at t=" + std::to_string(time)), time_(time) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

/// Unit-norm drift of the projective flow exceeded the hard bound.
class NormalizationError : public Error {
 public:
  NormalizationError(double time, double drift)
      : Error("normalized flow drift " + std::to_string(drift) + " at t=" + std::to_string(time) +
              "; reduce the step size"),
        time_(time),
        drift_(drift) {}
  double time() const noexcept { return time_; }
  double drift() const noexcept { return drift_; }

 private:
  double time_;
  double drift_;
};

class ConeConstructionError : public Error {
 public:
  using Error::Error;
};

/// No direction satisfies every constraint with a positive margin.
class InfeasibleConeError : public ConeConstructionError {
 public:
  using ConeConstructionError::ConeConstructionError;
};

class DegenerateVectorError : public Error {
 public:
  DegenerateVectorError() : Error("tangent vector is zero") {}
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Centroid phase requested where the phases are balanced (rho ~ 0).
class PhaseBalancedError : public Error {
 public:
  explicit PhaseBalancedError(double rho)
      : Error("centroid phase undefined, rho=" + std::to_string(rho)) {}
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Small numeric helpers shared by every module.
// ---------------------------------------------------------------------------

/// Reduces an angle to [-pi, pi).
inline double wrap_angle(double a) {
  double r = std::fmod(a + kPi, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  r -= kPi;
  // fmod can land exactly on +pi after the shift for inputs just below -pi.
  return r >= kPi ? r - kTwoPi : r;
}

/// Applies the chart's wrap flags in place.
inline void wrap_state(Vec& x, const std::vector<bool>& wrap) {
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (wrap[static_cast<std::size_t>(i)]) x[i] = wrap_angle(x[i]);
}

/// Shortest-arc difference a - b on wrapped axes, plain difference elsewhere.
inline Vec chart_difference(const Vec& a, const Vec& b, const std::vector<bool>& wrap) {
  Vec d = a - b;
  for (Eigen::Index i = 0; i < d.size(); ++i)
    if (wrap[static_cast<std::size_t>(i)]) d[i] = wrap_angle(d[i]);
  return d;
}

inline bool all_finite(const Vec& v) { return v.allFinite(); }

inline int first_non_finite(const Vec& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (!std::isfinite(v[i])) return static_cast<int>(i);
  return -1;
}

inline int first_non_finite(const Mat& m) {
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      if (!std::isfinite(m(i, j))) return static_cast<int>(j);
  return -1;
}

inline std::vector<double> to_std(const Vec& v) { return {v.data(), v.data() + v.size()}; }

inline Vec from_std(std::span<const double> v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[i];
  return out;
}

/// Ordinary least squares y = a + b t. Returns {a, b, r^2}.
struct LineFit {
  double intercept = 0.0;
  double slope = 0.0;
  double r_squared = 0.0;
};

inline LineFit fit_line(std::span<const double> t, std::span<const double> y) {
  const auto n = static_cast<double>(t.size());
  LineFit fit;
  if (t.size() < 2) return fit;
  double mt = 0, my = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    mt += t[i];
    my += y[i];
  }
  mt /= n;
  my /= n;
  double stt = 0, sty = 0, syy = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    stt += (t[i] - mt) * (t[i] - mt);
    sty += (t[i] - mt) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  fit.slope = stt > 0 ? sty / stt : 0.0;
  fit.intercept = my - fit.slope * mt;
  fit.r_squared = (stt > 0 && syy > 0) ? (sty * sty) / (stt * syy) : (syy == 0 ? 1.0 : 0.0);
  return fit;
}

}  // namespace dpos
