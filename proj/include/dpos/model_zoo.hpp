#pragma once

#include <complex>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "dpos/cones.hpp"
#include "dpos/dynamics.hpp"
#include "dpos/region.hpp"

namespace dpos {

struct ModelBundle {
  std::string name;
  SystemModel model;
  ConeField cone;
  CompactRegion default_region;
  std::map<std::string, std::string> expected;  // check name -> PASS | FAIL
  nlohmann::json params = nlohmann::json::object();
  std::function<Mat(double)> exact_flow;  // linear models: t -> e^{At}
};

// ---------------------------------------------------------------------------
// Pendulum  thetadot = v,  vdot = -sin(theta) - k v + u  on S x R
// ---------------------------------------------------------------------------

inline SystemModel pendulum_model(double k, double u) {
  auto f = [k, u](const Vec& x) {
    Vec d(2);
    d << x[1], -std::sin(x[0]) - k * x[1] + u;
    return d;
  };
  auto J = [k](const Vec& x) {
    Mat m(2, 2);
    m << 0.0, 1.0, -std::cos(x[0]), -k;
    return m;
  };
  return SystemModel(2, f, J, {true, false}, "pendulum");
}

inline ConeField pendulum_cone() {
  Mat F(2, 2);
  F << 1.0, 0.0, 1.0, 1.0;
  return polyhedral_cone(F, {}, "pendulum_default");
}

/// First-order slow-manifold approximation of the rotating solution v(theta) for u > 1.
inline double pendulum_band_center(double k, double u, double theta) {
  return (u - std::sin(theta)) / k * (1.0 + std::cos(theta) / (k * k));
}

/// Band of half-width w around the approximate rotating solution.
inline CompactRegion pendulum_band_region(double k, double u, double half_width = 0.05, int density = 15) {
  double lo = kInf, hi = -kInf;
  for (int i = 0; i < 720; ++i) {
    const double c = pendulum_band_center(k, u, -kPi + kTwoPi * i / 720.0);
    lo = std::min(lo, c);
    hi = std::max(hi, c);
  }
  auto r = tube_region([k, u](double th) { return pendulum_band_center(k, u, th); }, half_width,
                       lo - half_width - 0.1, hi + half_width + 0.1, density);
  r.shape->params["k"] = k;
  r.shape->params["u"] = u;
  return r;
}

/// Energy sublevel set { v^2/2 + 1 - cos(theta) <= level } intersected with [-1,1]^2.
inline CompactRegion pendulum_energy_region(double level = 0.4, int density = 15) {
  CompactRegion r = CompactRegion::box({{-1.0, 1.0}, {-1.0, 1.0}}, density);
  r.wrap = {true, false};
  auto energy = [](const Vec& x) { return 0.5 * x[1] * x[1] + 1.0 - std::cos(x[0]); };
  RegionShape s;
  s.kind = "energy";
  s.params = {{"level", level}};
  s.margin = [energy, level](const Vec& x) { return level - energy(x); };
  s.boundary = [level](int d) {
    std::vector<Vec> pts;
    for (int i = 0; i < 4 * d; ++i) {
      const double th = -1.0 + 2.0 * i / (4 * d - 1);
      const double e = 2.0 * (level - 1.0 + std::cos(th));
      if (e < 0) continue;
      for (double sgn : {-1.0, 1.0}) {
        Vec p(2);
        p << th, sgn * std::sqrt(e);
        pts.push_back(p);
      }
    }
    return pts;
  };
  r.shape = std::move(s);
  return r;
}

inline ModelBundle pendulum(double k, double u) {
  ModelBundle b;
  b.name = "pendulum";
  b.model = pendulum_model(k, u);
  b.cone = pendulum_cone();
  if (u > 1.0) {
    b.default_region = pendulum_band_region(k, u);
  } else {
    b.default_region = CompactRegion::box({{-1.0, 1.0}, {-1.0, 1.0}});
    b.default_region.wrap = {true, false};
  }
  b.params = {{"k", k}, {"u", u}};
  b.expected["theorem3"] = k > 2.0 ? "PASS" : "FAIL";
  return b;
}

// ---------------------------------------------------------------------------
// Cooperative tanh network  x1' = -x1 + c tanh(x2),  x2' = -x2 + c tanh(x1)
// ---------------------------------------------------------------------------

inline ModelBundle cooperative_demo(double c) {
  ModelBundle b;
  b.name = "cooperative_demo";
  auto f = [c](const Vec& x) {
    Vec d(2);
    d << -x[0] + c * std::tanh(x[1]), -x[1] + c * std::tanh(x[0]);
    return d;
  };
  auto J = [c](const Vec& x) {
    const double s1 = 1.0 / std::cosh(x[0]), s2 = 1.0 / std::cosh(x[1]);
    Mat m(2, 2);
    m << -1.0, c * s2 * s2, c * s1 * s1, -1.0;
    return m;
  };
  b.model = SystemModel(2, f, J, {}, "cooperative_demo");
  b.cone = orthant_cone(2);
  b.default_region = CompactRegion::box({{-2.0, 2.0}, {-2.0, 2.0}});
  b.params = {{"c", c}};
  b.expected["theorem1"] = c >= 0.0 ? "PASS" : "FAIL";
  b.expected["theorem3"] = c > 0.0 ? "PASS" : "FAIL";
  return b;
}

// ---------------------------------------------------------------------------
// Linear systems xdot = A x with the positive orthant
// ---------------------------------------------------------------------------

inline bool is_metzler(const Mat& A) {
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j < A.cols(); ++j)
      if (i != j && A(i, j) < 0.0) return false;
  return true;
}

inline ModelBundle metzler_linear(const Mat& A) {
  if (A.rows() != A.cols() || A.rows() == 0) throw PreconditionError("metzler_linear needs a square matrix");
  ModelBundle b;
  b.name = "metzler_linear";
  const int n = static_cast<int>(A.rows());
  b.model = SystemModel(
      n, [A](const Vec& x) { return Vec(A * x); }, [A](const Vec&) { return A; }, {}, "metzler_linear");
  b.cone = orthant_cone(n);
  b.default_region = CompactRegion(Vec::Constant(n, -1.0), Vec::Constant(n, 1.0));
  auto rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < A.rows(); ++i) rows.push_back(to_std(A.row(i).transpose()));
  b.params = {{"A", rows}};
  b.expected["invariance_along_flow"] = is_metzler(A) ? "PASS" : "FAIL";
  // Scaling and squaring with a Taylor core; adequate for the small test matrices.
  b.exact_flow = [A](double t) {
    Mat M = A * t;
    int s = 0;
    const double nrm = M.cwiseAbs().rowwise().sum().maxCoeff();
    if (nrm > 0.5) s = static_cast<int>(std::ceil(std::log2(nrm / 0.5)));
    M /= std::ldexp(1.0, s);
    Mat E = Mat::Identity(A.rows(), A.cols()), term = E;
    for (int k = 1; k < 30; ++k) {
      term = term * M / k;
      E += term;
    }
    for (int i = 0; i < s; ++i) E = E * E;
    return E;
  };
  return b;
}

// ---------------------------------------------------------------------------
// All-to-all Kuramoto with identical frequencies
// ---------------------------------------------------------------------------

struct Centroid {
  double rho = 0.0;
  double phi = 0.0;           // principal value in (-pi, pi]
  bool phi_defined = false;   // false when rho < 1e-12
};

inline Centroid centroid(const Vec& theta) {
  std::complex<double> z(0.0, 0.0);
  for (Eigen::Index k = 0; k < theta.size(); ++k) z += std::polar(1.0, theta[k]);
  z /= static_cast<double>(theta.size());
  Centroid c;
  c.rho = std::min(1.0, std::abs(z));
  c.phi_defined = c.rho >= 1e-12;
  if (c.phi_defined) {
    c.phi = std::arg(z);
    if (c.phi <= -kPi) c.phi = kPi;
  }
  return c;
}

/// Centroid phase; throws where it is undefined.
inline double centroid_phase(const Vec& theta) {
  const auto c = centroid(theta);
  if (!c.phi_defined) throw PhaseBalancedError(c.rho);
  return c.phi;
}

/// S_ki = sin(theta_i - theta_k).
inline Mat kuramoto_S(const Vec& th) {
  const auto n = th.size();
  Mat S(n, n);
  for (Eigen::Index k = 0; k < n; ++k)
    for (Eigen::Index i = 0; i < n; ++i) S(k, i) = std::sin(th[i] - th[k]);
  return S;
}

/// C_ki = cos(theta_i - theta_k) off the diagonal, rows summing to zero.
inline Mat kuramoto_C(const Vec& th) {
  const auto n = th.size();
  Mat C(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (i == k) continue;
      C(k, i) = std::cos(th[i] - th[k]);
      s += C(k, i);
    }
    C(k, k) = -s;
  }
  return C;
}

inline Mat consensus_projector(int n) {
  return Mat::Identity(n, n) - Mat::Constant(n, n, 1.0 / n);
}

inline SystemModel kuramoto_model(int n) {
  if (n < 2) throw PreconditionError("kuramoto needs n >= 2");
  auto f = [n](const Vec& th) {
    Vec d(n);
    for (int k = 0; k < n; ++k) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += std::sin(th[i] - th[k]);
      d[k] = s / n;
    }
    return d;
  };
  auto J = [n](const Vec& th) { return Mat(kuramoto_C(th) / n); };
  return SystemModel(n, f, J, std::vector<bool>(static_cast<std::size_t>(n), true), "kuramoto");
}

/// Gradient of rho: -(1/n) sin(theta_k - phi); zero where rho vanishes.
inline Vec rho_gradient(const Vec& th) {
  const auto c = centroid(th);
  const auto n = th.size();
  Vec g = Vec::Zero(n);
  if (!c.phi_defined) return g;
  for (Eigen::Index k = 0; k < n; ++k) g[k] = -std::sin(th[k] - c.phi) / static_cast<double>(n);
  return g;
}

/// rho' = (rho/n) sum_k sin^2(theta_k - phi) along the Kuramoto flow.
inline double rho_rate(const Vec& th) {
  const auto c = centroid(th);
  if (!c.phi_defined) return 0.0;
  double s = 0.0;
  for (Eigen::Index k = 0; k < th.size(); ++k) s += std::pow(std::sin(th[k] - c.phi), 2);
  return c.rho / static_cast<double>(th.size()) * s;
}

/// K1 = 1^T d,  K2 = e^{2 lambda rho} (1^T d)^2 - d^T Pi d.
inline ConeField kuramoto_rho_cone(int n, double lambda_param) {
  if (n < 2) throw PreconditionError("kuramoto cone needs n >= 2");
  if (!(lambda_param > 0)) throw PreconditionError("lambda_param must be positive");
  const double lam = lambda_param;
  ConeField cone;
  cone.kind = ConeKind::Custom;
  cone.dim = n;
  cone.state_independent = false;
  cone.name = "kuramoto_rho_cone";
  ConeConstraint k1;
  k1.degree = 1;
  k1.value = [](const Vec&, const Vec& d) { return d.sum(); };
  k1.grad_dx = [n](const Vec&, const Vec&) -> Vec { return Vec::Ones(n); };
  k1.grad_x = [n](const Vec&, const Vec&) -> Vec { return Vec::Zero(n); };
  ConeConstraint k2;
  k2.degree = 2;
  k2.value = [lam](const Vec& x, const Vec& d) {
    const double s = d.sum();
    const double m = d.mean();
    return std::exp(2.0 * lam * centroid(x).rho) * s * s - (d.array() - m).matrix().squaredNorm();
  };
  k2.grad_dx = [lam](const Vec& x, const Vec& d) -> Vec {
    const double s = d.sum();
    const double m = d.mean();
    return 2.0 * std::exp(2.0 * lam * centroid(x).rho) * s * Vec::Ones(d.size()) -
           2.0 * Vec((d.array() - m).matrix());
  };
  k2.grad_x = [lam](const Vec& x, const Vec& d) -> Vec {
    const double s = d.sum();
    return 2.0 * lam * std::exp(2.0 * lam * centroid(x).rho) * s * s * rho_gradient(x);
  };
  cone.constraints = {std::move(k1), std::move(k2)};
  cone.feasibility_eps = maximin_direction(cone, Vec::Zero(n), false, 16).value;
  return cone;
}

/// Closed form of dK2/dt along the prolonged Kuramoto flow:
/// 2 lambda rho' e^{2 lambda rho} (1^T d)^2 - (1/n) d^T (C + C^T) d.
inline double kuramoto_k2_derivative(const Vec& th, const Vec& d, double lambda_param) {
  const auto n = static_cast<double>(th.size());
  const double rho = centroid(th).rho;
  const double s = d.sum();
  const Mat C = kuramoto_C(th);
  return 2.0 * lambda_param * rho_rate(th) * std::exp(2.0 * lambda_param * rho) * s * s -
         d.dot((C + C.transpose()) * d) / n;
}

inline ModelBundle kuramoto(int n, double lambda_param = 1.0, double max_gap = kPi / 2 - 0.1) {
  ModelBundle b;
  b.name = "kuramoto";
  b.model = kuramoto_model(n);
  b.cone = kuramoto_rho_cone(n, lambda_param);
  b.default_region = max_gap_region(n, max_gap);
  b.params = {{"n", n}, {"lambda", lambda_param}, {"max_gap", max_gap}};
  b.expected["theorem3"] = "PASS";
  return b;
}

// ---------------------------------------------------------------------------
// Registry
// ---------------------------------------------------------------------------

struct ModelInfo {
  std::string name;
  std::string description;
  nlohmann::json defaults;
};

inline std::vector<ModelInfo> list_models() {
  return {
      {"pendulum", "damped forced pendulum on the cylinder, cone dtheta >= 0, dtheta + dv >= 0",
       {{"k", 3.0}, {"u", 0.0}}},
      {"cooperative_demo", "two-node tanh network with orthant cone", {{"c", 2.0}}},
      {"metzler_linear", "linear system xdot = A x with orthant cone", {{"A", {{-1.0, 1.0}, {1.0, -1.0}}}}},
      {"kuramoto", "all-to-all identical Kuramoto oscillators with the rho-widened cone",
       {{"n", 5}, {"lambda", 1.0}, {"max_gap", kPi / 2 - 0.1}}},
  };
}

inline Mat matrix_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.empty()) throw ConfigError("matrix must be a non-empty array of rows");
  const auto r = j.size();
  const auto c = j[0].size();
  Mat A(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  for (std::size_t i = 0; i < r; ++i) {
    if (!j[i].is_array() || j[i].size() != c) throw ConfigError("matrix rows must have equal length");
    for (std::size_t k = 0; k < c; ++k) A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = j[i][k].get<double>();
  }
  return A;
}

/// Builds a bundle from a registry name and a parameter map; missing
/// parameters take the listed defaults, unknown ones are rejected.
inline ModelBundle make_bundle(const std::string& name, const nlohmann::json& params = nlohmann::json::object()) {
  const ModelInfo* info = nullptr;
  static const auto models = list_models();
  for (const auto& m : models)
    if (m.name == name) info = &m;
  if (!info) throw ConfigError("unknown model '" + name + "'");
  nlohmann::json p = info->defaults;
  for (const auto& [key, value] : params.items()) {
    if (!p.contains(key)) throw ConfigError("model '" + name + "' has no parameter '" + key + "'");
    p[key] = value;
  }
  try {
    if (name == "pendulum") return pendulum(p["k"].get<double>(), p["u"].get<double>());
    if (name == "cooperative_demo") return cooperative_demo(p["c"].get<double>());
    if (name == "metzler_linear") return metzler_linear(matrix_from_json(p["A"]));
    return kuramoto(p["n"].get<int>(), p["lambda"].get<double>(), p["max_gap"].get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("model '" + name + "': bad parameter type (" + e.what() + ")");
  }
}

}  // namespace dpos
