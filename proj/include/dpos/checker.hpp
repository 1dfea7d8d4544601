#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "dpos/cones.hpp"
#include "dpos/dynamics.hpp"
#include "dpos/region.hpp"
#include "dpos/report.hpp"

namespace dpos {

struct CheckOptions {
  int directions = 200;          // boundary directions per constraint per grid point
  double tol = 1e-9;
  double strict_margin = 1e-6;
  std::uint64_t seed = 1;
  bool assume_forward_invariant = false;
  double screen_T = 5.0;
  double screen_h = 1e-2;
  int screen_samples = 15;       // boundary grid density for the invariance screen
  int band_levels = 3;           // level sets sampled inside the band 0 <= K_i <= eps
  bool record_samples = false;   // keep every evaluated margin in the report
};

inline nlohmann::json to_json(const CheckOptions& o) {
  return {{"directions", o.directions},
          {"tol", o.tol},
          {"strict_margin", o.strict_margin},
          {"seed", o.seed},
          {"assume_forward_invariant", o.assume_forward_invariant},
          {"screen_T", o.screen_T},
          {"screen_h", o.screen_h},
          {"screen_samples", o.screen_samples},
          {"band_levels", o.band_levels}};
}

namespace detail {

inline void screen_invariance(CheckReport& rep, const SystemModel& model, const CompactRegion& region,
                              const CheckOptions& opt) {
  if (opt.assume_forward_invariant) {
    rep.preconditions.emplace_back("forward_invariance_assumed", Verdict::Pass);
    return;
  }
  const auto fi = check_forward_invariance(model, region, opt.screen_T, opt.screen_h, opt.screen_samples);
  rep.preconditions.emplace_back("forward_invariance", fi.verdict);
  if (fi.verdict != Verdict::Pass)
    rep.warnings.push_back("region failed the forward-invariance screen (worst margin " +
                           std::to_string(fi.worst_margin) + ")");
}

/// Unit tangents on {K_i = target} within the cone at x; extreme rays lying on
/// the facet are added for polyhedral cones when target is zero.
inline SamplerResult facet_samples(const ConeField& cone, const Vec& x, std::size_t i, int count, double target,
                                   std::mt19937_64& rng) {
  auto res = sample_level_set(cone, x, i, count, target, rng);
  if (target == 0.0 && cone.kind == ConeKind::Polyhedral) {
    for (const auto& r : extreme_rays(cone, x)) {
      if (std::abs(cone.value(i, x, r)) > 1e-12) continue;
      bool dup = false;
      for (const auto& s : res.samples)
        if ((s - r).norm() < 1e-6) dup = true;
      if (!dup) res.samples.insert(res.samples.begin(), r);
    }
    if (!res.samples.empty()) res.facet_empty = false;
  }
  return res;
}

struct FacetCache {
  bool valid = false;
  SamplerResult result;
};

/// Shared loop of the pointwise theorem checks. `levels` lists the constraint
/// values sampled (zero for the boundary checks, a band for the strict check);
/// `derivative(x, fx, J, i, theta)` returns the quantity compared to the threshold.
template <class Derivative>
CheckReport pointwise_check(const std::string& name, const SystemModel& model, const ConeField& cone,
                            const CompactRegion& region, const CheckOptions& opt, double threshold,
                            const std::vector<double>& levels, Derivative&& derivative) {
  region.validate();
  if (cone.dim != model.dim || region.dim() != model.dim)
    throw PreconditionError("model, cone and region dimensions differ");
  CheckReport rep;
  rep.check = name;
  rep.threshold = threshold;
  rep.config_echo = to_json(opt);
  rep.config_echo["region"] = region.describe();
  rep.config_echo["cone"] = {{"kind", to_string(cone.kind)}, {"name", cone.name}, {"constraints", cone.size()}};
  screen_invariance(rep, model, region, opt);

  std::mt19937_64 rng(opt.seed);
  const auto grid = region.grid();
  const int per_level = std::max(1, opt.directions / static_cast<int>(levels.size()));
  std::vector<std::vector<FacetCache>> cache(cone.size(), std::vector<FacetCache>(levels.size()));
  std::vector<bool> empty_noted(cone.size(), false);
  bool starved = false;

  for (const auto& x : grid) {
    const Vec fx = model.f(x);
    const Mat J = eval_jacobian(model, x);
    for (std::size_t i = 0; i < cone.size(); ++i) {
      for (std::size_t l = 0; l < levels.size(); ++l) {
        SamplerResult local;
        const SamplerResult* res = nullptr;
        if (cone.state_independent) {
          auto& c = cache[i][l];
          if (!c.valid) {
            c.result = facet_samples(cone, x, i, per_level, levels[l], rng);
            c.valid = true;
          }
          res = &c.result;
        } else {
          local = facet_samples(cone, x, i, per_level, levels[l], rng);
          res = &local;
        }
        if (res->samples.empty()) {
          if (!empty_noted[i]) {
            rep.warnings.push_back("constraint " + std::to_string(i) +
                                   " has no admissible boundary directions; treated as vacuous");
            empty_noted[i] = true;
          }
          continue;
        }
        if (res->warning && cone.dim >= 3) starved = true;
        for (const auto& th : res->samples) {
          const double d = derivative(x, fx, J, i, th);
          rep.record(d, x, th, static_cast<int>(i));
          if (opt.record_samples) rep.samples.push_back({x, th, static_cast<int>(i), d});
        }
      }
    }
  }
  if (starved) rep.warnings.push_back("boundary sampler returned fewer directions than requested");
  if (rep.samples_evaluated == 0) rep.worst_margin = kInf;
  rep.finalize(starved);
  return rep;
}

}  // namespace detail

/// Non-strict boundary condition: dK_i/dt >= 0 along (f, J theta) wherever K_i = 0.
inline CheckReport check_theorem1(const SystemModel& model, const ConeField& cone, const CompactRegion& region,
                                  const CheckOptions& opt = {}) {
  return detail::pointwise_check(
      "theorem1", model, cone, region, opt, -opt.tol, {0.0},
      [&](const Vec& x, const Vec& fx, const Mat& J, std::size_t i, const Vec& th) {
        return cone.directional_derivative(i, x, th, fx, J * th);
      });
}

/// Band condition along the normalized flow: dK_i/dt >= eps/T wherever 0 <= K_i <= eps.
inline CheckReport check_theorem2(const SystemModel& model, const ConeField& cone, const CompactRegion& region,
                                  double T, double eps, const CheckOptions& opt = {}) {
  if (!(T > 0)) throw PreconditionError("check_theorem2 needs T > 0");
  if (!(eps > 0)) throw PreconditionError("check_theorem2 needs eps > 0");
  if (eps > cone.feasibility_eps + 1e-12)
    throw PreconditionError("eps exceeds the cone's feasibility margin " + std::to_string(cone.feasibility_eps));
  std::vector<double> levels;
  const int L = std::max(1, opt.band_levels);
  for (int l = 0; l < L; ++l) levels.push_back(L == 1 ? 0.0 : eps * l / (L - 1));
  auto rep = detail::pointwise_check(
      "theorem2", model, cone, region, opt, eps / T - opt.tol, levels,
      [&](const Vec& x, const Vec& fx, const Mat& J, std::size_t i, const Vec& th) {
        const double lam = detail::lambda_raw(model, x, th, J, fx);
        return cone.directional_derivative(i, x, th, fx, J * th - lam * th);
      });
  rep.config_echo["T"] = T;
  rep.config_echo["eps"] = eps;
  return rep;
}

/// Strict boundary condition: dK_i/dt >= strict_margin wherever K_i = 0. The
/// worst value is the certified margin at sample resolution.
inline CheckReport check_theorem3(const SystemModel& model, const ConeField& cone, const CompactRegion& region,
                                  const CheckOptions& opt = {}) {
  return detail::pointwise_check(
      "theorem3", model, cone, region, opt, opt.strict_margin, {0.0},
      [&](const Vec& x, const Vec& fx, const Mat& J, std::size_t i, const Vec& th) {
        return cone.directional_derivative(i, x, th, fx, J * th);
      });
}

// ---------------------------------------------------------------------------
// Trajectory-level checks
// ---------------------------------------------------------------------------

/// Uniform unit tangent with min_i K_i >= eps, by rejection; falls back to the
/// maximin direction when the cone is too thin for rejection.
template <class Rng>
Vec random_cone_member(const ConeField& cone, const Vec& x, double eps, Rng& rng, int max_tries = 20000) {
  for (int t = 0; t < max_tries; ++t) {
    Vec v = random_unit(cone, x, rng);
    if (cone.min_value(x, v) >= eps) return v;
  }
  return maximin_direction(cone, x, false, 8, rng()).direction;
}

struct FlowCheckOptions {
  double tol = 1e-6;
  std::uint64_t seed = 1;
  bool include_extreme_rays = true;
  bool record_samples = false;
};

/// Direct test of cone invariance under the variational flow: from random
/// (x0, theta0 in K(x0)), plus the extreme rays of polyhedral cones, the
/// propagated tangent must stay in the cone at every step.
inline CheckReport verify_invariance_along_flow(const SystemModel& model, const ConeField& cone,
                                                const CompactRegion& region, double T, double h, int n_pairs,
                                                const FlowCheckOptions& opt = {}) {
  region.validate();
  CheckReport rep;
  rep.check = "invariance_along_flow";
  rep.threshold = -opt.tol;
  rep.config_echo = {{"T", T}, {"h", h}, {"n_pairs", n_pairs}, {"tol", opt.tol}, {"seed", opt.seed},
                     {"include_extreme_rays", opt.include_extreme_rays}, {"region", region.describe()}};
  std::mt19937_64 rng(opt.seed);
  for (int p = 0; p < n_pairs; ++p) {
    const Vec x0 = region.sample_uniform(rng);
    std::vector<Vec> starts;
    if (opt.include_extreme_rays)
      for (auto& r : extreme_rays(cone, x0)) starts.push_back(std::move(r));
    starts.push_back(random_cone_member(cone, x0, 0.0, rng));
    for (const auto& th0 : starts) {
      double worst = kInf, worst_t = 0.0;
      Vec worst_x = x0;
      int worst_i = -1;
      try {
        const auto tr = integrate_prolonged(model, x0, th0, T, h);
        for (std::size_t k = 0; k < tr.times.size(); ++k) {
          const auto mv = membership(cone, tr.states[k], tr.directions[k]);
          if (mv.margin < worst) {
            worst = mv.margin;
            worst_t = tr.times[k];
            worst_x = tr.states[k];
            worst_i = mv.active.empty() ? -1 : mv.active.front();
          }
        }
      } catch (const DivergenceError& e) {
        worst = -kInf;
        worst_t = e.time();
        rep.warnings.push_back("prolonged trajectory diverged at t=" + std::to_string(e.time()));
      }
      rep.record(worst, x0, th0, worst_i, worst_t, worst_x);
      if (opt.record_samples) rep.samples.push_back({x0, th0, worst_i, worst});
    }
  }
  rep.finalize(false);
  return rep;
}

struct ContractionOptions {
  std::uint64_t seed = 1;
  double noise_floor = 1e-7;
  double tail_fraction = 0.6;
  int max_samples = 600;       // distance evaluations per pair
  double interior_fraction = 0.1;  // pairs are drawn from K_eps with eps = this * feasibility margin
  double min_r_squared = 0.9;
  double min_rate = 1e-6;
  bool keep_series = true;
};

/// Hilbert distance d(t) between the propagated rays of a and b from x0,
/// evaluated on about `max_samples` stored steps. Returns false when the
/// distance becomes infinite or a ray leaves the cone.
inline bool distance_series(const SystemModel& model, const ConeField& cone, const Vec& x0, const Vec& a, const Vec& b,
                            double T, double h, int max_samples, ContractionReport::Series& s) {
  try {
    const auto ta = integrate_prolonged(model, x0, a, T, h);
    const auto tb = integrate_prolonged(model, x0, b, T, h);
    const std::size_t N = ta.times.size();
    const std::size_t stride = std::max<std::size_t>(1, N / static_cast<std::size_t>(std::max(1, max_samples)));
    for (std::size_t k = 0; k < N; k += stride) {
      const double d = hilbert_distance(cone, ta.states[k], ta.directions[k], tb.directions[k]);
      if (std::isinf(d)) return false;
      s.t.push_back(ta.times[k]);
      s.d.push_back(d);
    }
  } catch (const PreconditionError&) {
    return false;
  } catch (const DivergenceError&) {
    return false;
  }
  return true;
}

/// Log-linear fit of log d(t) over the tail of [0, t_end], where t_end is the
/// first time d falls below the noise floor. Sets s.rate, s.r_squared and
/// s.fitted; returns the (t, log d) points used.
inline std::pair<std::vector<double>, std::vector<double>> fit_distance_series(ContractionReport::Series& s,
                                                                               double noise_floor,
                                                                               double tail_fraction) {
  double t_end = s.t.back();
  for (std::size_t k = 0; k < s.t.size(); ++k)
    if (s.d[k] < noise_floor) {
      t_end = s.t[k];
      break;
    }
  auto collect = [&](double t_start) {
    std::pair<std::vector<double>, std::vector<double>> pts;
    for (std::size_t k = 0; k < s.t.size(); ++k)
      if (s.t[k] >= t_start && s.t[k] <= t_end && s.d[k] >= noise_floor) {
        pts.first.push_back(s.t[k]);
        pts.second.push_back(std::log(s.d[k]));
      }
    return pts;
  };
  auto pts = collect((1.0 - tail_fraction) * t_end);
  if (pts.first.size() < 5) pts = collect(0.0);
  if (pts.first.size() < 3) return pts;
  const auto fit = fit_line(pts.first, pts.second);
  s.rate = -fit.slope;
  s.r_squared = fit.r_squared;
  s.fitted = true;
  return pts;
}

/// Hilbert distance between pairs of propagated tangent rays, fitted log-linearly.
inline ContractionReport estimate_contraction(const SystemModel& model, const ConeField& cone,
                                              const CompactRegion& region, double T, double h, int n_pairs,
                                              const ContractionOptions& opt = {}) {
  region.validate();
  ContractionReport rep;
  rep.horizon_T = T;
  rep.pairs_requested = static_cast<std::size_t>(n_pairs);
  rep.config_echo = {{"T", T},
                     {"h", h},
                     {"n_pairs", n_pairs},
                     {"seed", opt.seed},
                     {"noise_floor", opt.noise_floor},
                     {"tail_fraction", opt.tail_fraction},
                     {"max_samples", opt.max_samples},
                     {"interior_fraction", opt.interior_fraction},
                     {"min_r_squared", opt.min_r_squared},
                     {"min_rate", opt.min_rate},
                     {"region", region.describe()}};
  std::mt19937_64 rng(opt.seed);
  const double eps = opt.interior_fraction * cone.feasibility_eps;
  double worst_rate = kInf, worst_r2 = kInf, worst_offset = 1.0;

  for (int p = 0; p < n_pairs; ++p) {
    const Vec x0 = region.sample_uniform(rng);
    const Vec a = random_cone_member(cone, x0, eps, rng);
    const Vec b = random_cone_member(cone, x0, eps, rng);
    ContractionReport::Series s;
    if (!distance_series(model, cone, x0, a, b, T, h, opt.max_samples, s)) {
      ++rep.pairs_discarded;
      rep.warnings.push_back("pair " + std::to_string(p) + " reached infinite distance; discarded");
      if (opt.keep_series) rep.series.push_back(std::move(s));
      continue;
    }
    rep.delta_bound = std::max(rep.delta_bound, s.d.front());
    if (*std::max_element(s.d.begin(), s.d.end()) <= 1e-12) {
      ++rep.pairs_identical;
      if (opt.keep_series) rep.series.push_back(std::move(s));
      continue;
    }
    const auto [ft, fy] = fit_distance_series(s, opt.noise_floor, opt.tail_fraction);
    if (!s.fitted) {
      rep.warnings.push_back("pair " + std::to_string(p) + " has too few points above the noise floor to fit");
      if (opt.keep_series) rep.series.push_back(std::move(s));
      continue;
    }
    ++rep.pairs_fitted;
    worst_rate = std::min(worst_rate, s.rate);
    worst_r2 = std::min(worst_r2, s.r_squared);
    // Smallest k >= 1 with d(t) <= k exp(-rate (t - T0)) d(0) over the fitted window.
    const double T0 = ft.front();
    const double delta = std::max(s.d.front(), 1e-300);
    for (std::size_t k = 0; k < s.t.size(); ++k)
      if (s.t[k] >= T0 && s.t[k] <= ft.back())
        worst_offset = std::max(worst_offset, s.d[k] * std::exp(s.rate * (s.t[k] - T0)) / delta);
    if (opt.keep_series) rep.series.push_back(std::move(s));
  }
  if (rep.pairs_fitted > 0) {
    rep.fitted_rate = worst_rate;
    rep.r_squared = worst_r2;
    rep.fitted_offset = worst_offset;
  }
  rep.contraction_asserted =
      rep.pairs_fitted > 0 && rep.fitted_rate > opt.min_rate && rep.r_squared >= opt.min_r_squared;
  return rep;
}

}  // namespace dpos
