// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <string>

#include <unsupported/Eigen/MatrixFunctions>

#include "dpos/dpos.hpp"

using namespace dpos;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double orthant_distance(const Vec& x, const Vec& y) {
  const Vec r = x.cwiseQuotient(y);
  return std::log(r.maxCoeff() / r.minCoeff());
}

// Positive root of x = c tanh(x).
double tanh_root(double c) {
  double lo = 0.5, hi = c + 1.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (mid - c * std::tanh(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

std::vector<ModelBundle> zoo() {
  return {pendulum(3.0, 0.0),      pendulum(3.0, 1.5),      pendulum(1.5, 0.0),
          cooperative_demo(2.0),   cooperative_demo(0.5),   make_bundle("metzler_linear"),
          kuramoto(5)};
}

Outcome hilbert_oracle() {
  Outcome o;
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> logu(-3.0, 3.0), scale(0.01, 100.0);
  double worst = 0.0, worst_scale = 0.0, worst_sym = 0.0;
  int pairs = 0;
  for (int n = 3; n <= 5; ++n) {
    const auto c = orthant_cone(n);
    const Vec x0 = Vec::Zero(n);
    for (int k = 0; k < 334; ++k, ++pairs) {
      Vec a(n), b(n);
      for (int i = 0; i < n; ++i) {
        a[i] = std::exp(logu(rng));
        b[i] = std::exp(logu(rng));
      }
      const double d = hilbert_distance(c, x0, a, b);
      worst = std::max(worst, std::abs(d - orthant_distance(a, b)));
      worst_scale = std::max(worst_scale, std::abs(hilbert_distance(c, x0, scale(rng) * a, scale(rng) * b) - d));
      worst_sym = std::max(worst_sym, std::abs(hilbert_distance(c, x0, b, a) - d));
    }
  }
  o.require(pairs >= 1000, "too few pairs");
  o.require(worst < 1e-8, "closed-form gap " + fmt("%.2e", worst));
  o.require(worst_scale < 1e-8, "scaling gap " + fmt("%.2e", worst_scale));
  o.require(worst_sym < 1e-8, "symmetry gap " + fmt("%.2e", worst_sym));
  o.detail = std::to_string(pairs) + " pairs, max |d - closed form| " + fmt("%.1e", worst) + ", scaling " +
             fmt("%.1e", worst_scale) + ", symmetry " + fmt("%.1e", worst_sym) + (o.pass ? "" : " :: " + o.detail);
  return o;
}

Outcome pendulum_dichotomy() {
  Outcome o;
  const double analytic = 1.0 / std::sqrt(2.0);
  std::string d;
  for (double u : {0.0, 0.5, 1.5}) {
    const auto b = pendulum(3.0, u);
    const auto r = check_theorem3(b.model, b.cone, b.default_region);
    o.require(r.verdict == Verdict::Pass, "k=3 u=" + fmt("%g", u) + " not PASS");
    o.require(std::abs(r.worst_margin - analytic) <= 0.2 * analytic, "k=3 margin " + fmt("%.4f", r.worst_margin));
    d += "k=3,u=" + fmt("%g", u) + ": " + to_string(r.verdict) + " " + fmt("%.4f", r.worst_margin) + "  ";
  }
  const auto b = pendulum(1.5, 0.0);
  const auto r = check_theorem3(b.model, b.cone, b.default_region);
  o.require(r.verdict == Verdict::Fail, "k=1.5 not FAIL");
  d += "k=1.5: " + std::string(to_string(r.verdict)) + " " + fmt("%.4f", r.worst_margin) + " (analytic PASS margin " +
       fmt("%.4f", analytic) + ")";
  o.detail = d + (o.pass ? "" : " :: " + o.detail);
  return o;
}

Outcome soundness_coupling() {
  Outcome o;
  std::string d;
  int passes = 0;
  for (const auto& b : zoo()) {
    const auto t3 = check_theorem3(b.model, b.cone, b.default_region);
    if (t3.verdict != Verdict::Pass) continue;
    ++passes;
    const auto inv = verify_invariance_along_flow(b.model, b.cone, b.default_region, 30.0, 1e-3, 5);
    const auto con = estimate_contraction(b.model, b.cone, b.default_region, 30.0, 1e-3, 5);
    o.require(inv.verdict == Verdict::Pass, b.name + " invariance " + to_string(inv.verdict));
    o.require(con.fitted_rate > 0.0, b.name + " rate " + fmt("%.3g", con.fitted_rate));
    o.require(con.r_squared >= 0.9, b.name + " r2 " + fmt("%.3f", con.r_squared));
    d += b.name + "(" + b.params.dump() + "): rate " + fmt("%.3f", con.fitted_rate) + " r2 " +
         fmt("%.4f", con.r_squared) + "  ";
  }
  o.require(passes > 0, "no zoo model passed the strict check");
  o.detail = std::to_string(passes) + " strict passes; " + d + (o.pass ? "" : " :: " + o.detail);
  return o;
}

Outcome metzler_equivalence() {
  Outcome o;
  std::mt19937_64 rng(404);
  std::uniform_int_distribution<int> q(-8, 8);
  int disagreements = 0, metzler = 0;
  for (int k = 0; k < 200; ++k) {
    Mat A(3, 3);
    for (int i = 0; i < 9; ++i) A(i / 3, i % 3) = 0.25 * q(rng);
    // Half Metzler, a quarter Metzler but for a single -0.25 entry, a quarter unconstrained.
    if (k % 4 != 3)
      for (int i = 0; i < 9; ++i)
        if (i / 3 != i % 3) A(i / 3, i % 3) = std::abs(A(i / 3, i % 3));
    if (k % 4 == 2) {
      const int off[6] = {1, 2, 3, 5, 6, 7};
      const int i = off[k / 4 % 6];
      A(i / 3, i % 3) = -0.25;
    }
    bool sign = true;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        if (i != j && A(i, j) < 0.0) sign = false;
    bool expm = true;
    for (double t : {1e-3, 1e-2, 0.1, 0.5, 1.0, 3.0}) {
      const Mat E = Mat(A * t).exp();
      if (E.minCoeff() < -1e-12 * E.cwiseAbs().maxCoeff()) expm = false;
    }
    const auto b = metzler_linear(A);
    const bool flow = verify_invariance_along_flow(b.model, b.cone, b.default_region, 3.0, 1e-3, 5).verdict ==
                      Verdict::Pass;
    metzler += sign;
    if (flow != sign || flow != expm) ++disagreements;
  }
  o.require(disagreements == 0, std::to_string(disagreements) + " disagreements");
  o.detail = "200 matrices (" + std::to_string(metzler) + " Metzler), " + std::to_string(disagreements) +
             " disagreements";
  return o;
}

Outcome limit_cycle() {
  Outcome o;
  const auto b = pendulum(3.0, 1.5);
  const auto r = detect_limit_cycle(b.model, b.cone, b.default_region, 100.0);
  o.require(r.fixed_points.empty(), "fixed points found");
  for (const auto& [name, v] : r.hypotheses_checked) o.require(v == Verdict::Pass, name + " " + to_string(v));
  o.require(r.kind == AttractorKind::LimitCycle, std::string("kind ") + to_string(r.kind));
  if (!r.cycle) {
    o.require(false, "no cycle");
    return o;
  }
  const auto& c = *r.cycle;
  double max_ratio = 0.0, max_mu = 0.0;
  for (double q : c.return_ratios) max_ratio = std::max(max_ratio, q);
  for (double mu : c.transverse_multipliers) max_mu = std::max(max_mu, mu);
  o.require(!c.return_ratios.empty() && max_ratio < 1.0, "return ratios " + fmt("%.3g", max_ratio));
  o.require(!c.transverse_multipliers.empty() && max_mu < 1.0, "multiplier " + fmt("%.3g", max_mu));
  o.require(r.initial_conditions == 10 && r.basin_fraction == 1.0, "not all ICs on the orbit");
  o.require(c.max_hausdorff < 1e-4, "Hausdorff " + fmt("%.2e", c.max_hausdorff));
  double reclose = 0.0;
  for (std::size_t k = 0; k < c.orbit.size(); k += c.orbit.size() / 8) {
    const Vec end = flow(b.model, c.orbit[k], c.period, 1e-3);
    reclose = std::max(reclose, chart_difference(end, c.orbit[k], b.model.wrap).norm());
  }
  o.require(reclose < 1e-4, "re-integration gap " + fmt("%.2e", reclose));
  o.detail = "period " + fmt("%.4f", c.period) + ", return ratio " + fmt("%.2e", max_ratio) +
             ", transverse multiplier " + fmt("%.2e", max_mu) + ", Hausdorff " + fmt("%.1e", c.max_hausdorff) +
             ", re-closure " + fmt("%.1e", reclose) + (o.pass ? "" : " :: " + o.detail);
  return o;
}

Outcome kuramoto_sync() {
  Outcome o;
  const int n = 5;
  const auto region = max_gap_region(n, kPi / 2 - 0.1);
  const auto model = kuramoto_model(n);
  std::mt19937_64 rng(606);
  double c1 = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const Vec th = region.sample_uniform(rng);
    c1 = std::max(c1, (kuramoto_C(th) * Vec::Ones(n)).cwiseAbs().maxCoeff());
  }
  o.require(c1 < 1e-13, "C1 " + fmt("%.2e", c1));

  double consensus = 0.0;
  const Vec ones = Vec::Ones(n) / std::sqrt(double(n));
  for (int k = 0; k < 5; ++k) {
    const auto tr = integrate_prolonged(model, region.sample_uniform(rng), ones, 50.0, 1e-2);
    for (const auto& d : tr.directions) consensus = std::max(consensus, (d - ones).norm());
  }
  o.require(consensus < 1e-9, "consensus tangent drift " + fmt("%.2e", consensus));

  SyncOptions so;
  so.n_ic = 50;
  const auto r = kuramoto_sync_analysis(n, region, 1.0, 50.0, so);
  o.require(r.kind == AttractorKind::Synchronization, std::string("kind ") + to_string(r.kind));
  const double margin = r.sync ? r.sync->min_derivative_margin : -kInf;
  const double spread = r.sync ? r.sync->max_final_spread : kInf;
  o.require(margin > 0.0, "derivative margin " + fmt("%.3g", margin));
  o.require(r.initial_conditions == 50 && spread < 1e-6, "final spread " + fmt("%.2e", spread));

  const Mat P = consensus_projector(n);
  const double proj = std::max({(P * P - P).cwiseAbs().maxCoeff(), (P * Vec::Ones(n)).cwiseAbs().maxCoeff(),
                                (P - P.transpose()).cwiseAbs().maxCoeff()});
  o.require(proj < 1e-14, "projector " + fmt("%.2e", proj));
  o.detail = "C1 " + fmt("%.1e", c1) + ", consensus drift " + fmt("%.1e", consensus) + ", margin " +
             fmt("%.3g", margin) + ", final spread " + fmt("%.1e", spread) + ", projector " + fmt("%.1e", proj) +
             (o.pass ? "" : " :: " + o.detail);
  return o;
}

Outcome bistable() {
  Outcome o;
  const auto b = cooperative_demo(2.0);
  const auto r = detect_bistable_convergence(b.model, b.cone, b.default_region, 500, 60.0);
  for (const auto& [name, v] : r.hypotheses_checked) o.require(v == Verdict::Pass, name + " " + to_string(v));
  o.require(r.kind == AttractorKind::FixedPoints, std::string("kind ") + to_string(r.kind));
  o.require(r.initial_conditions == 500 && r.basin_fraction == 1.0, "basin fraction " + fmt("%.3f", r.basin_fraction));
  o.require(r.fixed_points.size() == 3, std::to_string(r.fixed_points.size()) + " equilibria");
  const double xs = tanh_root(2.0);
  double loc = 0.0, resid = 0.0, origin = 0.0;
  for (std::size_t e = 0; e < r.fixed_points.size(); ++e) {
    const Vec& x = r.fixed_points[e].x;
    resid = std::max(resid, b.model.f(x).norm());
    double best = kInf;
    for (double s : {-1.0, 0.0, 1.0}) best = std::min(best, (x - Vec::Constant(2, s * xs)).cwiseAbs().maxCoeff());
    loc = std::max(loc, best);
    if (x.norm() < 1e-6 && e < r.basin_per_equilibrium.size()) origin = r.basin_per_equilibrium[e];
  }
  o.require(resid < 1e-8, "|f| " + fmt("%.2e", resid));
  o.require(loc < 1e-6, "location gap " + fmt("%.2e", loc));
  o.require(origin < 0.01, "origin basin " + fmt("%.3f", origin));
  o.detail = "equilibria 0, +/-" + fmt("%.6f", xs) + " matched to " + fmt("%.1e", loc) + ", |f| " +
             fmt("%.1e", resid) + ", origin basin " + fmt("%.3f", origin) + (o.pass ? "" : " :: " + o.detail);
  return o;
}

Outcome normalized_consistency() {
  Outcome o;
  std::mt19937_64 rng(808);
  std::normal_distribution<double> g;
  double dir = 0.0, drift = 0.0;
  int runs = 0;
  std::size_t renorm = 0;
  for (const auto& b : zoo()) {
    for (int k = 0; k < 3; ++k, ++runs) {
      const Vec x0 = b.default_region.sample_uniform(rng);
      Vec th0(b.model.dim);
      for (int i = 0; i < b.model.dim; ++i) th0[i] = g(rng);
      th0 /= b.model.norm(x0, th0);
      try {
        const auto a = integrate_prolonged(b.model, x0, th0, 20.0, 1e-3);
        const auto c = integrate_normalized(b.model, x0, th0, 20.0, 1e-3);
        drift = std::max(drift, c.max_drift);
        renorm += c.renormalizations;
        for (std::size_t j = 0; j < c.times.size(); ++j) {
          const double nrm = b.model.norm(c.states[j], c.directions[j]);
          drift = std::max(drift, std::abs(nrm - 1.0));
          const Vec ua = a.directions[j] / b.model.norm(a.states[j], a.directions[j]);
          dir = std::max(dir, (ua - c.directions[j] / nrm).norm());
        }
      } catch (const Error& e) {
        o.require(false, b.name + ": " + e.what());
      }
    }
  }
  o.require(dir < 1e-5, "direction gap " + fmt("%.2e", dir));
  o.require(drift < 1e-6, "norm drift " + fmt("%.2e", drift));
  o.detail = std::to_string(runs) + " runs over the zoo, max direction gap " + fmt("%.1e", dir) + ", max |theta| drift " +
             fmt("%.1e", drift) + ", " + std::to_string(renorm) + " renormalizations" + (o.pass ? "" : " :: " + o.detail);
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"hilbert_oracle_equivalence", hilbert_oracle},
      {"pendulum_dichotomy", pendulum_dichotomy},
      {"soundness_coupling", soundness_coupling},
      {"metzler_equivalence", metzler_equivalence},
      {"limit_cycle", limit_cycle},
      {"kuramoto_synchronization", kuramoto_sync},
      {"bistable_detection", bistable},
      {"normalized_flow_consistency", normalized_consistency},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = criteria[i].second();
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > 120.0) {
      out.pass = false;
      out.detail += " (over the 2 minute budget)";
    }
    failed += !out.pass;
    std::printf("%s %zu %s [%.1fs] %s\n", out.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, secs,
                out.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
