#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "dpos/common.hpp"

namespace dpos {

inline constexpr int kSchemaVersion = 1;

enum class Verdict { Pass, Fail, Inconclusive };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "PASS";
    case Verdict::Fail: return "FAIL";
    case Verdict::Inconclusive: return "INCONCLUSIVE";
  }
  return "?";
}

inline Verdict verdict_from_string(const std::string& s) {
  if (s == "PASS") return Verdict::Pass;
  if (s == "FAIL") return Verdict::Fail;
  if (s == "INCONCLUSIVE") return Verdict::Inconclusive;
  throw ConfigError("unknown verdict '" + s + "'");
}

/// Where a check attained its worst value.
struct Witness {
  Vec x;
  Vec theta;            // empty when the check has no tangent component
  int constraint = -1;  // zero-based index, -1 if not applicable
  double time = std::numeric_limits<double>::quiet_NaN();
  Vec reached;          // state at `time` for trajectory-level checks
};

struct SampleMargin {
  Vec x;
  Vec theta;
  int constraint = -1;
  double value = 0.0;
};

struct CheckReport {
  std::string check;
  Verdict verdict = Verdict::Inconclusive;
  double worst_margin = kInf;
  double threshold = 0.0;  // FAIL iff worst_margin < threshold
  std::optional<Witness> witness;
  std::size_t samples_evaluated = 0;
  std::vector<std::string> warnings;
  std::vector<std::pair<std::string, Verdict>> preconditions;
  nlohmann::json config_echo = nlohmann::json::object();
  std::vector<SampleMargin> samples;  // filled only when requested

  /// Folds one evaluated value into the running minimum. Ties keep the
  /// earlier sample so the witness depends only on evaluation order.
  void record(double value, const Vec& x, const Vec& theta, int constraint,
              double time = std::numeric_limits<double>::quiet_NaN(), const Vec& reached = Vec()) {
    ++samples_evaluated;
    if (!witness || value < worst_margin) {
      worst_margin = value;
      witness = Witness{x, theta, constraint, time, reached};
    }
  }

  void finalize(bool sampler_starved) {
    if (worst_margin < threshold)
      verdict = Verdict::Fail;
    else if (sampler_starved)
      verdict = Verdict::Inconclusive;
    else
      verdict = Verdict::Pass;
  }
};

/// Log-linear fit of Hilbert distances along the variational flow.
struct ContractionReport {
  double fitted_rate = 0.0;    // worst (smallest) rate over fitted pairs
  double fitted_offset = 1.0;  // k >= 1 in d(t) <= k exp(-rate (t - T0)) Delta
  double r_squared = 0.0;      // worst goodness of fit over fitted pairs
  double horizon_T = 0.0;
  double delta_bound = 0.0;    // largest initial distance seen
  bool contraction_asserted = false;
  std::size_t pairs_requested = 0;
  std::size_t pairs_fitted = 0;
  std::size_t pairs_identical = 0;  // d == 0 throughout
  std::size_t pairs_discarded = 0;  // infinite distance on the way
  std::vector<std::string> warnings;
  nlohmann::json config_echo = nlohmann::json::object();

  struct Series {
    std::vector<double> t;
    std::vector<double> d;
    double rate = 0.0;
    double r_squared = 0.0;
    bool fitted = false;
  };
  std::vector<Series> series;
};

struct Equilibrium {
  Vec x;
  std::vector<std::pair<double, double>> eigenvalues;  // (re, im)
  std::string stability;                              // stable | unstable | saddle | nonhyperbolic
  std::optional<Vec> family_direction;                // set for a continuum of equilibria
};

struct CycleInfo {
  double period = 0.0;
  std::vector<Vec> orbit;
  Vec section_point;
  Vec section_normal;
  double section_residual = 0.0;  // |<n, p - p*>| at the last localized crossing
  std::vector<double> return_distances;
  std::vector<double> return_ratios;
  std::vector<double> transverse_multipliers;  // moduli of monodromy eigenvalues off the flow direction
  std::optional<double> geometric_fit_r_squared;
  double closure_error = 0.0;
  double max_hausdorff = 0.0;
};

struct SyncInfo {
  double lambda_param = 0.0;
  double min_derivative_margin = kInf;
  double max_final_spread = 0.0;
  std::vector<std::string> suggestions;
};

enum class AttractorKind { FixedPoints, Curve1D, LimitCycle, Synchronization, Undetermined };

inline const char* to_string(AttractorKind k) {
  switch (k) {
    case AttractorKind::FixedPoints: return "FixedPoints";
    case AttractorKind::Curve1D: return "Curve1D";
    case AttractorKind::LimitCycle: return "LimitCycle";
    case AttractorKind::Synchronization: return "Synchronization";
    case AttractorKind::Undetermined: return "Undetermined";
  }
  return "?";
}

struct AttractorReport {
  AttractorKind kind = AttractorKind::Undetermined;
  std::vector<Equilibrium> fixed_points;
  std::optional<CycleInfo> cycle;
  std::optional<SyncInfo> sync;
  double basin_fraction = 0.0;
  std::vector<double> basin_per_equilibrium;  // aligned with fixed_points
  std::size_t initial_conditions = 0;
  std::vector<std::pair<std::string, Verdict>> hypotheses_checked;
  std::vector<std::string> assumed;
  std::vector<std::string> notes;
  nlohmann::json config_echo = nlohmann::json::object();

  // Plot data, not serialized into the JSON report.
  std::vector<std::vector<std::pair<double, double>>> spread_series;

  bool hypotheses_pass() const {
    for (const auto& [name, v] : hypotheses_checked)
      if (v != Verdict::Pass) return false;
    return true;
  }
};

// ---------------------------------------------------------------------------
// JSON. Non-finite numbers are written as the strings "inf", "-inf", "nan" so
// that every report re-parses losslessly.
// ---------------------------------------------------------------------------

inline nlohmann::json number_json(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

inline double number_from_json(const nlohmann::json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return kInf;
    if (s == "-inf") return -kInf;
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    throw ConfigError("expected a number, got '" + s + "'");
  }
  return j.get<double>();
}

inline nlohmann::json vec_json(const Vec& v) {
  auto a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(number_json(v[i]));
  return a;
}

inline nlohmann::json to_json(const Witness& w) {
  nlohmann::json j;
  j["x"] = vec_json(w.x);
  j["theta"] = vec_json(w.theta);
  j["constraint"] = w.constraint;
  j["time"] = number_json(w.time);
  j["reached"] = vec_json(w.reached);
  return j;
}

inline nlohmann::json to_json(const CheckReport& r) {
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  j["report"] = "check";
  j["check"] = r.check;
  j["verdict"] = to_string(r.verdict);
  j["worst_margin"] = number_json(r.worst_margin);
  j["threshold"] = number_json(r.threshold);
  j["witness"] = r.witness ? to_json(*r.witness) : nlohmann::json(nullptr);
  j["samples_evaluated"] = r.samples_evaluated;
  j["warnings"] = r.warnings;
  auto pre = nlohmann::json::array();
  for (const auto& [name, v] : r.preconditions) pre.push_back({{"name", name}, {"verdict", to_string(v)}});
  j["preconditions"] = pre;
  j["config_echo"] = r.config_echo;
  return j;
}

inline nlohmann::json to_json(const ContractionReport& r) {
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  j["report"] = "contraction";
  j["fitted_rate"] = number_json(r.fitted_rate);
  j["fitted_offset"] = number_json(r.fitted_offset);
  j["r_squared"] = number_json(r.r_squared);
  j["horizon_T"] = r.horizon_T;
  j["delta_bound"] = number_json(r.delta_bound);
  j["contraction_asserted"] = r.contraction_asserted;
  j["pairs"] = {{"requested", r.pairs_requested},
                {"fitted", r.pairs_fitted},
                {"identical", r.pairs_identical},
                {"discarded", r.pairs_discarded}};
  j["warnings"] = r.warnings;
  j["config_echo"] = r.config_echo;
  return j;
}

inline nlohmann::json to_json(const Equilibrium& e) {
  nlohmann::json j;
  j["x"] = vec_json(e.x);
  auto ev = nlohmann::json::array();
  for (const auto& [re, im] : e.eigenvalues) ev.push_back({number_json(re), number_json(im)});
  j["eigenvalues"] = ev;
  j["stability"] = e.stability;
  j["family_direction"] = e.family_direction ? vec_json(*e.family_direction) : nlohmann::json(nullptr);
  return j;
}

inline nlohmann::json to_json(const AttractorReport& r) {
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  j["report"] = "attractor";
  j["kind"] = to_string(r.kind);
  auto fps = nlohmann::json::array();
  for (const auto& e : r.fixed_points) fps.push_back(to_json(e));
  j["fixed_points"] = fps;
  if (r.cycle) {
    const auto& c = *r.cycle;
    nlohmann::json cj;
    cj["period"] = number_json(c.period);
    cj["orbit_points"] = c.orbit.size();
    cj["section"] = {{"point", vec_json(c.section_point)},
                     {"normal", vec_json(c.section_normal)},
                     {"residual", number_json(c.section_residual)}};
    auto num_array = [](const std::vector<double>& v) {
      auto a = nlohmann::json::array();
      for (double d : v) a.push_back(number_json(d));
      return a;
    };
    cj["return_distances"] = num_array(c.return_distances);
    cj["return_ratios"] = num_array(c.return_ratios);
    cj["transverse_multipliers"] = num_array(c.transverse_multipliers);
    cj["geometric_fit_r_squared"] =
        c.geometric_fit_r_squared ? number_json(*c.geometric_fit_r_squared) : nlohmann::json(nullptr);
    cj["closure_error"] = number_json(c.closure_error);
    cj["max_hausdorff"] = number_json(c.max_hausdorff);
    j["cycle"] = cj;
  } else {
    j["cycle"] = nullptr;
  }
  if (r.sync) {
    j["sync"] = {{"lambda_param", r.sync->lambda_param},
                 {"min_derivative_margin", number_json(r.sync->min_derivative_margin)},
                 {"max_final_spread", number_json(r.sync->max_final_spread)},
                 {"suggestions", r.sync->suggestions}};
  } else {
    j["sync"] = nullptr;
  }
  j["basin_fraction"] = number_json(r.basin_fraction);
  auto basins = nlohmann::json::array();
  for (double b : r.basin_per_equilibrium) basins.push_back(number_json(b));
  j["basin_per_equilibrium"] = basins;
  j["initial_conditions"] = r.initial_conditions;
  auto hyp = nlohmann::json::array();
  for (const auto& [name, v] : r.hypotheses_checked) hyp.push_back({{"name", name}, {"verdict", to_string(v)}});
  j["hypotheses_checked"] = hyp;
  j["assumed"] = r.assumed;
  j["notes"] = r.notes;
  j["config_echo"] = r.config_echo;
  return j;
}

}  // namespace dpos
