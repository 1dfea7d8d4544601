#pragma once

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "dpos/attractors.hpp"
#include "dpos/checker.hpp"
#include "dpos/model_zoo.hpp"

namespace dpos::cli {

namespace fs = std::filesystem;
using nlohmann::json;

enum ExitCode : int { kPass = 0, kFail = 1, kInconclusive = 2, kConfigError = 3 };

inline constexpr const char* kOutputRootEnv = "DPOS_OUTPUT_ROOT";

inline const std::set<std::string>& allowed_keys() {
  static const std::set<std::string> keys = {
      "model",     "params",  "cone",   "region",     "theorem",        "check",       "kind",
      "T",         "h",       "eps",    "seed",       "directions",     "density",     "n_pairs",
      "n_ic",      "lambda",  "output", "ics",        "prolonged",      "dx0",         "strict_margin",
      "tol",       "n_curves", "max_arclen", "assume_forward_invariant"};
  return keys;
}

// ---------------------------------------------------------------------------
// Config resolution
// ---------------------------------------------------------------------------

template <class T>
T get_or(const json& cfg, const char* key, T fallback) {
  if (!cfg.contains(key)) return fallback;
  try {
    return cfg.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("field '") + key + "' has the wrong type");
  }
}

inline void validate_keys(const json& cfg) {
  if (!cfg.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, _] : cfg.items())
    if (!allowed_keys().contains(key)) throw ConfigError("unknown config key '" + key + "'");
}

inline json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path + "': " + e.what());
  }
}

/// A --param value: JSON when it parses, a string otherwise.
inline json parse_scalar(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error&) {
    return text;
  }
}

inline Vec vec_from_json(const json& j, const std::string& field) {
  if (!j.is_array()) throw ConfigError("field '" + field + "' must be an array of numbers");
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError("field '" + field + "' must be an array of numbers");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

inline ModelBundle resolve_model(const json& cfg) {
  if (!cfg.contains("model")) throw ConfigError("missing field 'model'");
  const json params = cfg.value("params", json::object());
  if (!params.is_object()) throw ConfigError("field 'params' must be an object");
  const auto& m = cfg["model"];
  if (m.is_object()) {
    if (!m.contains("A")) throw ConfigError("inline model needs a matrix 'A'");
    return metzler_linear(matrix_from_json(m["A"]));
  }
  if (!m.is_string()) throw ConfigError("field 'model' must be a name or an inline {\"A\": ...} object");
  return make_bundle(m.get<std::string>(), params);
}

inline ConeField resolve_cone(const json& cfg, const ModelBundle& b) {
  if (!cfg.contains("cone")) return b.cone;
  const auto& c = cfg["cone"];
  if (c.is_string()) {
    const auto name = c.get<std::string>();
    if (name == "default" || name == b.cone.name) return b.cone;
    if (name == "pendulum_default") return pendulum_cone();
    if (name == "orthant") return orthant_cone(b.model.dim);
    if (name == "kuramoto_rho_cone") return kuramoto_rho_cone(b.model.dim, get_or(cfg, "lambda", 1.0));
    throw ConfigError("unknown cone '" + name + "'");
  }
  if (!c.is_object() || !c.contains("kind") || !c.contains("rows"))
    throw ConfigError("inline cone needs 'kind' and 'rows'");
  const Mat F = matrix_from_json(c["rows"]);
  if (F.cols() != b.model.dim) throw ConfigError("cone rows must have the model dimension");
  const auto kind = c["kind"].get<std::string>();
  if (kind == "polyhedral") return polyhedral_cone(F);
  if (kind == "quadratic")
    return quadratic_cone(F, c.value("cross_terms", std::string("diagonal")) == "full" ? CrossTerms::Full
                                                                                       : CrossTerms::Diagonal);
  throw ConfigError("unknown cone kind '" + kind + "'");
}

inline CompactRegion resolve_region(const json& cfg, const ModelBundle& b) {
  const int density = get_or(cfg, "density", b.default_region.grid_density);
  if (!cfg.contains("region") || (cfg["region"].is_string() && cfg["region"] == "default")) {
    CompactRegion r = b.default_region;
    r.grid_density = density;
    return r;
  }
  const auto& r = cfg["region"];
  if (!r.is_object()) throw ConfigError("field 'region' must be an object or \"default\"");
  if (r.contains("max_gap")) return max_gap_region(b.model.dim, r["max_gap"].get<double>(), density);
  if (r.contains("energy")) return pendulum_energy_region(r["energy"].get<double>(), density);
  if (r.contains("band_half_width")) {
    if (b.name != "pendulum") throw ConfigError("region 'band_half_width' applies to the pendulum only");
    return pendulum_band_region(b.params["k"].get<double>(), b.params["u"].get<double>(),
                                r["band_half_width"].get<double>(), density);
  }
  if (!r.contains("lo")) throw ConfigError("region: missing bounds 'lo'");
  if (!r.contains("hi")) throw ConfigError("region: missing bounds 'hi'");
  const Vec lo = vec_from_json(r["lo"], "region.lo");
  const Vec hi = vec_from_json(r["hi"], "region.hi");
  std::vector<bool> wrap = b.model.wrap;
  if (r.contains("wrap")) wrap = r["wrap"].get<std::vector<bool>>();
  if (lo.size() != b.model.dim || hi.size() != b.model.dim || static_cast<int>(wrap.size()) != b.model.dim)
    throw ConfigError("region bounds must have the model dimension");
  try {
    return CompactRegion(lo, hi, wrap, density);
  } catch (const PreconditionError& e) {
    throw ConfigError(std::string("region: ") + e.what());
  }
}

inline CheckOptions check_options(const json& cfg) {
  CheckOptions o;
  o.directions = get_or(cfg, "directions", o.directions);
  o.tol = get_or(cfg, "tol", o.tol);
  o.strict_margin = get_or(cfg, "strict_margin", o.strict_margin);
  o.seed = get_or<std::uint64_t>(cfg, "seed", o.seed);
  o.assume_forward_invariant = get_or(cfg, "assume_forward_invariant", o.assume_forward_invariant);
  o.record_samples = true;
  return o;
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline fs::path run_directory(const std::string& command, const json& cfg) {
  std::string root = "dpos_runs";
  if (const char* env = std::getenv(kOutputRootEnv); env && *env) root = env;
  if (cfg.contains("output")) root = cfg["output"].get<std::string>();
  json hashed = cfg;
  hashed.erase("output");
  hashed["command"] = command;
  std::ostringstream name;
  name << std::hex << std::setw(16) << std::setfill('0') << fnv1a(hashed.dump()) << std::dec << "-s"
       << get_or<std::uint64_t>(cfg, "seed", 1);
  fs::path dir = fs::path(root) / name.str();
  fs::create_directories(dir);
  return dir;
}

inline void write_json(const fs::path& p, const json& j) {
  std::ofstream out(p);
  out << j.dump(2) << "\n";
}

inline void write_metadata(const fs::path& dir, const std::string& command) {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::ostringstream ts;
  ts << std::put_time(std::gmtime(&t), "%Y-%m-%dT%H:%M:%SZ");
  write_json(dir / "metadata.json", {{"created_utc", ts.str()}, {"command", command}, {"schema_version", kSchemaVersion}});
}

/// Plain CSV writer: fixed header, one row per call, every row the header's width.
class CsvWriter {
 public:
  CsvWriter(const fs::path& p, std::vector<std::string> header) : out_(p), width_(header.size()) {
    out_ << std::setprecision(17);
    row_strings(header);
  }
  void row(const std::vector<double>& values) {
    if (values.size() != width_) throw Error("csv row width mismatch");
    for (std::size_t i = 0; i < values.size(); ++i) out_ << (i ? "," : "") << values[i];
    out_ << "\n";
  }
  void flush() { out_.flush(); }

 private:
  void row_strings(const std::vector<std::string>& values) {
    for (std::size_t i = 0; i < values.size(); ++i) out_ << (i ? "," : "") << values[i];
    out_ << "\n";
  }
  std::ofstream out_;
  std::size_t width_;
};

inline std::vector<std::string> indexed(const std::string& prefix, int n) {
  std::vector<std::string> v;
  for (int i = 1; i <= n; ++i) v.push_back(prefix + std::to_string(i));
  return v;
}

inline int exit_for(Verdict v) {
  switch (v) {
    case Verdict::Pass: return kPass;
    case Verdict::Fail: return kFail;
    case Verdict::Inconclusive: return kInconclusive;
  }
  return kInconclusive;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

inline int cmd_check(const json& cfg, std::ostream& out, std::ostream& err) {
  const auto b = resolve_model(cfg);
  const auto cone = resolve_cone(cfg, b);
  const auto region = resolve_region(cfg, b);
  auto opt = check_options(cfg);
  std::string which = get_or<std::string>(cfg, "check", "");
  if (cfg.contains("theorem")) which = "theorem" + std::to_string(get_or(cfg, "theorem", 3));
  if (which.empty()) which = "theorem3";
  const double T = get_or(cfg, "T", which == "theorem2" ? 1.0 : 10.0);
  const double h = get_or(cfg, "h", 1e-3);
  CheckReport rep;
  if (which == "theorem1") rep = check_theorem1(b.model, cone, region, opt);
  else if (which == "theorem2") rep = check_theorem2(b.model, cone, region, T, get_or(cfg, "eps", 0.05), opt);
  else if (which == "theorem3") rep = check_theorem3(b.model, cone, region, opt);
  else if (which == "invariance") {
    FlowCheckOptions fo;
    fo.seed = opt.seed;
    fo.record_samples = true;
    rep = verify_invariance_along_flow(b.model, cone, region, T, h, get_or(cfg, "n_pairs", 20), fo);
  } else if (which == "forward_invariance") {
    rep = check_forward_invariance(b.model, region, T, get_or(cfg, "h", 1e-2), region.grid_density);
  } else if (which == "conal_exit") {
    rep = check_conal_exit(b.model, cone, region, get_or(cfg, "n_curves", 25), get_or(cfg, "max_arclen", 20.0));
  } else {
    throw ConfigError("unknown check '" + which + "'");
  }
  rep.config_echo["model"] = {{"name", b.name}, {"params", b.params}};
  const auto dir = run_directory("check", cfg);
  write_json(dir / "config.json", cfg);
  write_json(dir / "report.json", to_json(rep));
  {
    const int n = b.model.dim;
    auto header = indexed("x_", n);
    for (auto& s : indexed("theta_", n)) header.push_back(s);
    header.push_back("constraint");
    header.push_back("margin");
    CsvWriter csv(dir / "margins.csv", header);
    for (const auto& s : rep.samples) {
      std::vector<double> row = to_std(s.x);
      const auto th = s.theta.size() == n ? to_std(s.theta) : std::vector<double>(static_cast<std::size_t>(n), 0.0);
      row.insert(row.end(), th.begin(), th.end());
      row.push_back(s.constraint);
      row.push_back(s.value);
      csv.row(row);
    }
  }
  write_metadata(dir, "check");
  err << rep.check << ": " << to_string(rep.verdict) << " (worst margin " << rep.worst_margin << ")\n";
  out << dir.string() << "\n";
  return exit_for(rep.verdict);
}

inline int cmd_simulate(const json& cfg, std::ostream& out, std::ostream& err) {
  const auto b = resolve_model(cfg);
  const auto region = resolve_region(cfg, b);
  const double T = get_or(cfg, "T", 10.0);
  const double h = get_or(cfg, "h", 1e-3);
  const bool prolonged = get_or(cfg, "prolonged", false);
  std::vector<Vec> ics;
  if (cfg.contains("ics")) {
    for (const auto& ic : cfg["ics"]) ics.push_back(vec_from_json(ic, "ics"));
  } else {
    std::mt19937_64 rng(get_or<std::uint64_t>(cfg, "seed", 1));
    for (int i = 0; i < get_or(cfg, "n_ic", 1); ++i) ics.push_back(region.sample_uniform(rng));
  }
  for (const auto& ic : ics)
    if (ic.size() != b.model.dim) throw ConfigError("initial condition has the wrong dimension");
  const auto dir = run_directory("simulate", cfg);
  write_json(dir / "config.json", cfg);
  const int n = b.model.dim;
  int code = kPass;
  for (std::size_t k = 0; k < ics.size(); ++k) {
    auto header = std::vector<std::string>{"t"};
    for (auto& s : indexed("x_", n)) header.push_back(s);
    if (prolonged) {
      for (auto& s : indexed("theta_", n)) header.push_back(s);
      header.push_back("log_mag");
    }
    CsvWriter csv(dir / ("trajectory_" + std::to_string(k) + ".csv"), header);
    try {
      if (prolonged) {
        Vec dx0 = cfg.contains("dx0") ? vec_from_json(cfg["dx0"], "dx0") : cone_center(resolve_cone(cfg, b), ics[k]);
        const auto tr = integrate_prolonged(b.model, ics[k], dx0, T, h);
        for (std::size_t i = 0; i < tr.times.size(); ++i) {
          std::vector<double> row{tr.times[i]};
          for (double v : to_std(tr.states[i])) row.push_back(v);
          for (double v : to_std(tr.directions[i])) row.push_back(v);
          row.push_back(tr.log_mags[i]);
          csv.row(row);
        }
      } else {
        integrate_observed(b.model, ics[k], T, h, [&](double t, const Vec& x) {
          std::vector<double> row{t};
          for (double v : to_std(x)) row.push_back(v);
          csv.row(row);
          return true;
        });
      }
    } catch (const DivergenceError& e) {
      err << "trajectory " << k << ": " << e.what() << "\n";
      code = kFail;
    }
  }
  write_metadata(dir, "simulate");
  out << dir.string() << "\n";
  return code;
}

inline int cmd_hilbert(const json& cfg, std::ostream& out, std::ostream& err) {
  const auto b = resolve_model(cfg);
  const auto cone = resolve_cone(cfg, b);
  const auto region = resolve_region(cfg, b);
  ContractionOptions o;
  o.seed = get_or<std::uint64_t>(cfg, "seed", o.seed);
  const auto rep = estimate_contraction(b.model, cone, region, get_or(cfg, "T", 30.0), get_or(cfg, "h", 1e-3),
                                        get_or(cfg, "n_pairs", 10), o);
  const auto dir = run_directory("hilbert", cfg);
  write_json(dir / "config.json", cfg);
  write_json(dir / "contraction.json", to_json(rep));
  {
    CsvWriter csv(dir / "distance.csv", {"pair", "t", "d"});
    for (std::size_t p = 0; p < rep.series.size(); ++p)
      for (std::size_t k = 0; k < rep.series[p].t.size(); ++k)
        csv.row({static_cast<double>(p), rep.series[p].t[k], rep.series[p].d[k]});
  }
  write_metadata(dir, "hilbert");
  err << "contraction: rate " << rep.fitted_rate << ", r^2 " << rep.r_squared
      << (rep.contraction_asserted ? " (asserted)" : " (not asserted)") << "\n";
  out << dir.string() << "\n";
  if (rep.pairs_requested > 0 && rep.pairs_discarded == rep.pairs_requested) return kInconclusive;
  return rep.contraction_asserted ? kPass : kFail;
}

inline int cmd_attractor(const json& cfg, std::ostream& out, std::ostream& err) {
  const auto b = resolve_model(cfg);
  const auto region = resolve_region(cfg, b);
  const std::string kind = get_or<std::string>(cfg, "kind", b.name == "kuramoto" ? "kuramoto" : "bistable");
  const auto seed = get_or<std::uint64_t>(cfg, "seed", 1);
  AttractorReport rep;
  if (kind == "bistable") {
    BistableOptions o;
    o.seed = seed;
    o.h = get_or(cfg, "h", o.h);
    o.check = check_options(cfg);
    o.check.record_samples = false;
    rep = detect_bistable_convergence(b.model, resolve_cone(cfg, b), region, get_or(cfg, "n_ic", 500),
                                      get_or(cfg, "T", 50.0), o);
  } else if (kind == "limit_cycle") {
    LimitCycleOptions o;
    o.seed = seed;
    o.h = get_or(cfg, "h", o.h);
    o.check = check_options(cfg);
    o.check.record_samples = false;
    rep = detect_limit_cycle(b.model, resolve_cone(cfg, b), region, get_or(cfg, "T", 100.0), o);
  } else if (kind == "kuramoto") {
    if (b.name != "kuramoto") throw ConfigError("attractor kind 'kuramoto' needs the kuramoto model");
    SyncOptions o;
    o.seed = seed;
    o.h = get_or(cfg, "h", o.h);
    o.n_ic = get_or(cfg, "n_ic", o.n_ic);
    o.check = check_options(cfg);
    o.check.record_samples = false;
    rep = kuramoto_sync_analysis(b.model.dim, region, get_or(cfg, "lambda", 1.0), get_or(cfg, "T", 50.0), o);
  } else {
    throw ConfigError("unknown attractor kind '" + kind + "'");
  }
  const auto dir = run_directory("attractor", cfg);
  write_json(dir / "config.json", cfg);
  write_json(dir / "attractor.json", to_json(rep));
  if (rep.cycle) {
    const int n = b.model.dim;
    auto header = std::vector<std::string>{"k"};
    for (auto& s : indexed("x_", n)) header.push_back(s);
    CsvWriter csv(dir / "orbit.csv", header);
    for (std::size_t k = 0; k < rep.cycle->orbit.size(); ++k) {
      std::vector<double> row{static_cast<double>(k)};
      for (double v : to_std(rep.cycle->orbit[k])) row.push_back(v);
      csv.row(row);
    }
  }
  if (!rep.spread_series.empty()) {
    CsvWriter csv(dir / "spread.csv", {"ic", "t", "spread"});
    for (std::size_t i = 0; i < rep.spread_series.size(); ++i)
      for (const auto& [t, s] : rep.spread_series[i]) csv.row({static_cast<double>(i), t, s});
  }
  write_metadata(dir, "attractor");
  err << "attractor: " << to_string(rep.kind) << " (basin fraction " << rep.basin_fraction << ")\n";
  out << dir.string() << "\n";
  return rep.kind == AttractorKind::Undetermined ? kInconclusive : kPass;
}

inline int cmd_list_models(std::ostream& out) {
  for (const auto& m : list_models()) out << m.name << "\t" << m.description << "\t" << m.defaults.dump() << "\n";
  return kPass;
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

struct Flags {
  std::string config_file;
  std::string model, cone, region, check, kind, output, ics, dx0;
  std::vector<std::string> params;
  std::optional<int> theorem, directions, density, n_pairs, n_ic, n_curves;
  std::optional<double> T, h, eps, lambda, strict_margin, tol, max_arclen;
  std::optional<std::uint64_t> seed;
  bool prolonged = false, assume_invariant = false;
};

inline void add_common(CLI::App* app, Flags& f) {
  app->add_option("--config", f.config_file, "JSON config file; flags override its values");
  app->add_option("--model", f.model, "registry name (see list-models)");
  app->add_option("--param", f.params, "model parameter KEY=VALUE (repeatable)");
  app->add_option("--region", f.region, "region as inline JSON");
  app->add_option("--T", f.T, "horizon");
  app->add_option("--h", f.h, "RK4 step");
  app->add_option("--seed", f.seed, "random seed");
  app->add_option("--density", f.density, "grid points per axis");
  app->add_option("--output", f.output, "output root (default $" + std::string(kOutputRootEnv) + ")");
}

inline json merge_flags(json cfg, const Flags& f) {
  if (!f.model.empty()) cfg["model"] = f.model;
  for (const auto& p : f.params) {
    const auto eq = p.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--param expects KEY=VALUE, got '" + p + "'");
    if (!cfg.contains("params")) cfg["params"] = json::object();
    cfg["params"][p.substr(0, eq)] = parse_scalar(p.substr(eq + 1));
  }
  auto inline_json = [](const std::string& text, const char* name) {
    try {
      return json::parse(text);
    } catch (const json::parse_error& e) {
      throw ConfigError(std::string("--") + name + ": " + e.what());
    }
  };
  if (!f.cone.empty()) cfg["cone"] = f.cone.front() == '{' ? inline_json(f.cone, "cone") : json(f.cone);
  if (!f.region.empty()) cfg["region"] = f.region == "default" ? json("default") : inline_json(f.region, "region");
  if (!f.check.empty()) cfg["check"] = f.check;
  if (!f.kind.empty()) cfg["kind"] = f.kind;
  if (!f.output.empty()) cfg["output"] = f.output;
  if (!f.ics.empty()) cfg["ics"] = inline_json(f.ics, "ics");
  if (!f.dx0.empty()) cfg["dx0"] = inline_json(f.dx0, "dx0");
  if (f.theorem) cfg["theorem"] = *f.theorem;
  if (f.directions) cfg["directions"] = *f.directions;
  if (f.density) cfg["density"] = *f.density;
  if (f.n_pairs) cfg["n_pairs"] = *f.n_pairs;
  if (f.n_ic) cfg["n_ic"] = *f.n_ic;
  if (f.n_curves) cfg["n_curves"] = *f.n_curves;
  if (f.T) cfg["T"] = *f.T;
  if (f.h) cfg["h"] = *f.h;
  if (f.eps) cfg["eps"] = *f.eps;
  if (f.lambda) cfg["lambda"] = *f.lambda;
  if (f.strict_margin) cfg["strict_margin"] = *f.strict_margin;
  if (f.tol) cfg["tol"] = *f.tol;
  if (f.max_arclen) cfg["max_arclen"] = *f.max_arclen;
  if (f.seed) cfg["seed"] = *f.seed;
  if (f.prolonged) cfg["prolonged"] = true;
  if (f.assume_invariant) cfg["assume_forward_invariant"] = true;
  return cfg;
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"dpos: differential positivity checks, Hilbert contraction and attractor detection"};
  app.set_help_flag("--help", "print help");
  app.require_subcommand(1);
  Flags f;
  auto* check = app.add_subcommand("check", "pointwise and trajectory-level cone checks");
  add_common(check, f);
  check->add_option("--cone", f.cone, "cone name or inline JSON {kind, rows}");
  check->add_option("--theorem", f.theorem, "1, 2 or 3");
  check->add_option("--check", f.check, "theorem1|theorem2|theorem3|invariance|forward_invariance|conal_exit");
  check->add_option("--eps", f.eps, "band width for theorem 2");
  check->add_option("--directions", f.directions, "boundary directions per constraint");
  check->add_option("--strict-margin", f.strict_margin, "strict threshold for theorem 3");
  check->add_option("--tol", f.tol, "non-strict tolerance");
  check->add_option("--pairs", f.n_pairs, "trajectories for the invariance check");
  check->add_option("--curves", f.n_curves, "conal curves");
  check->add_option("--max-arclen", f.max_arclen, "conal curve budget");
  check->add_flag("--assume-invariant", f.assume_invariant, "skip the forward-invariance screen");
  auto* sim = app.add_subcommand("simulate", "integrate trajectories to CSV");
  add_common(sim, f);
  sim->add_option("--cone", f.cone, "cone used for the default tangent");
  sim->add_option("--ics", f.ics, "initial conditions as a JSON array of arrays");
  sim->add_option("--n-ic", f.n_ic, "random initial conditions when --ics is absent");
  sim->add_option("--dx0", f.dx0, "initial tangent (JSON array)");
  sim->add_flag("--prolonged", f.prolonged, "also integrate the variational equation");
  auto* hil = app.add_subcommand("hilbert", "Hilbert-metric contraction along the variational flow");
  add_common(hil, f);
  hil->add_option("--cone", f.cone, "cone name or inline JSON");
  hil->add_option("--pairs", f.n_pairs, "tangent pairs");
  auto* att = app.add_subcommand("attractor", "fixed-point, limit-cycle or synchronization detection");
  add_common(att, f);
  att->add_option("--cone", f.cone, "cone name or inline JSON");
  att->add_option("--kind", f.kind, "bistable|limit_cycle|kuramoto");
  att->add_option("--n-ic", f.n_ic, "initial conditions");
  att->add_option("--lambda", f.lambda, "rho weight of the Kuramoto cone");
  att->add_option("--directions", f.directions, "boundary directions per constraint");
  att->add_flag("--assume-invariant", f.assume_invariant, "skip the forward-invariance screen");
  auto* lm = app.add_subcommand("list-models", "print the model registry");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  }
  if (lm->parsed()) return cmd_list_models(out);

  try {
    json cfg = f.config_file.empty() ? json::object() : load_config_file(f.config_file);
    validate_keys(cfg);
    cfg = merge_flags(std::move(cfg), f);
    validate_keys(cfg);
    if (check->parsed()) return cmd_check(cfg, out, err);
    if (sim->parsed()) return cmd_simulate(cfg, out, err);
    if (hil->parsed()) return cmd_hilbert(cfg, out, err);
    return cmd_attractor(cfg, out, err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const ConeConstructionError& e) {
    err << "config error: cone: " << e.what() << "\n";
    return kConfigError;
  } catch (const PreconditionError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const json::exception& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kFail;
  }
}

}  // namespace dpos::cli
