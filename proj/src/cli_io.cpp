#include "defect_cascade/cli_io.hpp"

#include "defect_cascade/cascade_amplitudes.hpp"
#include "defect_cascade/entanglement.hpp"
#include "defect_cascade/error.hpp"
#include "defect_cascade/units.hpp"

#include <CLI11.hpp>
#include <Eigen/Core>
#include <boost/version.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

namespace defect_cascade {

using nlohmann::json;
namespace fs = std::filesystem;

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

// ---------------------------------------------------------------- schema

// Collects every violation with its JSON path.
class Checker {
 public:
  std::vector<std::string> issues;

  void add(const std::string& path, const std::string& what) { issues.push_back(path + ": " + what); }

  // Rejects unknown keys; a key matching a unit-bearing key up to its suffix is a unit error.
  void keys(const json& obj, const std::string& path, const std::vector<std::string>& allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      const std::string& k = it.key();
      if (std::find(allowed.begin(), allowed.end(), k) != allowed.end()) continue;
      std::string hint;
      for (const auto& a : allowed) {
        const auto pos = a.rfind('_');
        if (pos == std::string::npos || !is_unit(a.substr(pos + 1))) continue;
        const std::string stem = a.substr(0, pos);
        if (k == stem || k.rfind(stem + "_", 0) == 0) hint = a;
      }
      if (!hint.empty())
        add(join(path, k), "missing or wrong unit suffix (expected " + hint + ")");
      else
        add(join(path, k), "unknown key");
    }
  }

  std::optional<double> number(const json& obj, const std::string& path, const std::string& key, bool required) {
    if (!obj.contains(key)) {
      if (required) add(join(path, key), "missing required key");
      return std::nullopt;
    }
    const json& v = obj.at(key);
    if (!v.is_number()) {
      add(join(path, key), "must be a number");
      return std::nullopt;
    }
    const double d = v.get<double>();
    if (!std::isfinite(d)) {
      add(join(path, key), "must be finite");
      return std::nullopt;
    }
    return d;
  }

  // Range check with the violated bound in the message.
  void range(const std::optional<double>& v, const std::string& where, const char* op, double bound) {
    if (!v) return;
    const std::string o = op;
    const bool ok = o == ">" ? *v > bound : o == ">=" ? *v >= bound : o == "<" ? *v < bound : *v <= bound;
    if (!ok) add(where, "out of range, must be " + o + " " + format_double(bound) + " (got " + format_double(*v) + ")");
  }

  static std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }

 private:
  static bool is_unit(const std::string& s) {
    static const std::set<std::string> u = {"eV", "ueV", "nm", "eA"};
    return u.count(s) > 0;
  }
};

const json* section(const json& root, const std::string& key, Checker& ck, bool required) {
  if (!root.contains(key)) {
    if (required) ck.add(key, "missing required section");
    return nullptr;
  }
  const json& s = root.at(key);
  if (!s.is_object()) {
    ck.add(key, "must be an object");
    return nullptr;
  }
  return &s;
}

std::optional<std::complex<double>> amplitude(const json& obj, const std::string& path, const std::string& key,
                                              Checker& ck) {
  if (!obj.contains(key)) return std::nullopt;
  const json& v = obj.at(key);
  if (v.is_number()) return std::complex<double>(v.get<double>(), 0.0);
  if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number())
    return std::complex<double>(v[0].get<double>(), v[1].get<double>());
  ck.add(Checker::join(path, key), "must be a number or [re, im]");
  return std::nullopt;
}

std::optional<int> integer(const json& obj, const std::string& path, const std::string& key, Checker& ck,
                           int min_value) {
  if (!obj.contains(key)) return std::nullopt;
  const json& v = obj.at(key);
  if (!v.is_number_integer()) {
    ck.add(Checker::join(path, key), "must be an integer");
    return std::nullopt;
  }
  const auto i = v.get<long long>();
  if (i < min_value) {
    ck.add(Checker::join(path, key), "out of range, must be >= " + std::to_string(min_value) + " (got " +
                                         std::to_string(i) + ")");
    return std::nullopt;
  }
  return static_cast<int>(i);
}

std::optional<bool> boolean(const json& obj, const std::string& path, const std::string& key, Checker& ck) {
  if (!obj.contains(key)) return std::nullopt;
  if (!obj.at(key).is_boolean()) {
    ck.add(Checker::join(path, key), "must be true or false");
    return std::nullopt;
  }
  return obj.at(key).get<bool>();
}

void parse_physical(const json* phys, PhysicalParams& p, Checker& ck) {
  const std::string P = "physical";
  static const char* required[] = {"d_x_eA", "d_y_eA", "separation_nm", "epsilon_r", "gamma_ref_ueV"};
  if (!phys) {
    for (const char* k : required) ck.add(P + "." + k, "missing required key");
    ck.add(P, "missing energy anchor: omega_yS_eV + omega_xS_offset_ueV, or omega_x_eV + omega_y_eV");
    return;
  }
  const json& o = *phys;
  ck.keys(o, P,
          {"omega_x_eV", "omega_y_eV", "omega_yS_eV", "omega_xS_offset_ueV", "d_x_eA", "d_y_eA", "separation_nm",
           "epsilon_r", "axis", "gamma_ref_ueV"});
  const auto dx = ck.number(o, P, "d_x_eA", true), dy = ck.number(o, P, "d_y_eA", true);
  const auto sep = ck.number(o, P, "separation_nm", true), eps = ck.number(o, P, "epsilon_r", true);
  const auto gam = ck.number(o, P, "gamma_ref_ueV", true);
  ck.range(dx, P + ".d_x_eA", ">=", 0);
  ck.range(dy, P + ".d_y_eA", ">=", 0);
  ck.range(sep, P + ".separation_nm", ">", 0);
  ck.range(eps, P + ".epsilon_r", ">=", 1);
  ck.range(gam, P + ".gamma_ref_ueV", ">", 0);
  if (dx) p.d_x_eA = *dx;
  if (dy) p.d_y_eA = *dy;
  if (sep) p.separation_nm = *sep;
  if (eps) p.epsilon_r = *eps;
  if (gam) p.gamma_ref_ueV = *gam;

  const bool sym = o.contains("omega_yS_eV") || o.contains("omega_xS_offset_ueV");
  const bool bare = o.contains("omega_x_eV") || o.contains("omega_y_eV");
  if (sym && bare) {
    ck.add(P, "give either omega_yS_eV + omega_xS_offset_ueV or omega_x_eV + omega_y_eV, not both");
  } else if (bare) {
    const auto wx = ck.number(o, P, "omega_x_eV", true), wy = ck.number(o, P, "omega_y_eV", true);
    ck.range(wx, P + ".omega_x_eV", ">", 0);
    ck.range(wy, P + ".omega_y_eV", ">", 0);
    p.anchor.mode = EnergyAnchor::Mode::bare;
    if (wx) p.anchor.omega_x_eV = *wx;
    if (wy) p.anchor.omega_y_eV = *wy;
  } else if (sym) {
    const auto wys = ck.number(o, P, "omega_yS_eV", true), off = ck.number(o, P, "omega_xS_offset_ueV", true);
    ck.range(wys, P + ".omega_yS_eV", ">", 0);
    p.anchor.mode = EnergyAnchor::Mode::symmetric;
    if (wys) p.anchor.omega_yS_eV = *wys;
    if (off) p.anchor.omega_xS_offset_ueV = *off;
  } else {
    ck.add(P, "missing energy anchor: omega_yS_eV + omega_xS_offset_ueV, or omega_x_eV + omega_y_eV");
  }

  if (o.contains("axis")) {
    const json& a = o.at("axis");
    if (!a.is_array() || a.size() != 3 || !a[0].is_number() || !a[1].is_number() || !a[2].is_number()) {
      ck.add(P + ".axis", "must be an array of three numbers");
    } else {
      Eigen::Vector3d n(a[0].get<double>(), a[1].get<double>(), a[2].get<double>());
      if (!n.allFinite() || !(n.norm() > 0))
        ck.add(P + ".axis", "must be a nonzero finite vector");
      else
        p.axis = n / n.norm();
    }
  }
}

std::vector<double> parse_range(const json& r, const std::string& path, Checker& ck) {
  if (!r.is_object()) {
    ck.add(path, "must be an object {start, stop, count}");
    return {};
  }
  ck.keys(r, path, {"start", "stop", "count"});
  const auto a = ck.number(r, path, "start", true), b = ck.number(r, path, "stop", true);
  const auto n = integer(r, path, "count", ck, 1);
  if (!r.contains("count")) ck.add(path + ".count", "missing required key");
  if (!a || !b || !n) return {};
  std::vector<double> v(*n);
  for (int i = 0; i < *n; ++i) v[i] = *n == 1 ? *a : *a + (*b - *a) * i / (*n - 1);
  return v;
}

void parse_sweep(const json& s, RunConfig& cfg, Checker& ck) {
  const std::string P = "run.sweep";
  ck.keys(s, P, {"parameter", "values", "range", "splitting_range_ueV", "auto_center", "operating_point"});
  SweepOptions o;
  if (!s.contains("parameter") || !s.at("parameter").is_string()) {
    ck.add(P + ".parameter", "missing required key (one of d_x_eA, omega_xS_offset_ueV, separation_nm, gamma_ref_ueV)");
  } else if (auto p = parameter_from_key(s.at("parameter").get<std::string>())) {
    o.parameter = *p;
  } else {
    ck.add(P + ".parameter", "unknown sweep parameter '" + s.at("parameter").get<std::string>() + "'");
  }
  const int given = int(s.contains("values")) + int(s.contains("range")) + int(s.contains("splitting_range_ueV"));
  if (given != 1) ck.add(P, "give exactly one of values, range, splitting_range_ueV");
  if (s.contains("values")) {
    const json& v = s.at("values");
    if (!v.is_array() || v.empty()) {
      ck.add(P + ".values", "must be a non-empty array of numbers");
    } else {
      for (const auto& x : v) {
        if (!x.is_number() || !std::isfinite(x.get<double>())) {
          ck.add(P + ".values", "entries must be finite numbers");
          break;
        }
        o.values.push_back(x.get<double>());
      }
    }
  }
  if (s.contains("range")) o.values = parse_range(s.at("range"), P + ".range", ck);
  if (s.contains("splitting_range_ueV")) {
    if (o.parameter != SweepParameter::d_x) ck.add(P + ".splitting_range_ueV", "only valid with parameter d_x_eA");
    for (double split : parse_range(s.at("splitting_range_ueV"), P + ".splitting_range_ueV", ck)) {
      try {
        o.values.push_back(d_x_for_splitting(cfg.physical, split));
      } catch (const std::exception& e) {
        ck.add(P + ".splitting_range_ueV", e.what());
        break;
      }
    }
  }
  if (auto b = boolean(s, P, "auto_center", ck)) o.auto_center = *b;
  if (s.contains("operating_point")) {
    const json& op = s.at("operating_point");
    const std::string Q = P + ".operating_point";
    if (!op.is_object()) {
      ck.add(Q, "must be an object");
    } else {
      ck.keys(op, Q, {"eta_min", "f_min", "d_x_range_eA", "scan_points"});
      OperatingPointOptions opo;
      if (auto v = ck.number(op, Q, "eta_min", false)) opo.eta_min = *v;
      if (auto v = ck.number(op, Q, "f_min", false)) opo.f_min = *v;
      if (auto v = integer(op, Q, "scan_points", ck, 3)) opo.scan_points = *v;
      if (op.contains("d_x_range_eA")) {
        const json& r = op.at("d_x_range_eA");
        if (!r.is_array() || r.size() != 2 || !r[0].is_number() || !r[1].is_number() ||
            !(r[0].get<double>() > 0) || !(r[1].get<double>() > r[0].get<double>()))
          ck.add(Q + ".d_x_range_eA", "must be [lo, hi] with 0 < lo < hi");
        else
          opo.d_x_lo = r[0].get<double>(), opo.d_x_hi = r[1].get<double>();
      }
      o.operating_point = opo;
    }
  }
  cfg.sweep = o;
}

void parse_pump(const json& s, RunConfig& cfg, Checker& ck) {
  const std::string P = "run.pump";
  ck.keys(s, P, {"delta_ueV", "E_x_ueV", "E_y_ueV", "route", "duration_tau", "n_samples"});
  auto& d = cfg.pump.drive;
  const auto delta = ck.number(s, P, "delta_ueV", false);
  if (delta && *delta == 0) ck.add(P + ".delta_ueV", "out of range, must be nonzero");
  if (delta) d.delta_ueV = *delta;
  if (auto e = amplitude(s, P, "E_x_ueV", ck)) d.E_x_ueV = *e;
  if (auto e = amplitude(s, P, "E_y_ueV", ck)) d.E_y_ueV = *e;
  if (s.contains("route")) {
    const json& r = s.at("route");
    if (r == "x_S")
      d.route = DriveParams::Route::x_S;
    else if (r == "y_S")
      d.route = DriveParams::Route::y_S;
    else
      ck.add(P + ".route", "must be \"x_S\" or \"y_S\"");
  }
  const auto dur = ck.number(s, P, "duration_tau", false);
  ck.range(dur, P + ".duration_tau", ">", 0);
  if (dur) cfg.pump.duration_tau = *dur;
  if (auto n = integer(s, P, "n_samples", ck, 2)) cfg.pump.n_samples = *n;
}

void parse_validate(const json& s, RunConfig& cfg, Checker& ck) {
  const std::string P = "run.validate";
  ck.keys(s, P, {"oracle", "t_end_gamma", "recurrence_fraction", "tolerance"});
  auto& v = cfg.validate;
  if (s.contains("oracle")) {
    const json& o = s.at("oracle");
    if (o == "markov")
      v.oracle = ValidateOptions::Oracle::markov;
    else if (o == "unitary")
      v.oracle = ValidateOptions::Oracle::unitary;
    else
      ck.add(P + ".oracle", "must be \"markov\" or \"unitary\"");
  }
  const auto t = ck.number(s, P, "t_end_gamma", false), f = ck.number(s, P, "recurrence_fraction", false);
  const auto tol = ck.number(s, P, "tolerance", false);
  ck.range(t, P + ".t_end_gamma", ">", 0);
  ck.range(f, P + ".recurrence_fraction", ">", 0);
  ck.range(f, P + ".recurrence_fraction", "<=", 1);
  ck.range(tol, P + ".tolerance", ">", 0);
  if (t) v.t_end_gamma = *t;
  if (f) v.recurrence_fraction = *f;
  if (tol) v.tolerance = *tol;
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError({std::string("invalid JSON: ") + e.what()});
  }
  if (!root.is_object()) throw ConfigError({"config must be a JSON object"});
  Checker ck;
  RunConfig cfg;
  ck.keys(root, "", {"physical", "grid", "run", "output"});

  parse_physical(section(root, "physical", ck, false), cfg.physical, ck);
  const bool physical_ok = ck.issues.empty();

  if (const json* g = section(root, "grid", ck, false)) {
    ck.keys(*g, "grid", {"n_points", "margin_gamma", "half_width_ueV"});
    if (auto n = integer(*g, "grid", "n_points", ck, 3)) cfg.grid.n_points = *n;
    const auto m = ck.number(*g, "grid", "margin_gamma", false), h = ck.number(*g, "grid", "half_width_ueV", false);
    ck.range(m, "grid.margin_gamma", ">", 0);
    ck.range(h, "grid.half_width_ueV", ">", 0);
    if (m) cfg.grid.margin_gamma = *m;
    if (h) cfg.grid.half_width_ueV = *h;
  }
  if (const json* r = section(root, "run", ck, false)) {
    ck.keys(*r, "run", {"sweep", "pump", "validate"});
    auto sub = [&](const char* key, auto&& fn) {
      if (!r->contains(key)) return;
      if (!r->at(key).is_object())
        ck.add(std::string("run.") + key, "must be an object");
      else
        fn(r->at(key));
    };
    sub("sweep", [&](const json& s) {
      if (physical_ok)
        parse_sweep(s, cfg, ck);
      else if (s.contains("splitting_range_ueV"))
        ck.add("run.sweep.splitting_range_ueV", "needs a valid physical section");
      else
        parse_sweep(s, cfg, ck);
    });
    sub("pump", [&](const json& s) { parse_pump(s, cfg, ck); });
    sub("validate", [&](const json& s) { parse_validate(s, cfg, ck); });
  }
  if (const json* o = section(root, "output", ck, false)) {
    ck.keys(*o, "output", {"directory", "formats"});
    if (o->contains("directory")) {
      if (!o->at("directory").is_string() || o->at("directory").get<std::string>().empty())
        ck.add("output.directory", "must be a non-empty string");
      else
        cfg.output.directory = o->at("directory").get<std::string>();
    }
    if (o->contains("formats")) {
      const json& f = o->at("formats");
      cfg.output.csv = cfg.output.json = false;
      if (!f.is_array()) ck.add("output.formats", "must be an array of \"csv\" / \"json\"");
      else
        for (const auto& x : f) {
          if (x == "csv") cfg.output.csv = true;
          else if (x == "json") cfg.output.json = true;
          else ck.add("output.formats", "unknown format " + x.dump());
        }
    }
  }

  if (physical_ok && ck.issues.empty()) {
    for (const auto& issue : config_issues(cfg.physical.resolve())) ck.add("physical", issue);
  }
  if (!ck.issues.empty()) throw ConfigError(ck.issues);
  cfg.canonical = root.dump();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError({"cannot read config file '" + path + "'"});
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

// ---------------------------------------------------------------- output

namespace {

class Artifacts {
 public:
  explicit Artifacts(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

  std::ofstream open(const std::string& name) {
    std::ofstream f(dir_ / name, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + (dir_ / name).string());
    files_.push_back(name);
    return f;
  }
  void write_json(const std::string& name, const json& j) { open(name) << j.dump(2) << "\n"; }
  const std::vector<std::string>& files() const { return files_; }
  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
  std::vector<std::string> files_;
};

std::string hex64(std::uint64_t h) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json cascade_json(const CoupledSystem& sys) {
  const auto& f = sys.cascade;
  return {{"omega_X1_eV", f.omega_X1},
          {"omega_X2_eV", f.omega_X2},
          {"omega_Y1_eV", f.omega_Y1},
          {"omega_Y2_eV", f.omega_Y2},
          {"omega_xyS_eV", f.omega_xyS},
          {"splitting_ueV", units::to_ueV(f.omega_Y2 - f.omega_Y1)},
          {"J_ueV", {{"xx", sys.J.J_xx}, {"yy", sys.J.J_yy}, {"xy", sys.J.J_xy}, {"yx", sys.J.J_yx}}},
          {"rates_ueV",
           {{"g_xS", sys.rates.gamma_g_xS},
            {"g_yS", sys.rates.gamma_g_yS},
            {"xS_xyS", sys.rates.gamma_xS_xyS},
            {"yS_xyS", sys.rates.gamma_yS_xyS}}}};
}

json row_json(const SweepRow& r) {
  json j = {{"value", r.value},       {"splitting_ueV", r.splitting_ueV}, {"S_bits", r.S_bits},
            {"eta", r.eta},           {"fidelity", r.fidelity},           {"lambdas", r.lambda_head},
            {"coverage_ok", r.coverage_ok}, {"ok", r.ok}};
  if (!r.ok) j["error"] = r.error;
  return j;
}

void warn_all(std::ostream& log, const std::vector<std::string>& w) {
  for (const auto& s : w) log << "warning: " << s << "\n";
}

int cmd_spectra(const RunConfig& cfg, const GridPolicy& gp, Artifacts& out, std::ostream& log, json& summary) {
  const CoupledSystem sys = build_system(cfg.physical.resolve());
  warn_all(log, config_warnings(sys.config));
  const FrequencyGrid grid = auto_grid(sys, gp);
  const AmplitudeGrid amps = amplitude_grid(sys, grid, true, 1.0, gp.margin_gamma);
  if (!amps.coverage.ok) {
    log << "error: " << amps.coverage.message << "; refusing to emit spectra\n";
    return kNumericError;
  }
  const SpectraResult s = spectra(amps);
  if (cfg.output.csv) {
    auto fx = out.open("spectra_x.csv");
    fx << "omega_eV,N_X\n";
    for (int j = 0; j < grid.n(); ++j) fx << format_double(grid.x_axis(j)) << "," << format_double(s.N_X(j)) << "\n";
    auto fy = out.open("spectra_y.csv");
    fy << "omega_eV,N_Y\n";
    for (int k = 0; k < grid.n(); ++k) fy << format_double(grid.y_axis(k)) << "," << format_double(s.N_Y(k)) << "\n";
    auto fxy = out.open("cross_correlation.csv");
    fxy << "omega_x_eV,omega_y_eV,N_XY\n";
    for (int j = 0; j < grid.n(); ++j)
      for (int k = 0; k < grid.n(); ++k)
        fxy << format_double(grid.x_axis(j)) << "," << format_double(grid.y_axis(k)) << ","
            << format_double(s.N_XY(j, k)) << "\n";
  }
  json maxima = json::array();
  for (const auto& m : joint_maxima(s.N_XY)) {
    maxima.push_back({{"omega_x_eV", grid.x_axis(m.j)}, {"omega_y_eV", grid.y_axis(m.k)}, {"N_XY", m.value}});
    if (maxima.size() == 4) break;
  }
  summary = {{"peaks_X_eV", s.peaks_X},
             {"peaks_Y_eV", s.peaks_Y},
             {"joint_maxima", maxima},
             {"cascade", cascade_json(sys)},
             {"grid", {{"n_points", grid.n()}, {"delta_eV", grid.delta}}},
             {"coverage_margin_gamma", amps.coverage.min_margin_gamma}};
  if (cfg.output.json) out.write_json("peaks.json", summary);
  return kOk;
}

int cmd_schmidt(const RunConfig& cfg, const GridPolicy& gp, Artifacts& out, std::ostream& log, json& summary) {
  const CoupledSystem sys = build_system(cfg.physical.resolve());
  warn_all(log, config_warnings(sys.config));
  const AmplitudeGrid amps = amplitude_grid(sys, auto_grid(sys, gp), true, 1.0, gp.margin_gamma);
  if (!amps.coverage.ok) log << "warning: " << amps.coverage.message << "\n";
  const SchmidtSpectrum sp = schmidt_decompose(amps.c);
  const EntanglementMetrics m = entanglement_metrics(sp);
  summary = {{"S_bits", m.S_bits}, {"eta", m.eta}, {"fidelity", m.fidelity}, {"lambdas", m.lambda_head}};
  if (cfg.output.json) out.write_json("metrics.json", summary);
  if (cfg.output.csv) {
    auto f = out.open("lambdas.csv");
    f << "n,lambda\n";
    for (Eigen::Index i = 0; i < sp.lambdas.size(); ++i) f << i << "," << format_double(sp.lambdas(i)) << "\n";
  }
  return kOk;
}

int cmd_sweep(const RunConfig& cfg, const GridPolicy& gp, Artifacts& out, std::ostream& log, json& summary) {
  if (!cfg.sweep) throw ConfigError({"run.sweep: missing required section for the sweep subcommand"});
  const SweepOptions& so = *cfg.sweep;
  SweepSpec spec;
  spec.parameter = so.parameter;
  spec.values = so.values;
  spec.base = cfg.physical;
  spec.grid = gp;
  spec.auto_center = so.auto_center;
  const SweepResult res = run_sweep(spec);

  if (cfg.output.csv) {
    auto f = out.open("sweep.csv");
    f << parameter_key(res.parameter) << ",splitting_ueV,splitting_x_ueV,S_bits,eta,fidelity";
    for (std::size_t i = 0; i < kLambdaHead; ++i) f << ",lambda_" << i;
    f << ",coverage_ok,ok,error\n";
    for (const auto& r : res.rows) {
      f << format_double(r.value) << "," << format_double(r.splitting_ueV) << "," << format_double(r.splitting_x_ueV)
        << "," << format_double(r.S_bits) << "," << format_double(r.eta) << "," << format_double(r.fidelity);
      for (double l : r.lambda_head) f << "," << format_double(l);
      std::string err = r.error;
      std::replace(err.begin(), err.end(), '"', '\'');
      f << "," << int(r.coverage_ok) << "," << int(r.ok) << ",\"" << err << "\"\n";
    }
  }
  std::size_t failed = 0;
  const SweepRow *s_min = nullptr, *f_min = nullptr, *eta_max = nullptr, *f_max = nullptr;
  for (const auto& r : res.rows) {
    if (!r.ok) {
      ++failed;
      log << "warning: point " << format_double(r.value) << " failed: " << r.error << "\n";
      continue;
    }
    if (!s_min || r.S_bits < s_min->S_bits) s_min = &r;
    if (!f_min || r.fidelity < f_min->fidelity) f_min = &r;
    if (!f_max || r.fidelity > f_max->fidelity) f_max = &r;
    if (!eta_max || r.eta > eta_max->eta) eta_max = &r;
  }
  summary = {{"parameter", parameter_key(res.parameter)},
             {"points", res.rows.size()},
             {"failed", failed},
             {"grid", {{"n_points", gp.n_points}, {"margin_gamma", gp.margin_gamma}, {"half_width_ueV", gp.half_width_ueV}}},
             {"auto_center", res.auto_center}};
  json ext = json::object();
  if (s_min) ext["S_min"] = row_json(*s_min);
  if (f_min) ext["fidelity_min"] = row_json(*f_min);
  if (f_max) ext["fidelity_max"] = row_json(*f_max);
  if (eta_max) ext["eta_max"] = row_json(*eta_max);
  summary["extrema"] = ext;

  if (so.operating_point) {
    OperatingPointOptions o = *so.operating_point;
    if (o.d_x_lo <= 0 || o.d_x_hi <= 0) {
      const double dx0 = d_x_for_splitting(cfg.physical, 0.0);
      o.d_x_lo = 0.9 * dx0;
      o.d_x_hi = std::max(cfg.physical.d_x_eA, 1.1 * dx0);
    }
    const OperatingPoint op = find_operating_point(cfg.physical, o.eta_min, o.f_min, o.d_x_lo, o.d_x_hi, gp, o.scan_points);
    json scan = json::array();
    for (const auto& r : op.scan) scan.push_back(row_json(r));
    summary["operating_point"] = {{"feasible", op.feasible}, {"message", op.message}, {"eta_min", o.eta_min},
                                  {"f_min", o.f_min},       {"best", row_json(op.best)}, {"scan", scan}};
  }
  if (cfg.output.json) out.write_json("sweep.json", summary);
  return failed == res.rows.size() ? kNumericError : kOk;
}

int cmd_pump(const RunConfig& cfg, Artifacts& out, std::ostream& log, json& summary) {
  const CoupledSystem sys = build_system(cfg.physical.resolve());
  const auto& d = cfg.pump.drive;
  const EffectiveCoupling ec = effective_coupling(d.E_x_ueV, d.E_y_ueV, d.delta_ueV);
  if (!ec.finite) throw DomainError("g_eff = 0 (a drive amplitude is zero): tau_drive is infinite");
  const PumpTrajectory tr = integrate_pump(sys, d, cfg.pump.duration_tau * ec.tau_drive, cfg.pump.n_samples);
  warn_all(log, tr.warnings);
  const double g = std::abs(ec.g_eff_ueV);
  if (cfg.output.csv) {
    auto f = out.open("pump_trajectory.csv");
    f << "t_hbar_per_eV,P_g,P_xS,P_yS,P_xyS,norm,envelope\n";
    for (const auto& s : tr.samples)
      f << format_double(s.t) << "," << format_double(s.pop(PumpLevel::g)) << "," << format_double(s.pop(PumpLevel::x_S))
        << "," << format_double(s.pop(PumpLevel::y_S)) << "," << format_double(s.pop(PumpLevel::xy_S)) << ","
        << format_double(s.norm) << "," << format_double(std::pow(std::sin(g * time_to_per_ueV(s.t)), 2)) << "\n";
  }
  // Population at tau_drive: the sample nearest to it.
  const PumpSample* at_tau = &tr.samples.front();
  for (const auto& s : tr.samples)
    if (std::abs(s.t - ec.tau_drive) < std::abs(at_tau->t - ec.tau_drive)) at_tau = &s;
  summary = {{"g_eff_ueV", {ec.g_eff_ueV.real(), ec.g_eff_ueV.imag()}},
             {"tau_drive_hbar_per_eV", ec.tau_drive},
             {"adiabaticity", ec.adiabaticity},
             {"P_xyS_at_tau_drive", at_tau->pop(PumpLevel::xy_S)},
             {"max_envelope_deviation", envelope_deviation(tr)},
             {"route", d.route == DriveParams::Route::x_S ? "x_S" : "y_S"},
             {"warnings", tr.warnings}};
  if (cfg.output.json) out.write_json("pump.json", summary);
  return kOk;
}

int cmd_validate(const RunConfig& cfg, const GridPolicy& gp, Artifacts& out, std::ostream& log, json& summary) {
  const CoupledSystem sys = build_system(cfg.physical.resolve());
  const FrequencyGrid grid = auto_grid(sys, gp);
  const auto& v = cfg.validate;
  const bool markov = v.oracle == ValidateOptions::Oracle::markov;
  const double t_end = markov ? ueV_to_time(v.t_end_gamma / sys.rates.total())
                              : ueV_to_time(v.recurrence_fraction * 2 * std::numbers::pi / units::to_ueV(grid.delta));
  const CascadeRun run = markov ? integrate_cascade_markov(sys, grid, t_end) : integrate_cascade_unitary(sys, grid, t_end);
  const OracleComparison c = compare_with_closed_form(sys, grid, run.final);
  const double err = std::max(c.l2_error_abs, c.l2_error_complex);
  const bool pass = err < v.tolerance;
  summary = {{"oracle", markov ? "markov" : "unitary"},
             {"l2_error", err},
             {"l2_error_abs", c.l2_error_abs},
             {"l2_error_complex", c.l2_error_complex},
             {"tolerance", v.tolerance},
             {"pass", pass},
             {"n_points", grid.n()},
             {"t_end_hbar_per_eV", t_end},
             {"final_norm", run.final.norm2()},
             {"steps", run.steps}};
  if (cfg.output.json) out.write_json("validation.json", summary);
  if (!pass) log << "validation failed: l2 error " << err << " >= tolerance " << v.tolerance << "\n";
  return pass ? kOk : kValidationFailed;
}

}  // namespace

std::string usage() {
  return "usage: defect-cascade <subcommand> <config.json> [--out DIR] [--grid-points N] [--seedless]\n"
         "subcommands:\n"
         "  spectra   N_X, N_Y and N_XY on the frequency grid (CSV) plus located peaks\n"
         "  schmidt   Schmidt coefficients and S, eta, F\n"
         "  sweep     parameter sweep (run.sweep) with optional operating-point search\n"
         "  pump      driven four-level population transfer trajectory (run.pump)\n"
         "  validate  time-domain oracle against the closed-form amplitude (run.validate)\n"
         "exit codes: 0 ok, 1 config error, 2 numeric failure, 3 validation failure\n"
         "env: DEFECT_CASCADE_THREADS caps sweep worker threads\n";
}

int dispatch(const std::string& subcommand, const RunConfig& cfg, const DispatchOptions& opt, std::ostream& log) {
  if (std::find(std::begin(kSubcommands), std::end(kSubcommands), subcommand) == std::end(kSubcommands)) {
    log << "unknown subcommand '" << subcommand << "'\n" << usage();
    return kConfigError;
  }
  GridPolicy gp = cfg.grid;
  if (opt.grid_points) {
    if (*opt.grid_points < 3) {
      log << "config error: --grid-points must be >= 3\n";
      return kConfigError;
    }
    gp.n_points = *opt.grid_points;
  }
  try {
    Artifacts out(opt.out_dir.empty() ? fs::path(cfg.output.directory) : fs::path(opt.out_dir));
    json summary;
    int code = kOk;
    if (subcommand == "spectra") code = cmd_spectra(cfg, gp, out, log, summary);
    else if (subcommand == "schmidt") code = cmd_schmidt(cfg, gp, out, log, summary);
    else if (subcommand == "sweep") code = cmd_sweep(cfg, gp, out, log, summary);
    else if (subcommand == "pump") code = cmd_pump(cfg, out, log, summary);
    else code = cmd_validate(cfg, gp, out, log, summary);

    std::vector<std::string> files = out.files();
    json manifest = {{"tool", "defect-cascade"},
                     {"version", DEFECT_CASCADE_VERSION},
                     {"subcommand", subcommand},
                     {"config_hash", "fnv1a64:" + hex64(fnv1a64(cfg.canonical))},
                     {"grid_points", gp.n_points},
                     {"seedless", opt.seedless},
                     {"exit_code", code},
                     {"libraries",
                      {{"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                     std::to_string(EIGEN_MINOR_VERSION)},
                       {"boost", std::to_string(BOOST_VERSION / 100000) + "." + std::to_string(BOOST_VERSION / 100 % 1000) +
                                     "." + std::to_string(BOOST_VERSION % 100)},
                       {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                             std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                             std::to_string(NLOHMANN_JSON_VERSION_PATCH)}}},
                     {"files", files}};
    out.write_json("manifest.json", manifest);
    return code;
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const DomainError& e) {
    log << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    log << "numeric failure: " << e.what() << "\n";
    return kNumericError;
  }
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Entangled two-photon emission of dipole-coupled defect pairs", "defect-cascade"};
  std::string sub, config_path, out_dir;
  int grid_points = 0;
  bool seedless = false;
  app.add_option("subcommand", sub, "spectra | schmidt | sweep | pump | validate")->required();
  app.add_option("config", config_path, "JSON run configuration")->required();
  app.add_option("--out", out_dir, "output directory (overrides output.directory)");
  app.add_option("--grid-points", grid_points, "points per frequency axis (overrides grid.n_points)");
  app.add_flag("--seedless", seedless, "deterministic run without random seeding (all runs are seedless)");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << usage();
    return kOk;
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n" << usage();
    return kConfigError;
  }
  if (std::find(std::begin(kSubcommands), std::end(kSubcommands), sub) == std::end(kSubcommands)) {
    std::cerr << "unknown subcommand '" << sub << "'\n" << usage();
    return kConfigError;
  }
  RunConfig cfg;
  try {
    cfg = load_config(config_path);
  } catch (const ConfigError& e) {
    std::cerr << "config error:\n";
    for (const auto& i : e.issues()) std::cerr << "  " << i << "\n";
    return kConfigError;
  }
  DispatchOptions opt;
  opt.out_dir = out_dir;
  if (grid_points != 0) opt.grid_points = grid_points;
  opt.seedless = seedless;
  return dispatch(sub, cfg, opt, std::cerr);
}

}  // namespace defect_cascade
