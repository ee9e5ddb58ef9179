// Acceptance run: one [PASS]/[FAIL] line per criterion.
#include "defect_cascade/cascade_amplitudes.hpp"
#include "defect_cascade/cli_io.hpp"
#include "defect_cascade/dynamics_oracle.hpp"
#include "defect_cascade/entanglement.hpp"
#include "defect_cascade/physics_core.hpp"
#include "defect_cascade/sweep_engine.hpp"
#include "defect_cascade/units.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

using namespace defect_cascade;
namespace fs = std::filesystem;

namespace {

const std::string kConfigs = DEFECT_CASCADE_CONFIGS;

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Verdict {
  bool pass = true;
  std::ostringstream detail;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " !" << what;
    }
  }
};

int failures = 0;

void report(const char* id, const char* title, const std::function<void(Verdict&)>& body) {
  Verdict v;
  try {
    body(v);
  } catch (const std::exception& e) {
    v.pass = false;
    v.detail << " exception: " << e.what();
  }
  if (!v.pass) ++failures;
  std::cout << (v.pass ? "[PASS] " : "[FAIL] ") << id << " " << title << " |" << v.detail.str() << std::endl;
}

int nearest(const Eigen::VectorXd& axis, double w) {
  Eigen::Index i;
  (axis.array() - w).abs().minCoeff(&i);
  return int(i);
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

// AC1: spectra structure and joint maxima.
void fig2_structure(Verdict& v) {
  const RunConfig cfg = load_config(kConfigs + "/fig2.json");
  const auto t0 = Clock::now();
  const auto sys = build_system(cfg.physical.resolve());
  const auto amps = amplitude_grid(sys, auto_grid(sys, cfg.grid));
  const auto sp = spectra(amps);
  const auto mx = joint_maxima(sp.N_XY);
  const auto metrics = entanglement_metrics(schmidt_decompose(amps.c));
  const double elapsed = seconds_since(t0);
  (void)metrics;

  v.detail << " N=" << amps.grid.n() << " peaks_X=" << sp.peaks_X.size() << " peaks_Y=" << sp.peaks_Y.size();
  v.require(amps.grid.n() == 401, "grid is not N=401");
  v.require(sp.peaks_X.size() == 2 && sp.peaks_Y.size() == 2, "not exactly two peaks per spectrum");
  if (sp.peaks_X.size() == 2 && sp.peaks_Y.size() == 2) {
    const double sx = std::abs(sp.peaks_X[0] - sp.peaks_X[1]), sy = std::abs(sp.peaks_Y[0] - sp.peaks_Y[1]);
    v.detail << " split_x=" << units::to_ueV(sx) << "ueV split_y=" << units::to_ueV(sy) << "ueV";
    v.require(std::abs(sx - sy) < 0.01 * sy, "x and y splittings differ by >= 1%");
  }
  const auto& f = sys.cascade;
  const auto& g = amps.grid;
  const int jx1 = nearest(g.x_axis, f.omega_X1), jx2 = nearest(g.x_axis, f.omega_X2);
  const int ky1 = nearest(g.y_axis, f.omega_Y1), ky2 = nearest(g.y_axis, f.omega_Y2);
  auto at = [](const JointMaximum& m, int j, int k) { return std::abs(m.j - j) <= 1 && std::abs(m.k - k) <= 1; };
  v.require(mx.size() >= 2, "fewer than two joint maxima");
  if (mx.size() >= 2) {
    // The two pairings have equal height up to discretization, so their order is not asserted.
    const bool pairs = (at(mx[0], jx1, ky2) && at(mx[1], jx2, ky1)) || (at(mx[0], jx2, ky1) && at(mx[1], jx1, ky2));
    v.detail << " top2_rel_diff=" << std::abs(mx[0].value - mx[1].value) / mx[0].value;
    v.require(pairs, "top two joint maxima are not (X1,Y2) and (X2,Y1)");
    if (mx.size() > 2) v.require(mx[2].value < 0.1 * mx[1].value, "a third joint maximum competes with the pairings");
  }
  v.detail << " runtime=" << elapsed << "s";
  v.require(elapsed < 30, "runtime >= 30 s");
}

// AC2: metrics at the reference parameters.
void fig2_metrics(Verdict& v) {
  const RunConfig cfg = load_config(kConfigs + "/fig2.json");
  const auto sys = build_system(cfg.physical.resolve());
  const auto m = entanglement_metrics(schmidt_decompose(amplitude_grid(sys, auto_grid(sys, cfg.grid)).c));
  const double r01 = m.lambda_head[0] / m.lambda_head[1], r23 = m.lambda_head[2] / m.lambda_head[3];
  v.detail << " S=" << m.S_bits << " eta=" << m.eta << " F=" << m.fidelity << " l0/l1=" << r01 << " l2/l3=" << r23;
  v.require(m.fidelity > 0.95, "F <= 0.95");
  v.require(std::abs(m.eta - 0.69) <= 0.05, "eta outside 0.69 +/- 0.05");
  v.require(r01 >= 0.98 && r01 <= 1.02, "l0/l1 outside [0.98, 1.02]");
  v.require(r23 >= 0.95 && r23 <= 1.05, "l2/l3 outside [0.95, 1.05]");
}

// AC3: the degeneracy point in the zoomed d_x sweep.
void degeneracy_point(Verdict& v) {
  const RunConfig cfg = load_config(kConfigs + "/fig3-zoom.json");
  SweepSpec spec;
  spec.parameter = cfg.sweep->parameter;
  spec.values = cfg.sweep->values;
  spec.base = cfg.physical;
  spec.grid = cfg.grid;
  const auto res = run_sweep(spec);
  const auto& rows = res.rows;
  std::size_t s_min = 0, f_min = 0, eta_max = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    v.require(rows[i].ok, "sweep point failed: " + rows[i].error);
    if (rows[i].S_bits < rows[s_min].S_bits) s_min = i;
    if (rows[i].fidelity < rows[f_min].fidelity) f_min = i;
    if (rows[i].eta > rows[eta_max].eta) eta_max = i;
  }
  const auto& r = rows[s_min];
  const double step = std::abs(rows[1].splitting_ueV - rows[0].splitting_ueV);
  const double ratio = r.value / cfg.physical.d_y_eA;
  v.detail << " points=" << rows.size() << " S_min=" << r.S_bits << " at split=" << r.splitting_ueV
           << "ueV d_x/d_y=" << ratio << " F there=" << r.fidelity << " eta there=" << r.eta;
  v.require(s_min == f_min && s_min == eta_max, "S min, F min and eta max are at different points");
  v.require(s_min > 0 && s_min + 1 < rows.size(), "extremum at the sweep edge");
  if (s_min > 0 && s_min + 1 < rows.size()) {
    const auto &a = rows[s_min - 1], &b = rows[s_min + 1];
    v.require(r.S_bits < a.S_bits && r.S_bits < b.S_bits, "S not a strict local minimum");
    v.require(r.fidelity < a.fidelity && r.fidelity < b.fidelity, "F not a strict local minimum");
    v.require(r.eta > a.eta && r.eta > b.eta, "eta not a strict local maximum");
  }
  v.require(std::abs(r.splitting_ueV) <= 0.5 * step + 1e-9, "extremum not at zero splitting");
  v.require(std::abs(ratio - 1 / std::sqrt(2.0)) <= 0.01, "d_x/d_y not within 1/sqrt2 +/- 0.01");
  v.require(r.S_bits > 0, "residual S is not > 0");
}

// AC4: constrained operating point between the two reference points.
void operating_point(Verdict& v) {
  const RunConfig cfg = load_config(kConfigs + "/fig2.json");
  const auto& o = *cfg.sweep->operating_point;
  const double dx0 = d_x_for_splitting(cfg.physical, 0.0);
  const double lo = o.d_x_lo > 0 ? o.d_x_lo : 0.9 * dx0;
  const double hi = o.d_x_hi > 0 ? o.d_x_hi : std::max(cfg.physical.d_x_eA, 1.1 * dx0);
  const auto t0 = Clock::now();
  const auto op = find_operating_point(cfg.physical, o.eta_min, o.f_min, lo, hi, cfg.grid, o.scan_points);
  const double split_i = units::to_ueV(build_system(cfg.physical.resolve()).cascade.splitting());
  v.detail << " feasible=" << op.feasible << " d_x=" << op.best.value << " split=" << op.best.splitting_ueV
           << "ueV eta=" << op.best.eta << " F=" << op.best.fidelity << " evaluations=" << op.scan.size()
           << " runtime=" << seconds_since(t0) << "s";
  v.require(op.feasible, "search reports no feasible point: " + op.message);
  v.require(op.best.eta > 0.90, "eta <= 0.90");
  v.require(op.best.fidelity > 0.90, "F <= 0.90");
  v.require(op.best.splitting_ueV > 0 && op.best.splitting_ueV < split_i,
            "splitting not between the degeneracy point and the reference point");
}

// AC5: insensitivity to the x_S offset.
void offset_robustness(Verdict& v) {
  const RunConfig cfg = load_config(kConfigs + "/fig4.json");
  SweepSpec spec;
  spec.parameter = cfg.sweep->parameter;
  spec.values = cfg.sweep->values;
  spec.base = cfg.physical;
  spec.grid = cfg.grid;
  v.require(spec.parameter == SweepParameter::omega_xS_offset, "config does not sweep the x_S offset");
  v.require(cfg.physical.d_x_eA == cfg.physical.d_y_eA, "config does not have d_x = d_y");
  const auto lo_hi = std::minmax_element(spec.values.begin(), spec.values.end());
  v.require(*lo_hi.first <= -20 && *lo_hi.second >= 20, "sweep does not span +/-20 ueV");
  const auto res = run_sweep(spec);
  auto spread = [&](auto get) {
    double mn = 1e300, mx = -1e300;
    for (const auto& r : res.rows) mn = std::min(mn, get(r)), mx = std::max(mx, get(r));
    return (mx - mn) / mn;
  };
  const double dS = spread([](const SweepRow& r) { return r.S_bits; });
  const double dE = spread([](const SweepRow& r) { return r.eta; });
  const double dF = spread([](const SweepRow& r) { return r.fidelity; });
  for (const auto& r : res.rows) v.require(r.ok, "sweep point failed: " + r.error);
  v.detail << " points=" << res.rows.size() << " rel_spread S=" << dS << " eta=" << dE << " F=" << dF;
  v.require(dS < 0.01 && dE < 0.01 && dF < 0.01, "a metric varies by >= 1%");
}

// AC6: both time-domain oracles against the closed form.
void oracle_equivalence(Verdict& v) {
  {
    const RunConfig cfg = load_config(kConfigs + "/fig2-coarse.json");
    const auto sys = build_system(cfg.physical.resolve());
    const auto grid = auto_grid(sys, cfg.grid);
    const auto t0 = Clock::now();
    const double t_end = ueV_to_time(20.0 / sys.rates.total());
    const auto run = integrate_cascade_markov(sys, grid, t_end);
    const auto c = compare_with_closed_form(sys, grid, run.final);
    const double err = std::max(c.l2_error_abs, c.l2_error_complex), dt = seconds_since(t0);
    v.detail << " markov N=" << grid.n() << " err=" << err << " runtime=" << dt << "s";
    v.require(grid.n() == 128, "markov grid is not N=128");
    v.require(cfg.validate.t_end_gamma == 20, "markov run is not at 20/gamma_total");
    v.require(err < 1e-3, "markov error >= 1e-3");
    v.require(dt < 300, "markov runtime >= 5 min");
  }
  {
    const RunConfig cfg = load_config(kConfigs + "/fig2-unitary.json");
    const auto sys = build_system(cfg.physical.resolve());
    const auto grid = auto_grid(sys, cfg.grid);
    const auto t0 = Clock::now();
    const double t_end =
        ueV_to_time(cfg.validate.recurrence_fraction * 2 * std::numbers::pi / units::to_ueV(grid.delta));
    const auto run = integrate_cascade_unitary(sys, grid, t_end);
    const auto c = compare_with_closed_form(sys, grid, run.final);
    const double err = std::max(c.l2_error_abs, c.l2_error_complex), dt = seconds_since(t0);
    v.detail << " | unitary N=" << grid.n() << " gamma_ref=" << cfg.physical.gamma_ref_ueV << "ueV err_abs=" << c.l2_error_abs
             << " err_complex=" << c.l2_error_complex << " norm_drift=" << std::abs(run.final.norm2() - 1)
             << " runtime=" << dt << "s";
    v.require(err < 1e-2, "unitary error >= 1e-2");
    v.require(dt < 300, "unitary runtime >= 5 min");
  }
}

// AC7: two-photon pumping and its adiabatic scaling.
void pump_scheme(Verdict& v) {
  const RunConfig cfg = load_config(kConfigs + "/fig2.json");
  const auto sys = build_system(cfg.physical.resolve());
  const DriveParams d = cfg.pump.drive;
  const auto c = effective_coupling(d.E_x_ueV, d.E_y_ueV, d.delta_ueV);
  const auto tr = integrate_pump(sys, d, c.tau_drive, cfg.pump.n_samples);
  const double p = tr.samples.back().pop(PumpLevel::xy_S);
  const double dev = envelope_deviation(tr);
  DriveParams half = d;
  half.E_x_ueV *= 0.5;
  half.E_y_ueV *= 0.5;
  const auto ch = effective_coupling(half.E_x_ueV, half.E_y_ueV, half.delta_ueV);
  const auto th = integrate_pump(sys, half, ch.tau_drive, cfg.pump.n_samples);
  const double ratio = dev / envelope_deviation(th);
  v.detail << " |E|/delta=" << c.adiabaticity << " P_xyS(tau)=" << p << " deviation=" << dev
           << " deviation ratio on halving |E|=" << ratio;
  v.require(std::abs(c.adiabaticity - 0.05) < 1e-12, "drive is not at |E|/delta = 0.05");
  v.require(p > 0.95, "transfer <= 95%");
  v.require(ratio >= 4 * 0.7 && ratio <= 4 * 1.3, "deviation ratio outside 4 +/- 30%");
}

// AC8: property suites.
void properties(Verdict& v) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0, 1);
  double worst_energy = 0, worst_zero = 0;
  for (int n = 0; n < 100; ++n) {
    DefectPairConfig c;
    c.omega_x = 1 + 2 * u(rng);
    c.omega_y = 1 + 2 * u(rng);
    c.d_x = 0.1 + 2 * u(rng);
    c.d_y = 0.1 + 2 * u(rng);
    c.separation_nm = 2 + 20 * u(rng);
    c.epsilon_r = 1 + 10 * u(rng);
    const auto es = eigensystem(build_hamiltonian(c));
    const auto J = dipole_coupling(c);
    const double jx = J.J_xx * 1e-6, jy = J.J_yy * 1e-6;
    const std::map<Level, double> expect = {
        {Level::g, 0.0},          {Level::y_A, c.omega_y - jy},         {Level::y_S, c.omega_y + jy},
        {Level::x_S, c.omega_x + jx}, {Level::x_A, c.omega_x - jx},     {Level::yy, 2 * c.omega_y},
        {Level::xy_S, c.omega_x + c.omega_y}, {Level::xy_A, c.omega_x + c.omega_y}, {Level::xx, 2 * c.omega_x}};
    for (auto [l, e] : expect)
      worst_energy = std::max(worst_energy, std::abs(es.energies(idx(l)) - e) / std::max(1.0, std::abs(e)));
    const Level sym[] = {Level::g, Level::y_S, Level::x_S, Level::yy, Level::xy_S, Level::xx};
    const Level anti[] = {Level::y_A, Level::x_A, Level::xy_A};
    for (Level a : sym)
      for (Level b : anti) worst_zero = std::max(worst_zero, dipole_element(es, c.d_x, c.d_y, a, b).norm());
  }
  v.detail << " eigen_rel_err=" << worst_energy << " S<->A max=" << worst_zero;
  v.require(worst_energy <= 1e-12, "eigenvalues off the closed forms by > 1e-12");
  v.require(worst_zero < 1e-12, "symmetric/antisymmetric dipole element >= 1e-12");

  const RunConfig cfg = load_config(kConfigs + "/fig2.json");
  const auto sys = build_system(cfg.physical.resolve());
  auto metrics_at = [&](int n) {
    GridPolicy g = cfg.grid;
    g.n_points = n;
    return schmidt_decompose(amplitude_grid(sys, auto_grid(sys, g)).c);
  };
  const auto s401 = metrics_at(401), s801 = metrics_at(801);
  const double sum_err = std::abs(s401.lambdas.squaredNorm() - 1);
  const auto a = entanglement_metrics(s401), b = entanglement_metrics(s801);
  const double dS = std::abs(b.S_bits / a.S_bits - 1), dE = std::abs(b.eta / a.eta - 1),
               dF = std::abs(b.fidelity / a.fidelity - 1);
  v.detail << " |sum l^2 - 1|=" << sum_err << " refinement 401->801 dS=" << dS << " deta=" << dE << " dF=" << dF;
  v.require(sum_err <= 1e-10, "sum of lambda^2 off 1 by > 1e-10");
  v.require(dS < 0.01 && dE < 0.01 && dF < 0.01, "refinement changes a metric by >= 1%");

  const fs::path root = fs::temp_directory_path() / "defect_cascade_acceptance";
  fs::remove_all(root);
  bool identical = true;
  int files = 0;
  for (const char* sub : {"spectra", "schmidt", "pump"}) {
    std::ostringstream log;
    DispatchOptions o1, o2;
    o1.out_dir = (root / sub / "a").string();
    o2.out_dir = (root / sub / "b").string();
    const int c1 = dispatch(sub, cfg, o1, log), c2 = dispatch(sub, cfg, o2, log);
    v.require(c1 == 0 && c2 == 0, std::string(sub) + " run failed");
    for (const auto& e : fs::directory_iterator(o1.out_dir)) {
      ++files;
      identical = identical && slurp(e.path()) == slurp(fs::path(o2.out_dir) / e.path().filename());
    }
  }
  fs::remove_all(root);
  v.detail << " byte-compared files=" << files << " identical=" << identical;
  v.require(identical && files > 0, "repeated runs differ");
}

}  // namespace

int main() {
  report("AC1", "two peaks per polarization, equal splittings, anti-diagonal joint maxima, < 30 s", fig2_structure);
  report("AC2", "F > 0.95, eta = 0.69 +/- 0.05, paired Schmidt coefficients", fig2_metrics);
  report("AC3", "S and F minimal, eta maximal at zero splitting, d_x/d_y = 1/sqrt2", degeneracy_point);
  report("AC4", "operating point with eta > 0.90 and F > 0.90 between the reference points", operating_point);
  report("AC5", "S, eta, F vary < 1% over x_S offsets of +/-20 ueV", offset_robustness);
  report("AC6", "markov oracle < 1e-3 at N=128, unitary oracle < 1e-2, each < 5 min", oracle_equivalence);
  report("AC7", "pump transfer > 95% at tau_drive, adiabatic deviation scaling ~4x", pump_scheme);
  report("AC8", "eigen closed forms, selection rules, normalization, refinement, byte determinism", properties);
  std::cout << (failures ? "acceptance: " + std::to_string(failures) + " criterion(s) failed" : "acceptance: all passed")
            << std::endl;
  return failures ? 1 : 0;
}
