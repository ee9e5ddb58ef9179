#include "defect_cascade/dynamics_oracle.hpp"

#include "defect_cascade/error.hpp"
#include "defect_cascade/units.hpp"

#include <boost/numeric/odeint.hpp>

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>

namespace defect_cascade {

namespace odeint = boost::numeric::odeint;
using cplx = std::complex<double>;
using State = std::vector<cplx>;

namespace {

constexpr cplx I(0.0, 1.0);

// Layout: [c_xyS | c_xS(k) | c_yS(j) | c_g(j + n k)], energies in ueV, time in hbar/ueV.
struct CascadeModel {
  int n = 0;
  bool unitary = true;
  double e_xyS = 0, e_xS = 0, e_yS = 0;   // detunings from the axis centers
  std::vector<double> u, v;               // x and y photon detunings
  double om_a = 0, om_b = 0, om_c = 0, om_d = 0;  // xS-xyS, yS-xyS, g-xS, g-yS
  double gam_tot = 0, gam_c = 0, gam_d = 0;
  mutable std::size_t evals = 0;

  std::size_t size() const { return 1 + 2 * std::size_t(n) + std::size_t(n) * n; }

  void operator()(const State& x, State& dx, double /*t*/) const {
    ++evals;
    const cplx* xS = x.data() + 1;
    const cplx* yS = xS + n;
    const cplx* cg = yS + n;
    cplx* dxS = dx.data() + 1;
    cplx* dyS = dxS + n;
    cplx* dg = dyS + n;

    cplx sum_xS = 0, sum_yS = 0;
    for (int k = 0; k < n; ++k) sum_xS += xS[k];
    for (int j = 0; j < n; ++j) sum_yS += yS[j];

    if (unitary) {
      dx[0] = -I * (e_xyS * x[0] + om_a * sum_xS + om_b * sum_yS);
      for (int j = 0; j < n; ++j) dyS[j] = -I * ((e_yS + u[j]) * yS[j] + om_b * x[0]);
      for (int k = 0; k < n; ++k) {
        const cplx* col = cg + std::size_t(k) * n;
        cplx s = 0;
        for (int j = 0; j < n; ++j) {
          s += col[j];
          dyS[j] += -I * om_d * col[j];
        }
        dxS[k] = -I * ((e_xS + v[k]) * xS[k] + om_a * x[0] + om_c * s);
      }
    } else {
      dx[0] = (-I * e_xyS - gam_tot) * x[0];
      for (int k = 0; k < n; ++k) dxS[k] = (-I * (e_xS + v[k]) - gam_c) * xS[k] - I * om_a * x[0];
      for (int j = 0; j < n; ++j) dyS[j] = (-I * (e_yS + u[j]) - gam_d) * yS[j] - I * om_b * x[0];
    }
    for (int k = 0; k < n; ++k) {
      cplx* dcol = dg + std::size_t(k) * n;
      const cplx* col = cg + std::size_t(k) * n;
      const cplx src_k = om_c * xS[k];
      for (int j = 0; j < n; ++j) dcol[j] = -I * ((u[j] + v[k]) * col[j] + src_k + om_d * yS[j]);
    }
  }
};

CascadeModel make_model(const CoupledSystem& sys, const FrequencyGrid& grid, bool unitary,
                        const std::optional<LineCouplings>& couplings) {
  if (grid.x_axis.size() != grid.y_axis.size()) throw DomainError("oracle needs equal axis lengths");
  const auto& f = sys.cascade;
  const int n = grid.n();
  const double cx = grid.x_axis((n - 1) / 2), cy = grid.y_axis((n - 1) / 2);
  CascadeModel m;
  m.n = n;
  m.unitary = unitary;
  m.e_xyS = units::to_ueV((f.omega_xyS - cx) - cy);
  m.e_xS = units::to_ueV(f.omega_X1 - cx);
  m.e_yS = units::to_ueV(f.omega_Y1 - cy);
  m.u.resize(n);
  m.v.resize(n);
  for (int i = 0; i < n; ++i) {
    m.u[i] = units::to_ueV(grid.x_axis(i) - cx);
    m.v[i] = units::to_ueV(grid.y_axis(i) - cy);
  }
  const LineCouplings om = couplings ? *couplings : line_couplings(sys.rates, grid.delta);
  m.om_a = units::to_ueV(om.xS_xyS);
  m.om_b = units::to_ueV(om.yS_xyS);
  m.om_c = units::to_ueV(om.g_xS);
  m.om_d = units::to_ueV(om.g_yS);
  m.gam_tot = sys.rates.total();
  m.gam_c = sys.rates.gamma_g_xS;
  m.gam_d = sys.rates.gamma_g_yS;
  return m;
}

CascadeState unpack(const CascadeModel& m, const State& x, double t_per_ueV, double reference_eV) {
  CascadeState s;
  s.time = ueV_to_time(t_per_ueV);
  s.reference_eV = reference_eV;
  const int n = m.n;
  s.c_xyS = x[0];
  s.c_xS = Eigen::Map<const Eigen::VectorXcd>(x.data() + 1, n);
  s.c_yS = Eigen::Map<const Eigen::VectorXcd>(x.data() + 1 + n, n);
  s.c_g = Eigen::Map<const Eigen::MatrixXcd>(x.data() + 1 + 2 * n, n, n);
  return s;
}

CascadeSample summarize(const CascadeModel& m, const State& x, double t_per_ueV) {
  CascadeSample s;
  s.t = ueV_to_time(t_per_ueV);
  s.pop_xyS = std::norm(x[0]);
  for (int i = 0; i < m.n; ++i) {
    s.pop_xS += std::norm(x[1 + i]);
    s.pop_yS += std::norm(x[1 + m.n + i]);
  }
  for (std::size_t i = 1 + 2 * std::size_t(m.n); i < x.size(); ++i) s.pop_g += std::norm(x[i]);
  s.norm = s.pop_xyS + s.pop_xS + s.pop_yS + s.pop_g;
  return s;
}

std::vector<double> sample_times(double t_end, int n_samples) {
  const int n = std::max(2, n_samples);
  std::vector<double> t(n);
  for (int i = 0; i < n; ++i) t[i] = t_end * i / (n - 1);
  t.back() = t_end;
  return t;
}

// Adaptive Runge-Kutta-Fehlberg 7(8) with embedded error control.
template <class Rhs, class Obs>
std::size_t integrate_adaptive_rk(Rhs& rhs, State& x, const std::vector<double>& times, double dt0,
                                  const OracleOptions& opt, Obs obs, const char* what) {
  auto stepper = odeint::make_controlled(opt.atol, opt.rtol, odeint::runge_kutta_fehlberg78<State>());
  double reached = times.front();
  try {
    return odeint::integrate_times(
        stepper, std::ref(rhs), x, times.begin(), times.end(), dt0,
        [&](const State& s, double t) {
          reached = t;
          obs(s, t);
        },
        odeint::max_step_checker(1000000));
  } catch (const std::exception& e) {
    std::ostringstream os;
    os << what << ": step-size control failed after t = " << reached << " hbar/ueV (" << e.what() << ")";
    throw NumericError(os.str());
  }
}

}  // namespace

double CascadeState::norm2() const {
  return std::norm(c_xyS) + c_xS.squaredNorm() + c_yS.squaredNorm() + c_g.squaredNorm();
}

Eigen::MatrixXcd CascadeState::rotating_c_g(const FrequencyGrid& grid) const {
  const int n = grid.n();
  const double cx = grid.x_axis((n - 1) / 2), cy = grid.y_axis((n - 1) / 2);
  const double t = time_to_per_ueV(time);
  Eigen::MatrixXcd r(c_g.rows(), c_g.cols());
  for (Eigen::Index k = 0; k < r.cols(); ++k)
    for (Eigen::Index j = 0; j < r.rows(); ++j) {
      const double w = units::to_ueV(grid.x_axis(j) - cx) + units::to_ueV(grid.y_axis(k) - cy);
      r(j, k) = std::polar(1.0, w * t) * c_g(j, k);
    }
  return r;
}

namespace {

CascadeRun integrate_cascade(const CoupledSystem& sys, const FrequencyGrid& grid, double t_end,
                             const OracleOptions& opt, bool unitary) {
  if (!(t_end > 0) || !std::isfinite(t_end)) throw DomainError("t_end must be finite and > 0");
  CascadeModel m = make_model(sys, grid, unitary, opt.couplings);
  const int n = grid.n();
  const double reference = grid.x_axis((n - 1) / 2) + grid.y_axis((n - 1) / 2);
  State x(m.size(), cplx(0));
  x[0] = 1.0;

  const double t_u = time_to_per_ueV(t_end);
  const auto times = sample_times(t_u, opt.n_samples);
  CascadeRun run;
  double worst_drift = 0, worst_t = 0;
  auto obs = [&](const State& s, double t) {
    run.trajectory.push_back(summarize(m, s, t));
    const double drift = std::abs(run.trajectory.back().norm - 1.0);
    if (drift > worst_drift) worst_drift = drift, worst_t = t;
  };
  double fastest = std::abs(m.e_xyS);
  for (int i = 0; i < n; ++i) fastest = std::max(fastest, std::abs(m.u[i]) + std::abs(m.v[i]));
  const double dt0 = std::min(t_u / 100, 0.1 / std::max(fastest, 1e-9));
  run.steps = integrate_adaptive_rk(m, x, times, dt0, opt, obs, unitary ? "unitary cascade" : "markov cascade");
  run.final = unpack(m, x, t_u, reference);
  if (unitary) {
    const double drift = std::abs(run.final.norm2() - 1.0);
    if (drift > worst_drift) worst_drift = drift, worst_t = t_u;
    if (worst_drift > opt.max_norm_drift) {
      std::ostringstream os;
      os << "unitary cascade: norm drift " << worst_drift << " at t = " << ueV_to_time(worst_t)
         << " hbar/eV exceeds " << opt.max_norm_drift;
      throw NumericError(os.str());
    }
  }
  return run;
}

}  // namespace

CascadeRun integrate_cascade_unitary(const CoupledSystem& sys, const FrequencyGrid& grid, double t_end,
                                     const OracleOptions& opt) {
  return integrate_cascade(sys, grid, t_end, opt, true);
}

CascadeRun integrate_cascade_markov(const CoupledSystem& sys, const FrequencyGrid& grid, double t_end,
                                    const OracleOptions& opt) {
  return integrate_cascade(sys, grid, t_end, opt, false);
}

OracleComparison compare_with_closed_form(const CoupledSystem& sys, const FrequencyGrid& grid,
                                          const CascadeState& state,
                                          const std::optional<LineCouplings>& couplings) {
  const LineCouplings om = couplings ? *couplings : line_couplings(sys.rates, grid.delta);
  const int n = grid.n();
  Eigen::MatrixXcd ref(n, n);
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j) ref(j, k) = steady_amplitude(sys, om, grid.x_axis(j), grid.y_axis(k));
  const Eigen::MatrixXcd got = state.rotating_c_g(grid);
  const double den = ref.norm();
  OracleComparison c;
  c.l2_error_abs = (got.cwiseAbs() - ref.cwiseAbs()).norm() / den;
  const cplx overlap = (ref.conjugate().cwiseProduct(got)).sum();
  const cplx phase = std::abs(overlap) > 0 ? overlap / std::abs(overlap) : cplx(1);
  c.l2_error_complex = (got / phase - ref).norm() / den;
  return c;
}

EffectiveCoupling effective_coupling(cplx E_x, cplx E_y, double delta) {
  if (delta == 0 || !std::isfinite(delta)) throw DomainError("pump detuning delta must be nonzero");
  EffectiveCoupling e;
  e.g_eff_ueV = std::sqrt(2.0) * std::conj(E_x) * std::conj(E_y) / delta;
  e.adiabaticity = std::max(std::abs(E_x), std::abs(E_y)) / std::abs(delta);
  const double g = std::abs(e.g_eff_ueV);
  e.finite = g > 0;
  e.tau_drive = e.finite ? ueV_to_time(std::numbers::pi / (2.0 * g)) : std::numeric_limits<double>::infinity();
  if (!e.finite) e.warnings.push_back("g_eff = 0: no two-photon transfer, tau_drive is infinite");
  if (e.adiabaticity > 0.1) {
    std::ostringstream os;
    os << "drive/detuning ratio " << e.adiabaticity << " exceeds 0.1; adiabatic elimination is unreliable";
    e.warnings.push_back(os.str());
  }
  return e;
}

Eigen::Matrix4cd pump_generator(const CoupledSystem& sys, const DriveParams& d) {
  const auto& f = sys.cascade;
  const double delta = units::from_ueV(d.delta_ueV);
  double nu_x, nu_y;
  if (d.route == DriveParams::Route::x_S) {
    nu_x = f.omega_X1 + delta;
    nu_y = f.omega_Y2 - delta;
  } else {
    nu_x = f.omega_X2 - delta;
    nu_y = f.omega_Y1 + delta;
  }
  const int g = int(PumpLevel::g), xs = int(PumpLevel::x_S), ys = int(PumpLevel::y_S), xys = int(PumpLevel::xy_S);
  Eigen::Matrix4cd H = Eigen::Matrix4cd::Zero();
  // Level energy minus the laser photons absorbed to reach it.
  H(xs, xs) = units::to_ueV(f.omega_X1 - nu_x);
  H(ys, ys) = units::to_ueV(f.omega_Y1 - nu_y);
  H(xys, xys) = units::to_ueV((f.omega_xyS - nu_x) - nu_y);
  const double r2 = std::sqrt(2.0);
  auto couple = [&](int lo, int hi, cplx amp) {
    H(hi, lo) += amp;
    H(lo, hi) += std::conj(amp);
  };
  couple(g, xs, r2 * d.E_x_ueV);   // x laser
  couple(xs, xys, d.E_y_ueV);      // y laser
  couple(g, ys, r2 * d.E_y_ueV);   // y laser
  couple(ys, xys, d.E_x_ueV);      // x laser
  return H;
}

PumpTrajectory integrate_pump(const CoupledSystem& sys, const DriveParams& drive, double t_end, int n_samples,
                              const OracleOptions& opt) {
  if (!(t_end > 0) || !std::isfinite(t_end)) throw DomainError("pump t_end must be finite and > 0");
  PumpTrajectory tr;
  tr.coupling = effective_coupling(drive.E_x_ueV, drive.E_y_ueV, drive.delta_ueV);
  tr.warnings = tr.coupling.warnings;
  const auto& f = sys.cascade;
  const double gap = units::to_ueV(std::min(std::abs(f.omega_X1 - f.omega_X2), std::abs(f.omega_Y1 - f.omega_Y2)));
  if (std::abs(drive.delta_ueV) >= gap) {
    std::ostringstream os;
    os << "|delta| = " << std::abs(drive.delta_ueV) << " ueV is not below the line splitting " << gap << " ueV";
    tr.warnings.push_back(os.str());
  }

  const Eigen::Matrix4cd H = pump_generator(sys, drive);
  auto rhs = [&H](const State& b, State& db, double) {
    for (int r = 0; r < 4; ++r) {
      cplx s = 0;
      for (int c = 0; c < 4; ++c) s += H(r, c) * b[c];
      db[r] = -I * s;
    }
  };
  State b(4, cplx(0));
  b[int(PumpLevel::g)] = 1.0;
  const double t_u = time_to_per_ueV(t_end);
  const auto times = sample_times(t_u, n_samples);
  const double fastest = H.cwiseAbs().maxCoeff();
  auto obs = [&](const State& s, double t) {
    PumpSample p;
    p.t = ueV_to_time(t);
    for (int l = 0; l < 4; ++l) {
      p.a[l] = std::polar(1.0, H(l, l).real() * t) * s[l];
      p.norm += std::norm(s[l]);
    }
    tr.samples.push_back(p);
  };
  integrate_adaptive_rk(rhs, b, times, std::min(t_u / 100, 0.1 / std::max(fastest, 1e-12)), opt, obs, "pump");
  for (const auto& s : tr.samples)
    if (std::abs(s.norm - 1.0) > opt.max_norm_drift) {
      std::ostringstream os;
      os << "pump: norm drift " << std::abs(s.norm - 1.0) << " at t = " << s.t << " hbar/eV";
      throw NumericError(os.str());
    }
  return tr;
}

double envelope_deviation(const PumpTrajectory& traj) {
  const double g = std::abs(traj.coupling.g_eff_ueV);
  double worst = 0;
  for (const auto& s : traj.samples) {
    const double env = std::pow(std::sin(g * time_to_per_ueV(s.t)), 2);
    worst = std::max(worst, std::abs(s.pop(PumpLevel::xy_S) - env));
  }
  return worst;
}

}  // namespace defect_cascade
