#pragma once

#include "defect_cascade/cascade_amplitudes.hpp"
#include "defect_cascade/physics_core.hpp"

#include <Eigen/Dense>

#include <array>
#include <complex>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace defect_cascade {

// Times are in hbar/eV throughout this interface.
inline constexpr double ueV_to_time(double t_per_ueV) { return t_per_ueV * 1e6; }
inline constexpr double time_to_per_ueV(double t_eV) { return t_eV * 1e-6; }

// Discrete-mode cascade amplitudes. Schrodinger picture with the constant
// reference energy `reference_eV` (x-axis center + y-axis center) removed.
// c_xS is indexed by the y-photon mode k, c_yS by the x-photon mode j, c_g(j, k).
struct CascadeState {
  double time = 0;
  double reference_eV = 0;
  std::complex<double> c_xyS;
  Eigen::VectorXcd c_xS;
  Eigen::VectorXcd c_yS;
  Eigen::MatrixXcd c_g;

  double norm2() const;
  // c_g with the free photon phases exp(-i(w_j + w_k) t) stripped.
  Eigen::MatrixXcd rotating_c_g(const FrequencyGrid& grid) const;
};

struct CascadeSample {
  double t = 0;
  double pop_xyS = 0, pop_xS = 0, pop_yS = 0, pop_g = 0, norm = 0;
};

struct OracleOptions {
  double rtol = 1e-10;
  double atol = 1e-12;
  int n_samples = 2;                               // recorded trajectory points including t=0 and t_end
  std::optional<LineCouplings> couplings;          // eV; default sqrt(gamma * delta / pi)
  double max_norm_drift = 1e-6;                    // unitary run only
};

struct CascadeRun {
  CascadeState final;
  std::vector<CascadeSample> trajectory;
  std::size_t steps = 0;
};

// Full discrete-mode system including photon reabsorption; norm-conserving.
CascadeRun integrate_cascade_unitary(const CoupledSystem& sys, const FrequencyGrid& grid, double t_end,
                                     const OracleOptions& opt = {});

// Damped amplitude equations after eliminating the photon continua.
CascadeRun integrate_cascade_markov(const CoupledSystem& sys, const FrequencyGrid& grid, double t_end,
                                    const OracleOptions& opt = {});

struct OracleComparison {
  double l2_error_abs = 0;      // || |c_ode| - |c_closed| || / || c_closed ||
  double l2_error_complex = 0;  // after aligning one global phase
};

// Compares the rotating-frame c_g of a run with the closed-form grid built from the same couplings.
OracleComparison compare_with_closed_form(const CoupledSystem& sys, const FrequencyGrid& grid,
                                          const CascadeState& state,
                                          const std::optional<LineCouplings>& couplings = std::nullopt);

struct EffectiveCoupling {
  std::complex<double> g_eff_ueV;
  double tau_drive = 0;  // hbar/eV; +inf when g_eff = 0
  bool finite = true;
  double adiabaticity = 0;  // max(|E_x|, |E_y|) / |delta|
  std::vector<std::string> warnings;
};

// g_eff = sqrt(2) conj(E_x) conj(E_y) / delta, tau_drive = pi / (2 |g_eff|).
EffectiveCoupling effective_coupling(std::complex<double> E_x_ueV, std::complex<double> E_y_ueV,
                                     double delta_ueV);

struct DriveParams {
  std::complex<double> E_x_ueV = 0.001 / 1.4142135623730951;
  std::complex<double> E_y_ueV = 0.001;
  double delta_ueV = 0.02;
  // x_S: lasers at omega_X1 + delta and omega_Y2 - delta through x_S.
  // y_S: lasers at omega_X2 - delta and omega_Y1 + delta through y_S.
  enum class Route { x_S, y_S } route = Route::x_S;
};

// Levels of the driven subspace.
enum class PumpLevel : int { g = 0, x_S, y_S, xy_S };

struct PumpSample {
  double t = 0;
  std::array<std::complex<double>, 4> a{};  // interaction picture w.r.t. the bare levels
  double norm = 0;
  double pop(PumpLevel l) const { return std::norm(a[static_cast<int>(l)]); }
};

struct PumpTrajectory {
  EffectiveCoupling coupling;
  std::vector<PumpSample> samples;
  std::vector<std::string> warnings;
};

// Time-independent generator (ueV) of the driven four-level system in the
// frame rotating with the lasers, basis order of PumpLevel.
Eigen::Matrix4cd pump_generator(const CoupledSystem& sys, const DriveParams& drive);

// Integrates a_g(0) = 1 over [0, t_end] and records n_samples uniformly spaced points.
PumpTrajectory integrate_pump(const CoupledSystem& sys, const DriveParams& drive, double t_end,
                              int n_samples, const OracleOptions& opt = {});

// max_t | P_xyS(t) - sin^2(|g_eff| t) | over the recorded samples.
double envelope_deviation(const PumpTrajectory& traj);

}  // namespace defect_cascade
