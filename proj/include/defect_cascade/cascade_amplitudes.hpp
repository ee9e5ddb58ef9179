#pragma once

#include "defect_cascade/physics_core.hpp"

#include <Eigen/Dense>

#include <complex>
#include <string>
#include <utility>
#include <vector>

namespace defect_cascade {

// Uniform photon-frequency axes (eV). Rows of an amplitude grid follow x_axis
// (x-polarized photon), columns follow y_axis (y-polarized photon).
struct FrequencyGrid {
  Eigen::VectorXd x_axis;
  Eigen::VectorXd y_axis;
  double delta = 0;  // common spacing, eV

  int n() const { return static_cast<int>(x_axis.size()); }
};

struct GridPolicy {
  int n_points = 401;
  double margin_gamma = 20;     // margin beyond the outer lines, in units of the largest rate
  double half_width_ueV = 0;    // > 0 overrides the automatic half-width
};

// n points per axis, spacing 2*half_width/(n-1), centered on each axis center.
FrequencyGrid make_grid(double x_center_eV, double y_center_eV, double half_width_eV, int n);

// Each axis centered on the midpoint of its two cascade lines; half-width
// |splitting|/2 + margin_gamma * gamma_max unless overridden.
FrequencyGrid auto_grid(const CoupledSystem& sys, const GridPolicy& policy);

struct GridCoverage {
  bool ok = false;
  double min_margin_gamma = 0;  // smallest distance line -> axis edge, in units of gamma_max
  std::string message;
};

GridCoverage check_coverage(const CoupledSystem& sys, const FrequencyGrid& grid, double margin_gamma = 20);

struct AmplitudeGrid {
  FrequencyGrid grid;
  Eigen::MatrixXcd c;
  bool normalized = false;
  GridCoverage coverage;
};

// Coupling strength of a line of decay rate gamma_ueV on a mode spacing delta_eV:
// Omega = sqrt(gamma * delta / pi), in eV.
double mode_coupling(double gamma_ueV, double delta_eV);

// Steady-state two-photon amplitude at one mode pair (eV inputs), with the
// given mode couplings (eV). Rotating-frame phase omitted.
struct LineCouplings {
  double g_xS = 0, xS_xyS = 0, g_yS = 0, yS_xyS = 0;
};
LineCouplings line_couplings(const DecayRates& r, double delta_eV, double scale = 1.0);

std::complex<double> steady_amplitude(const CoupledSystem& sys, const LineCouplings& om, double omega_j,
                                      double omega_k);

// Fills c_jk on the grid, scaling all couplings by omega_scale, and optionally
// normalizes to unit l2 norm. Throws DomainError on zero rates.
AmplitudeGrid amplitude_grid(const CoupledSystem& sys, const FrequencyGrid& grid, bool normalize = true,
                             double omega_scale = 1.0, double coverage_margin_gamma = 20);

struct SpectraResult {
  Eigen::VectorXd N_X;
  Eigen::VectorXd N_Y;
  Eigen::MatrixXd N_XY;
  std::vector<double> peaks_X;  // eV, descending height
  std::vector<double> peaks_Y;
};

SpectraResult spectra(const AmplitudeGrid& amps, double peak_rel_threshold = 1e-3);

// Local maxima of y above rel_threshold * max(y), refined by 3-point parabola;
// returned sorted by descending height.
std::vector<double> find_peaks(const Eigen::VectorXd& axis, const Eigen::VectorXd& y, double rel_threshold);

struct JointMaximum {
  int j = 0, k = 0;
  double value = 0;
};

// Strict local maxima of a 2-D map (8-neighbour), descending by value.
std::vector<JointMaximum> joint_maxima(const Eigen::MatrixXd& m, double rel_threshold = 1e-3);

}  // namespace defect_cascade
