#include "defect_cascade/cascade_amplitudes.hpp"

#include "defect_cascade/error.hpp"
#include "defect_cascade/units.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace defect_cascade {

FrequencyGrid make_grid(double x_center_eV, double y_center_eV, double half_width_eV, int n) {
  if (n < 3) throw DomainError("grid needs at least 3 points per axis");
  if (!(half_width_eV > 0)) throw DomainError("grid half-width must be > 0");
  FrequencyGrid g;
  g.delta = 2.0 * half_width_eV / (n - 1);
  g.x_axis.resize(n);
  g.y_axis.resize(n);
  const int mid = (n - 1) / 2;
  for (int i = 0; i < n; ++i) {
    // Offsets are built from integers so both axes share bit-identical spacing.
    const double off = (i - mid) * g.delta - (n % 2 == 0 ? 0.5 * g.delta : 0.0);
    g.x_axis(i) = x_center_eV + off;
    g.y_axis(i) = y_center_eV + off;
  }
  return g;
}

FrequencyGrid auto_grid(const CoupledSystem& sys, const GridPolicy& policy) {
  const auto& f = sys.cascade;
  const double half = policy.half_width_ueV > 0
                          ? units::from_ueV(policy.half_width_ueV)
                          : 0.5 * std::abs(f.omega_X2 - f.omega_X1) +
                                policy.margin_gamma * units::from_ueV(sys.rates.max());
  return make_grid(0.5 * (f.omega_X1 + f.omega_X2), 0.5 * (f.omega_Y1 + f.omega_Y2), half, policy.n_points);
}

GridCoverage check_coverage(const CoupledSystem& sys, const FrequencyGrid& grid, double margin_gamma) {
  const auto& f = sys.cascade;
  const double gmax = units::from_ueV(sys.rates.max());
  auto inside = [](const Eigen::VectorXd& ax, double w) { return std::min(w - ax(0), ax(ax.size() - 1) - w); };
  const double m = std::min({inside(grid.x_axis, f.omega_X1), inside(grid.x_axis, f.omega_X2),
                             inside(grid.y_axis, f.omega_Y1), inside(grid.y_axis, f.omega_Y2)});
  GridCoverage cov;
  cov.min_margin_gamma = gmax > 0 ? m / gmax : 0;
  cov.ok = cov.min_margin_gamma >= margin_gamma * (1 - 1e-9);
  if (!cov.ok) {
    std::ostringstream os;
    os << "grid margin " << cov.min_margin_gamma << " gamma_max is below the required " << margin_gamma;
    cov.message = os.str();
  }
  return cov;
}

double mode_coupling(double gamma_ueV, double delta_eV) {
  return std::sqrt(units::from_ueV(gamma_ueV) * delta_eV / std::numbers::pi);
}

LineCouplings line_couplings(const DecayRates& r, double delta_eV, double scale) {
  return {scale * mode_coupling(r.gamma_g_xS, delta_eV), scale * mode_coupling(r.gamma_xS_xyS, delta_eV),
          scale * mode_coupling(r.gamma_g_yS, delta_eV), scale * mode_coupling(r.gamma_yS_xyS, delta_eV)};
}

std::complex<double> steady_amplitude(const CoupledSystem& sys, const LineCouplings& om, double omega_j,
                                      double omega_k) {
  using C = std::complex<double>;
  const auto& r = sys.rates;
  const auto& f = sys.cascade;
  const double g_gx = units::from_ueV(r.gamma_g_xS), g_gy = units::from_ueV(r.gamma_g_yS);
  const double g_tot = units::from_ueV(r.total());
  // Differences are taken before forming complex numbers to keep sub-ueV detunings exact.
  const C via_xS = -om.g_xS * om.xS_xyS / C(g_gx, f.omega_X1 - omega_j);
  const C via_yS = -om.g_yS * om.yS_xyS / C(g_gy, f.omega_Y1 - omega_k);
  return (via_xS + via_yS) / C(g_tot, (f.omega_xyS - omega_j) - omega_k);
}

AmplitudeGrid amplitude_grid(const CoupledSystem& sys, const FrequencyGrid& grid, bool normalize,
                             double omega_scale, double coverage_margin_gamma) {
  const auto& r = sys.rates;
  if (!(r.gamma_g_xS > 0 && r.gamma_g_yS > 0 && r.gamma_xS_xyS > 0 && r.gamma_yS_xyS > 0))
    throw DomainError("all four cascade decay rates must be > 0");
  if (!(omega_scale > 0)) throw DomainError("coupling scale must be > 0");

  AmplitudeGrid a;
  a.grid = grid;
  a.coverage = check_coverage(sys, grid, coverage_margin_gamma);
  const LineCouplings om = line_couplings(r, grid.delta, omega_scale);
  const int n = grid.n();
  a.c.resize(n, grid.y_axis.size());
  for (int k = 0; k < a.c.cols(); ++k)
    for (int j = 0; j < n; ++j) a.c(j, k) = steady_amplitude(sys, om, grid.x_axis(j), grid.y_axis(k));
  if (normalize) {
    double s = 0;
    for (int k = 0; k < a.c.cols(); ++k)
      for (int j = 0; j < n; ++j) s += std::norm(a.c(j, k));
    a.c /= std::sqrt(s);
    a.normalized = true;
  }
  return a;
}

std::vector<double> find_peaks(const Eigen::VectorXd& axis, const Eigen::VectorXd& y, double rel_threshold) {
  const Eigen::Index n = y.size();
  std::vector<std::pair<double, double>> found;  // (height, position)
  if (n < 3) return {};
  const double floor = rel_threshold * y.maxCoeff();
  for (Eigen::Index i = 1; i + 1 < n; ++i) {
    if (!(y(i) > y(i - 1) && y(i) >= y(i + 1)) || y(i) < floor) continue;
    const double a = y(i - 1), b = y(i), c = y(i + 1);
    const double den = a - 2 * b + c;
    const double shift = den != 0 ? 0.5 * (a - c) / den : 0.0;
    const double h = axis(i + 1) - axis(i);
    found.emplace_back(b - 0.25 * (a - c) * shift, axis(i) + shift * h);
  }
  std::stable_sort(found.begin(), found.end(), [](auto& l, auto& r) { return l.first > r.first; });
  std::vector<double> out;
  for (auto& p : found) out.push_back(p.second);
  return out;
}

SpectraResult spectra(const AmplitudeGrid& amps, double peak_rel_threshold) {
  SpectraResult s;
  s.N_XY = amps.c.cwiseAbs2();
  if (!amps.normalized) s.N_XY /= s.N_XY.sum();
  const Eigen::Index n = s.N_XY.rows(), m = s.N_XY.cols();
  s.N_X = Eigen::VectorXd::Zero(n);
  s.N_Y = Eigen::VectorXd::Zero(m);
  for (Eigen::Index k = 0; k < m; ++k)
    for (Eigen::Index j = 0; j < n; ++j) {
      s.N_X(j) += s.N_XY(j, k);
      s.N_Y(k) += s.N_XY(j, k);
    }
  s.peaks_X = find_peaks(amps.grid.x_axis, s.N_X, peak_rel_threshold);
  s.peaks_Y = find_peaks(amps.grid.y_axis, s.N_Y, peak_rel_threshold);
  return s;
}

std::vector<JointMaximum> joint_maxima(const Eigen::MatrixXd& m, double rel_threshold) {
  std::vector<JointMaximum> out;
  const double floor = rel_threshold * m.maxCoeff();
  const Eigen::Index n = m.rows(), p = m.cols();
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index k = 0; k < p; ++k) {
      const double v = m(j, k);
      if (v < floor) continue;
      bool is_max = true;
      for (int dj = -1; dj <= 1 && is_max; ++dj)
        for (int dk = -1; dk <= 1; ++dk) {
          if (!dj && !dk) continue;
          const Eigen::Index jj = j + dj, kk = k + dk;
          if (jj < 0 || kk < 0 || jj >= n || kk >= p) continue;
          if (m(jj, kk) >= v) {
            is_max = false;
            break;
          }
        }
      if (is_max) out.push_back({int(j), int(k), v});
    }
  std::stable_sort(out.begin(), out.end(), [](auto& a, auto& b) { return a.value > b.value; });
  return out;
}

}  // namespace defect_cascade
