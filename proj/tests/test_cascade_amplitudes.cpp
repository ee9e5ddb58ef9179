#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "defect_cascade/cascade_amplitudes.hpp"
#include "defect_cascade/entanglement.hpp"
#include "defect_cascade/error.hpp"
#include "defect_cascade/physics_core.hpp"
#include "defect_cascade/units.hpp"

#include <cmath>
#include <complex>

using namespace defect_cascade;

namespace {

CoupledSystem reference_system() { return build_system(PhysicalParams{}.resolve()); }

int nearest(const Eigen::VectorXd& axis, double w) {
  Eigen::Index i;
  (axis.array() - w).abs().minCoeff(&i);
  return int(i);
}

// Direct evaluation of the closed form with independent arithmetic.
std::complex<double> hand_amplitude(const CoupledSystem& s, double delta, double wj, double wk) {
  using C = std::complex<double>;
  const auto& r = s.rates;
  const auto& f = s.cascade;
  auto Om = [&](double g) { return std::sqrt(g * 1e-6 * delta / M_PI); };
  const C a = -Om(r.gamma_g_xS) * Om(r.gamma_xS_xyS) / C(r.gamma_g_xS * 1e-6, f.omega_X1 - wj);
  const C b = -Om(r.gamma_g_yS) * Om(r.gamma_yS_xyS) / C(r.gamma_g_yS * 1e-6, f.omega_Y1 - wk);
  return (a + b) / C((r.gamma_xS_xyS + r.gamma_yS_xyS) * 1e-6, f.omega_xyS - wj - wk);
}

}  // namespace

TEST_CASE("grid construction and coverage") {
  const auto sys = reference_system();
  const FrequencyGrid g = auto_grid(sys, GridPolicy{});
  REQUIRE(g.n() == 401);
  for (int i = 1; i < g.n(); ++i) {
    CHECK(std::abs((g.x_axis(i) - g.x_axis(i - 1)) - g.delta) <= 1e-12 * g.delta * 1e6);
    CHECK(g.x_axis(i) - g.x_axis(i - 1) > 0);
    CHECK(g.y_axis(i) - g.y_axis(i - 1) > 0);
  }
  const auto cov = check_coverage(sys, g);
  CHECK(cov.ok);
  CHECK(cov.min_margin_gamma >= 20 * (1 - 1e-9));

  const FrequencyGrid narrow = make_grid(g.x_axis(200), g.y_axis(200), units::from_ueV(5), 101);
  const auto bad = amplitude_grid(sys, narrow);
  CHECK_FALSE(bad.coverage.ok);
  CHECK_FALSE(bad.coverage.message.empty());
  CHECK_THROWS_AS(make_grid(2, 2, 1e-6, 2), DomainError);
}

TEST_CASE("closed form against direct evaluation") {
  const auto sys = reference_system();
  const FrequencyGrid g = auto_grid(sys, GridPolicy{101});
  const auto a = amplitude_grid(sys, g, false);
  double worst = 0;
  for (int j = 0; j < g.n(); j += 7)
    for (int k = 0; k < g.n(); k += 5) {
      const auto ref = hand_amplitude(sys, g.delta, g.x_axis(j), g.y_axis(k));
      worst = std::max(worst, std::abs(a.c(j, k) - ref) / std::abs(ref));
    }
  // The hand version loses digits to the eV-scale cancellation in w_xyS - w_j - w_k.
  CHECK(worst < 1e-6);
}

TEST_CASE("reference-point spectra have two peaks per polarization") {
  const auto sys = reference_system();
  const auto amps = amplitude_grid(sys, auto_grid(sys, GridPolicy{}));
  const auto sp = spectra(amps);
  REQUIRE(sp.peaks_X.size() == 2);
  REQUIRE(sp.peaks_Y.size() == 2);
  const auto& f = sys.cascade;
  const double d = amps.grid.delta;
  const double xlo = std::min(sp.peaks_X[0], sp.peaks_X[1]), xhi = std::max(sp.peaks_X[0], sp.peaks_X[1]);
  const double ylo = std::min(sp.peaks_Y[0], sp.peaks_Y[1]), yhi = std::max(sp.peaks_Y[0], sp.peaks_Y[1]);
  CHECK(std::abs(xlo - std::min(f.omega_X1, f.omega_X2)) < d);
  CHECK(std::abs(xhi - std::max(f.omega_X1, f.omega_X2)) < d);
  CHECK(std::abs(ylo - std::min(f.omega_Y1, f.omega_Y2)) < d);
  CHECK(std::abs(yhi - std::max(f.omega_Y1, f.omega_Y2)) < d);
  const double sx = xhi - xlo, sy = yhi - ylo;
  CHECK(std::abs(sx - sy) < d);
  CHECK(std::abs(sx - std::abs(f.splitting())) < d);
}

TEST_CASE("joint maxima sit on the anti-diagonal pairings") {
  const auto sys = reference_system();
  const auto amps = amplitude_grid(sys, auto_grid(sys, GridPolicy{}));
  const auto sp = spectra(amps);
  const auto mx = joint_maxima(sp.N_XY);
  REQUIRE(mx.size() >= 2);
  const auto& f = sys.cascade;
  const auto& g = amps.grid;
  const int jx1 = nearest(g.x_axis, f.omega_X1), jx2 = nearest(g.x_axis, f.omega_X2);
  const int ky1 = nearest(g.y_axis, f.omega_Y1), ky2 = nearest(g.y_axis, f.omega_Y2);
  auto at = [](const JointMaximum& m, int j, int k) { return std::abs(m.j - j) <= 1 && std::abs(m.k - k) <= 1; };
  const bool first_a = at(mx[0], jx1, ky2) && at(mx[1], jx2, ky1);
  const bool first_b = at(mx[0], jx2, ky1) && at(mx[1], jx1, ky2);
  CHECK((first_a || first_b));
  // The remaining maxima are far weaker than the two pairings.
  for (std::size_t i = 2; i < mx.size(); ++i) CHECK(mx[i].value < 0.1 * mx[1].value);
  // No weight at the same-order pairings (w_X1, w_Y1) and (w_X2, w_Y2).
  CHECK(sp.N_XY(jx1, ky1) < 1e-3 * mx[0].value);
  CHECK(sp.N_XY(jx2, ky2) < 1e-3 * mx[0].value);
}

TEST_CASE("normalization and marginals") {
  const auto sys = reference_system();
  const auto amps = amplitude_grid(sys, auto_grid(sys, GridPolicy{201}));
  const auto sp = spectra(amps);
  CHECK(std::abs(sp.N_XY.sum() - 1) < 1e-12);
  CHECK(std::abs(sp.N_X.sum() - 1) < 1e-12);
  CHECK(std::abs(sp.N_Y.sum() - 1) < 1e-12);
  const int n = amps.grid.n();
  double worst = 0;
  for (int j = 0; j < n; ++j) {
    long double row = 0, col = 0;
    for (int k = 0; k < n; ++k) {
      row += std::norm(amps.c(j, k));
      col += std::norm(amps.c(k, j));
    }
    worst = std::max({worst, std::abs(double(row) - sp.N_X(j)), std::abs(double(col) - sp.N_Y(j))});
  }
  CHECK(worst < 1e-15);
}

TEST_CASE("global coupling scale cancels under normalization") {
  const auto sys = reference_system();
  const FrequencyGrid g = auto_grid(sys, GridPolicy{151});
  const auto a = amplitude_grid(sys, g);
  for (double s : {1e-3, 0.37, 5.0, 1e4}) {
    const auto b = amplitude_grid(sys, g, true, s);
    CHECK((b.c - a.c).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("symmetric configuration gives congruent spectra") {
  PhysicalParams p;
  p.anchor.omega_xS_offset_ueV = 0;
  const auto sys = build_system(p.resolve());
  const auto amps = amplitude_grid(sys, auto_grid(sys, GridPolicy{201}));
  const auto sp = spectra(amps);
  CHECK((amps.grid.x_axis - amps.grid.y_axis).cwiseAbs().maxCoeff() == 0.0);
  // Line positions carry the 4e-16 eV resolution of 2 eV doubles, ~2e-9 of a linewidth.
  const double floor = 1e-8;
  CHECK((sp.N_X - sp.N_Y).cwiseAbs().maxCoeff() < floor * sp.N_X.maxCoeff());
  // Exchange of the photon roles transposes the joint amplitude.
  CHECK((sp.N_XY - sp.N_XY.transpose()).cwiseAbs().maxCoeff() < floor * sp.N_XY.maxCoeff());
}

TEST_CASE("Lorentzian tail along the energy-conserving line") {
  const auto sys = reference_system();
  const auto& f = sys.cascade;
  const auto& r = sys.rates;
  const LineCouplings om = line_couplings(r, 1e-7);
  // Samples symmetric about w_X1 cancel the odd interference term from the far line.
  double sxx = 0, sx = 0, sy = 0, sxy = 0;
  int m = 0;
  for (int i = 1; i <= 10; ++i)
    for (int sgn : {-1, 1}) {
      const double u = sgn * i * 0.5 * r.gamma_g_xS;  // ueV
      const double wj = f.omega_X1 + units::from_ueV(u);
      const double wk = f.omega_xyS - wj;
      const double inv = 1.0 / std::norm(steady_amplitude(sys, om, wj, wk));
      sxx += u * u * u * u, sx += u * u, sy += inv, sxy += u * u * inv;
      ++m;
    }
  const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  const double intercept = (sy - slope * sx) / m;
  const double width = std::sqrt(intercept / slope);
  // At these parameters gamma_g,xS and gamma_xS,xyS + gamma_yS,xyS coincide.
  CHECK(r.gamma_g_xS == doctest::Approx(r.total()).epsilon(1e-12));
  CHECK(std::abs(width / r.total() - 1) < 0.05);
}

TEST_CASE("grid refinement stability") {
  const auto sys = reference_system();
  auto metrics = [&](int n) {
    const auto amps = amplitude_grid(sys, auto_grid(sys, GridPolicy{n}));
    return entanglement_metrics(schmidt_decompose(amps.c));
  };
  const auto a = metrics(401), b = metrics(801);
  CHECK(std::abs(b.S_bits / a.S_bits - 1) < 0.01);
  CHECK(std::abs(b.eta / a.eta - 1) < 0.01);
  CHECK(std::abs(b.fidelity / a.fidelity - 1) < 0.01);
}

TEST_CASE("zero decay rates are a domain error") {
  auto sys = reference_system();
  const FrequencyGrid g = auto_grid(sys, GridPolicy{51});
  sys.rates.gamma_xS_xyS = 0;
  CHECK_THROWS_AS(amplitude_grid(sys, g), DomainError);
  PhysicalParams p;
  p.d_y_eA = 0;
  CHECK_THROWS_AS(build_system(p.resolve()), DomainError);
}

TEST_CASE("peak finder refines a sampled parabola exactly") {
  Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(11, 0, 10);
  Eigen::VectorXd y = (-(x.array() - 4.3).square() + 30).matrix();
  const auto p = find_peaks(x, y, 1e-3);
  REQUIRE(p.size() == 1);
  CHECK(p[0] == doctest::Approx(4.3).epsilon(1e-12));
}
