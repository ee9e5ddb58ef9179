#include "defect_cascade/physics_core.hpp"

#include "defect_cascade/error.hpp"
#include "defect_cascade/units.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace defect_cascade {

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

// Single-defect basis index of |g>, |x>, |y>.
constexpr int kG = 0, kX = 1, kY = 2;

int product_index(int r, int s) {
  static constexpr int table[3][3] = {
      {idx(Product::gg), idx(Product::gx), idx(Product::gy)},
      {idx(Product::xg), idx(Product::xx), idx(Product::xy)},
      {idx(Product::yg), idx(Product::yx), idx(Product::yy)}};
  return table[r][s];
}

}  // namespace

const char* level_name(Level l) {
  static constexpr const char* names[kLevels] = {"g",  "y_A",  "y_S",  "x_S", "x_A",
                                                 "yy", "xy_S", "xy_A", "xx"};
  return names[idx(l)];
}

std::vector<std::string> config_issues(const DefectPairConfig& c) {
  std::vector<std::string> out;
  auto finite = [](double v) { return std::isfinite(v); };
  if (!finite(c.omega_x) || c.omega_x <= 0) out.push_back("omega_x must be > 0 eV, got " + fmt(c.omega_x));
  if (!finite(c.omega_y) || c.omega_y <= 0) out.push_back("omega_y must be > 0 eV, got " + fmt(c.omega_y));
  if (!finite(c.d_x) || c.d_x < 0) out.push_back("d_x must be >= 0 e*A, got " + fmt(c.d_x));
  if (!finite(c.d_y) || c.d_y < 0) out.push_back("d_y must be >= 0 e*A, got " + fmt(c.d_y));
  if (c.separation_nm == 0) {
    out.push_back("coincident defects: separation must be > 0 nm");
  } else if (!finite(c.separation_nm) || c.separation_nm < 0) {
    out.push_back("separation must be > 0 nm, got " + fmt(c.separation_nm));
  }
  if (!finite(c.epsilon_r) || c.epsilon_r < 1) out.push_back("epsilon_r must be >= 1, got " + fmt(c.epsilon_r));
  if (!finite(c.gamma_ref_ueV) || c.gamma_ref_ueV <= 0)
    out.push_back("gamma_ref must be > 0 ueV, got " + fmt(c.gamma_ref_ueV));
  if (!c.axis.allFinite() || std::abs(c.axis.norm() - 1.0) > 1e-12)
    out.push_back("axis must be a unit vector (|n| = 1 within 1e-12)");
  return out;
}

std::vector<std::string> config_warnings(const DefectPairConfig& c) {
  std::vector<std::string> out;
  if (!config_issues(c).empty()) return out;
  const CouplingEnergies J = dipole_coupling(c);
  const double big = units::from_ueV(std::max({std::abs(J.J_xx), std::abs(J.J_yy), std::abs(J.J_xy),
                                               std::abs(J.J_yx), c.gamma_ref_ueV}));
  if (big > 1e-3 * std::min(c.omega_x, c.omega_y))
    out.push_back("coupling/decay energy " + fmt(units::to_ueV(big)) +
                  " ueV is not small against the transition energies");
  return out;
}

void require_valid(const DefectPairConfig& c) {
  const auto issues = config_issues(c);
  if (issues.empty()) return;
  std::string msg;
  for (const auto& i : issues) msg += (msg.empty() ? "" : "; ") + i;
  throw DomainError(msg);
}

CouplingEnergies dipole_coupling(const DefectPairConfig& c) {
  require_valid(c);
  const double r_A = c.separation_nm * units::nm_in_A;
  const double k_eV = units::coulomb_eV_A / (c.epsilon_r * r_A * r_A * r_A);
  const Eigen::Vector3d e[2] = {Eigen::Vector3d::UnitX(), Eigen::Vector3d::UnitY()};
  const double d[2] = {c.d_x, c.d_y};
  double J[2][2];
  for (int p = 0; p < 2; ++p)
    for (int q = 0; q < 2; ++q) {
      const double angular = e[p].dot(e[q]) - 3.0 * e[p].dot(c.axis) * e[q].dot(c.axis);
      J[p][q] = units::to_ueV(d[p] * d[q] * k_eV * angular);
    }
  return {J[0][0], J[1][1], J[0][1], J[1][0]};
}

Mat9 build_hamiltonian(const DefectPairConfig& c) {
  const CouplingEnergies J = dipole_coupling(c);
  const double e1[3] = {0.0, c.omega_x, c.omega_y};
  Mat9 H = Mat9::Zero();
  for (int r = 0; r < 3; ++r)
    for (int s = 0; s < 3; ++s) H(product_index(r, s), product_index(r, s)) = e1[r] + e1[s];
  // J_pq (|g p><q g| + h.c.)
  const double Jm[3][3] = {{0, 0, 0},
                           {0, units::from_ueV(J.J_xx), units::from_ueV(J.J_xy)},
                           {0, units::from_ueV(J.J_yx), units::from_ueV(J.J_yy)}};
  for (int p = kX; p <= kY; ++p)
    for (int q = kX; q <= kY; ++q) {
      const int a = product_index(kG, p), b = product_index(q, kG);
      H(a, b) += Jm[p][q];
      H(b, a) += Jm[p][q];
    }
  return H;
}

Mat9 reference_states() {
  const double h = 1.0 / std::sqrt(2.0);
  Mat9 R = Mat9::Zero();
  auto set = [&](Level l, Product p, double v) { R(idx(p), idx(l)) = v; };
  set(Level::g, Product::gg, 1);
  set(Level::y_A, Product::gy, h), set(Level::y_A, Product::yg, -h);
  set(Level::y_S, Product::gy, h), set(Level::y_S, Product::yg, h);
  set(Level::x_S, Product::gx, h), set(Level::x_S, Product::xg, h);
  set(Level::x_A, Product::gx, h), set(Level::x_A, Product::xg, -h);
  set(Level::yy, Product::yy, 1);
  set(Level::xy_S, Product::xy, h), set(Level::xy_S, Product::yx, h);
  set(Level::xy_A, Product::xy, h), set(Level::xy_A, Product::yx, -h);
  set(Level::xx, Product::xx, 1);
  return R;
}

namespace {

// Exchange parity plus weighted excitation counts; separates all nine reference levels.
Mat9 symmetry_probe() {
  Mat9 Q = Mat9::Zero();
  for (int r = 0; r < 3; ++r)
    for (int s = 0; s < 3; ++s) {
      Q(product_index(s, r), product_index(r, s)) += 1.0;
      const double nx = (r == kX) + (s == kX), ny = (r == kY) + (s == kY);
      Q(product_index(r, s), product_index(r, s)) += 0.25 * nx + 0.0625 * ny;
    }
  return Q;
}

}  // namespace

Eigensystem eigensystem(const Mat9& H) {
  // Exchange symmetry commutes with H, so the symmetric and antisymmetric
  // sectors of the reference basis are diagonalized separately.
  const Mat9 R = reference_states();
  const Mat9 Hr = R.transpose() * H * R;
  const Mat9 Qr = R.transpose() * symmetry_probe() * R;
  const std::vector<std::vector<int>> sectors = {
      {idx(Level::g), idx(Level::y_S), idx(Level::x_S), idx(Level::yy), idx(Level::xy_S), idx(Level::xx)},
      {idx(Level::y_A), idx(Level::x_A), idx(Level::xy_A)}};

  Eigensystem es;
  es.vectors.setZero();
  for (const auto& sec : sectors) {
    const int m = static_cast<int>(sec.size());
    Eigen::MatrixXd h(m, m), q(m, m);
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < m; ++b) h(a, b) = Hr(sec[a], sec[b]), q(a, b) = Qr(sec[a], sec[b]);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h);
    if (solver.info() != Eigen::Success) throw NumericError("Hamiltonian diagonalization failed");
    Eigen::VectorXd E = solver.eigenvalues();
    Eigen::MatrixXd W = solver.eigenvectors();

    // Rotate each degenerate cluster onto eigenvectors of the symmetry probe.
    const double tol = 1e-11 * std::max(1.0, E.cwiseAbs().maxCoeff());
    for (int start = 0; start < m;) {
      int end = start + 1;
      while (end < m && E(end) - E(end - 1) <= tol) ++end;
      const int c = end - start;
      if (c > 1) {
        const Eigen::MatrixXd Wc = W.middleCols(start, c);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> qs(Wc.transpose() * q * Wc);
        const Eigen::MatrixXd Wr = Wc * qs.eigenvectors();
        W.middleCols(start, c) = Wr;
        for (int i = 0; i < c; ++i) E(start + i) = Wr.col(i).dot(h * Wr.col(i));
      }
      start = end;
    }

    // Greedy assignment by largest overlap with the reference combinations.
    const Eigen::MatrixXd O = W.cwiseAbs();  // O(label in sector, eigvec)
    std::vector<bool> used_l(m), used_v(m);
    for (int n = 0; n < m; ++n) {
      double best = -1;
      int bl = -1, bv = -1;
      for (int l = 0; l < m; ++l) {
        if (used_l[l]) continue;
        for (int v = 0; v < m; ++v)
          if (!used_v[v] && O(l, v) > best) best = O(l, v), bl = l, bv = v;
      }
      used_l[bl] = used_v[bv] = true;
      Eigen::VectorXd w = W.col(bv);
      if (w(bl) < 0) w = -w;
      Vec9 v = Vec9::Zero();
      for (int a = 0; a < m; ++a) v += w(a) * R.col(sec[a]);
      es.vectors.col(sec[bl]) = v;
      es.energies(sec[bl]) = E(bv);
    }
  }
  return es;
}

std::array<Mat9, 3> bare_dipole_operator(double d_x, double d_y) {
  // Per defect: d_x x (|x><g| + h.c.) + d_y y (|y><g| + h.c.).
  std::array<Mat9, 3> D{Mat9::Zero(), Mat9::Zero(), Mat9::Zero()};
  const double d[3] = {0, d_x, d_y};
  for (int comp = 0; comp < 2; ++comp) {
    const int e = comp == 0 ? kX : kY;
    for (int other = 0; other < 3; ++other) {
      // defect alpha g <-> e, beta spectator
      int a = product_index(kG, other), b = product_index(e, other);
      D[comp](a, b) += d[e];
      D[comp](b, a) += d[e];
      // defect beta g <-> e, alpha spectator
      a = product_index(other, kG), b = product_index(other, e);
      D[comp](a, b) += d[e];
      D[comp](b, a) += d[e];
    }
  }
  return D;
}

namespace {

std::array<Mat9, 3> eigenbasis_dipoles(const Eigensystem& es, double d_x, double d_y) {
  auto D = bare_dipole_operator(d_x, d_y);
  for (auto& m : D) m = es.vectors.transpose() * m * es.vectors;
  return D;
}

}  // namespace

Eigen::Vector3d dipole_element(const Eigensystem& es, double d_x, double d_y, Level a, Level b) {
  const auto M = eigenbasis_dipoles(es, d_x, d_y);
  return {M[0](idx(b), idx(a)), M[1](idx(b), idx(a)), M[2](idx(b), idx(a))};
}

std::vector<DipoleElement> transition_dipoles(const Eigensystem& es, double d_x, double d_y) {
  const auto M = eigenbasis_dipoles(es, d_x, d_y);
  std::vector<DipoleElement> out;
  for (int a = 0; a < kLevels; ++a)
    for (int b = a + 1; b < kLevels; ++b) {
      const Eigen::Vector3d m(M[0](b, a), M[1](b, a), M[2](b, a));
      if (m.cwiseAbs().maxCoeff() > 1e-12) out.push_back({Level(a), Level(b), m});
    }
  return out;
}

CascadeFrequencies cascade_frequencies(const Eigensystem& es) {
  const auto E = [&](Level l) { return es.energies(idx(l)); };
  CascadeFrequencies f;
  f.omega_X1 = E(Level::x_S) - E(Level::g);
  f.omega_Y1 = E(Level::y_S) - E(Level::g);
  f.omega_X2 = E(Level::xy_S) - E(Level::y_S);
  f.omega_Y2 = E(Level::xy_S) - E(Level::x_S);
  f.omega_xyS = E(Level::xy_S) - E(Level::g);
  return f;
}

double DecayRates::max() const { return std::max({gamma_g_xS, gamma_g_yS, gamma_xS_xyS, gamma_yS_xyS}); }

DecayRates decay_rates(const Eigensystem& es, const DefectPairConfig& c) {
  const auto d2 = [&](Level a, Level b) { return dipole_element(es, c.d_x, c.d_y, a, b).squaredNorm(); };
  const double ref = d2(Level::g, Level::y_S);
  if (!(ref > 1e-24))
    throw DomainError("reference transition g <-> y_S is dark (d_y = 0); decay rates undefined");
  const double s = c.gamma_ref_ueV / ref;
  DecayRates r;
  r.gamma_g_yS = c.gamma_ref_ueV;
  r.gamma_g_xS = s * d2(Level::g, Level::x_S);
  r.gamma_xS_xyS = s * d2(Level::x_S, Level::xy_S);
  r.gamma_yS_xyS = s * d2(Level::y_S, Level::xy_S);
  return r;
}

CoupledSystem build_system(const DefectPairConfig& c) {
  CoupledSystem sys;
  sys.config = c;
  sys.J = dipole_coupling(c);
  sys.H = build_hamiltonian(c);
  sys.eig = eigensystem(sys.H);
  sys.dipoles = transition_dipoles(sys.eig, c.d_x, c.d_y);
  sys.cascade = cascade_frequencies(sys.eig);
  sys.rates = decay_rates(sys.eig, c);
  return sys;
}

DefectPairConfig PhysicalParams::resolve() const {
  DefectPairConfig c;
  c.d_x = d_x_eA;
  c.d_y = d_y_eA;
  c.separation_nm = separation_nm;
  c.epsilon_r = epsilon_r;
  c.axis = axis;
  c.gamma_ref_ueV = gamma_ref_ueV;
  if (anchor.mode == EnergyAnchor::Mode::bare) {
    c.omega_x = anchor.omega_x_eV;
    c.omega_y = anchor.omega_y_eV;
    return c;
  }
  // Couplings do not depend on the transition energies.
  c.omega_x = c.omega_y = 1.0;
  const CouplingEnergies J = dipole_coupling(c);
  c.omega_y = anchor.omega_yS_eV - units::from_ueV(J.J_yy);
  c.omega_x = anchor.omega_yS_eV + units::from_ueV(anchor.omega_xS_offset_ueV) - units::from_ueV(J.J_xx);
  return c;
}

PhysicalParams PhysicalParams::to_symmetric() const {
  if (anchor.mode == EnergyAnchor::Mode::symmetric) return *this;
  const CouplingEnergies J = dipole_coupling(resolve());
  PhysicalParams p = *this;
  p.anchor.mode = EnergyAnchor::Mode::symmetric;
  p.anchor.omega_yS_eV = anchor.omega_y_eV + units::from_ueV(J.J_yy);
  p.anchor.omega_xS_offset_ueV =
      units::to_ueV(anchor.omega_x_eV + units::from_ueV(J.J_xx) - p.anchor.omega_yS_eV);
  return p;
}

}  // namespace defect_cascade
