#pragma once

#include <Eigen/Dense>

#include <array>
#include <string>
#include <vector>

namespace defect_cascade {

using Mat9 = Eigen::Matrix<double, 9, 9>;
using Vec9 = Eigen::Matrix<double, 9, 1>;

// Physical inputs of two identical three-level defects.
struct DefectPairConfig {
  double omega_x = 2.0;                           // eV, bare x-excited energy
  double omega_y = 2.0;                           // eV, bare y-excited energy
  double d_x = 1.0;                               // e*A
  double d_y = 1.0;                               // e*A
  double separation_nm = 5.0;                     // |r_alpha - r_beta|
  double epsilon_r = 2.0;                         // host relative permittivity
  Eigen::Vector3d axis = Eigen::Vector3d::UnitX();  // unit vector along r_alpha - r_beta
  double gamma_ref_ueV = 0.2;                     // decay rate of the g <-> y_S line
};

// Violations of the config invariants (empty when valid).
std::vector<std::string> config_issues(const DefectPairConfig& c);
// Soft warnings, e.g. coupling or decay energies not small against the transition energies.
std::vector<std::string> config_warnings(const DefectPairConfig& c);
// Throws DomainError listing every violation.
void require_valid(const DefectPairConfig& c);

// Signed pair couplings in micro-eV.
struct CouplingEnergies {
  double J_xx = 0, J_yy = 0, J_xy = 0, J_yx = 0;
};

CouplingEnergies dipole_coupling(const DefectPairConfig& c);

// Product basis order: |rs> = |r on alpha>|s on beta>.
enum class Product : int { gg = 0, gx, xg, gy, yg, xx, xy, yx, yy };

// Eigenstate labels in table order.
enum class Level : int { g = 0, y_A, y_S, x_S, x_A, yy, xy_S, xy_A, xx };
inline constexpr int kLevels = 9;
const char* level_name(Level l);
constexpr int idx(Level l) { return static_cast<int>(l); }
constexpr int idx(Product p) { return static_cast<int>(p); }

// 9x9 real symmetric electronic Hamiltonian in eV.
Mat9 build_hamiltonian(const DefectPairConfig& c);

// Labelled eigen-decomposition: column idx(l) of `vectors` is level l, energies likewise.
struct Eigensystem {
  Vec9 energies;
  Mat9 vectors;
};

Eigensystem eigensystem(const Mat9& H);

// Reference combinations of the labelled levels in the product basis (columns by Level).
Mat9 reference_states();

struct DipoleElement {
  Level initial;
  Level final_;
  Eigen::Vector3d moment;  // e*A
};

// Cartesian dipole operator components in the product basis.
std::array<Mat9, 3> bare_dipole_operator(double d_x, double d_y);

// All nonzero (above 1e-12 e*A) matrix elements between labelled levels, initial < final.
std::vector<DipoleElement> transition_dipoles(const Eigensystem& es, double d_x, double d_y);
Eigen::Vector3d dipole_element(const Eigensystem& es, double d_x, double d_y, Level a, Level b);

// Photon energies (eV) of the four cascade lines.
struct CascadeFrequencies {
  double omega_X1 = 0;  // x_S -> g
  double omega_X2 = 0;  // xy_S -> y_S
  double omega_Y1 = 0;  // y_S -> g
  double omega_Y2 = 0;  // xy_S -> x_S
  double omega_xyS = 0;
  // omega_Y2 - omega_Y1 (eV); equals omega_X2 - omega_X1.
  double splitting() const { return omega_Y2 - omega_Y1; }
};

CascadeFrequencies cascade_frequencies(const Eigensystem& es);

// Amplitude decay rates in micro-eV.
struct DecayRates {
  double gamma_g_xS = 0, gamma_g_yS = 0, gamma_xS_xyS = 0, gamma_yS_xyS = 0;
  // Decay rate of the doubly excited state.
  double total() const { return gamma_xS_xyS + gamma_yS_xyS; }
  double max() const;
};

// Rates scale with |d_op|^2 relative to the g <-> y_S line.
DecayRates decay_rates(const Eigensystem& es, const DefectPairConfig& c);

struct CoupledSystem {
  DefectPairConfig config;
  CouplingEnergies J;
  Mat9 H;
  Eigensystem eig;
  std::vector<DipoleElement> dipoles;
  CascadeFrequencies cascade;
  DecayRates rates;

  double energy(Level l) const { return eig.energies(idx(l)); }
};

CoupledSystem build_system(const DefectPairConfig& c);

// How the absolute energies are pinned: bare single-defect energies, or the
// symmetric eigenenergies (omega_yS and omega_xS - omega_yS) held fixed.
struct EnergyAnchor {
  enum class Mode { bare, symmetric };
  Mode mode = Mode::symmetric;
  double omega_x_eV = 0, omega_y_eV = 0;
  double omega_yS_eV = 2.0, omega_xS_offset_ueV = 10.0;
};

struct PhysicalParams {
  EnergyAnchor anchor;
  double d_x_eA = 1.0, d_y_eA = 1.0;
  double separation_nm = 5.0, epsilon_r = 2.0;
  Eigen::Vector3d axis = Eigen::Vector3d::UnitX();
  double gamma_ref_ueV = 0.2;

  // Bare-energy config; a symmetric anchor subtracts the diagonal couplings.
  DefectPairConfig resolve() const;
  // Same physics expressed with a symmetric anchor.
  PhysicalParams to_symmetric() const;
};

}  // namespace defect_cascade
