#pragma once

// Energies are in eV internally and hbar = 1, so time is in hbar/eV.
namespace defect_cascade::units {

// e^2 / (4 pi eps0) in eV * Angstrom.
inline constexpr double coulomb_eV_A = 14.3996;
inline constexpr double ueV = 1e-6;  // 1 micro-eV in eV
inline constexpr double nm_in_A = 10.0;

inline constexpr double from_ueV(double x) { return x * ueV; }
inline constexpr double to_ueV(double eV) { return eV / ueV; }

}  // namespace defect_cascade::units
