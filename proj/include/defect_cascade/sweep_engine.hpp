#pragma once

#include "defect_cascade/cascade_amplitudes.hpp"
#include "defect_cascade/entanglement.hpp"
#include "defect_cascade/physics_core.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace defect_cascade {

enum class SweepParameter { d_x, omega_xS_offset, separation, gamma_ref };

// Config key naming the swept quantity (d_x_eA, omega_xS_offset_ueV, ...).
const char* parameter_key(SweepParameter p);
std::optional<SweepParameter> parameter_from_key(const std::string& key);

// Base parameters with the swept quantity replaced; offsets keep omega_yS fixed.
PhysicalParams with_parameter(const PhysicalParams& base, SweepParameter p, double value);

// d_x (e*A) at which omega_Y2 - omega_Y1 equals the target, other inputs fixed.
// Throws DomainError when the target needs d_x^2 < 0.
double d_x_for_splitting(const PhysicalParams& base, double splitting_ueV);

struct SweepSpec {
  SweepParameter parameter = SweepParameter::d_x;
  std::vector<double> values;
  PhysicalParams base;
  GridPolicy grid;
  bool auto_center = true;  // re-center the grid on every point; otherwise reuse the base-point grid
};

struct SweepRow {
  double value = 0;
  double splitting_ueV = 0;    // omega_Y2 - omega_Y1
  double splitting_x_ueV = 0;  // omega_X2 - omega_X1
  double S_bits = 0, eta = 0, fidelity = 0;
  std::vector<double> lambda_head;
  bool coverage_ok = true;
  bool ok = true;
  std::string error;
};

struct SweepResult {
  SweepParameter parameter = SweepParameter::d_x;
  GridPolicy grid;
  bool auto_center = true;
  std::vector<SweepRow> rows;
};

// Full pipeline for one parameter point.
SweepRow evaluate_point(const PhysicalParams& p, const GridPolicy& grid,
                        const std::optional<FrequencyGrid>& fixed_grid = std::nullopt);

// Worker count: DEFECT_CASCADE_THREADS if set (>= 1), else hardware concurrency.
unsigned sweep_threads();

// Rows come back in input order; per-point failures are recorded in the row.
SweepResult run_sweep(const SweepSpec& spec, unsigned threads = 0);

struct OperatingPoint {
  bool feasible = false;
  SweepRow best;
  std::vector<SweepRow> scan;  // coarse scan plus every refinement evaluation, by d_x
  std::string message;
};

// Maximizes F subject to eta >= eta_min over d_x in [d_x_lo, d_x_hi]; the
// result must also satisfy F >= f_min to be feasible.
OperatingPoint find_operating_point(const PhysicalParams& base, double eta_min, double f_min, double d_x_lo,
                                    double d_x_hi, const GridPolicy& grid, int scan_points = 41,
                                    unsigned threads = 0);

}  // namespace defect_cascade
