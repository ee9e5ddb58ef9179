#pragma once

#include "defect_cascade/dynamics_oracle.hpp"
#include "defect_cascade/physics_core.hpp"
#include "defect_cascade/sweep_engine.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace defect_cascade {

struct OperatingPointOptions {
  double eta_min = 0.9;
  double f_min = 0.9;
  double d_x_lo = 0.0;  // e*A; 0 selects the degeneracy point
  double d_x_hi = 0.0;  // e*A; 0 selects the base d_x
  int scan_points = 41;
};

struct SweepOptions {
  SweepParameter parameter = SweepParameter::d_x;
  std::vector<double> values;
  bool auto_center = true;
  std::optional<OperatingPointOptions> operating_point;
};

struct PumpOptions {
  DriveParams drive;
  double duration_tau = 1.0;  // run length in units of tau_drive
  int n_samples = 8001;
};

struct ValidateOptions {
  enum class Oracle { markov, unitary } oracle = Oracle::markov;
  double t_end_gamma = 20;           // markov: t_end = t_end_gamma / gamma_total
  double recurrence_fraction = 0.97;  // unitary: t_end = fraction * 2 pi / delta
  double tolerance = 1e-3;
};

struct OutputOptions {
  std::string directory = "out";
  bool csv = true;
  bool json = true;
};

struct RunConfig {
  PhysicalParams physical;
  GridPolicy grid;
  std::optional<SweepOptions> sweep;
  PumpOptions pump;
  ValidateOptions validate;
  OutputOptions output;
  std::string canonical;  // normalized JSON text, input to the config hash
};

// Validates the whole document and throws ConfigError listing every violation.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

std::uint64_t fnv1a64(std::string_view bytes);
// Shortest exact form is not required; 17 significant digits round-trips.
std::string format_double(double v);

struct DispatchOptions {
  std::string out_dir;  // empty: use the config's output.directory
  std::optional<int> grid_points;
  bool seedless = false;
};

enum ExitCode : int { kOk = 0, kConfigError = 1, kNumericError = 2, kValidationFailed = 3 };

inline constexpr const char* kSubcommands[] = {"spectra", "schmidt", "sweep", "pump", "validate"};

// Runs one subcommand and writes its artifacts plus manifest.json.
int dispatch(const std::string& subcommand, const RunConfig& cfg, const DispatchOptions& opt, std::ostream& log);

std::string usage();
// Entry point of the command-line tool.
int run_cli(int argc, char** argv);

}  // namespace defect_cascade
