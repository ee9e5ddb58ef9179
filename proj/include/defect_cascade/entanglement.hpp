#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace defect_cascade {

struct SchmidtSpectrum {
  Eigen::VectorXd lambdas;    // descending, nonnegative
  Eigen::MatrixXcd modes_X;   // columns psi_n over the x axis (empty if not requested)
  Eigen::MatrixXcd modes_Y;   // columns phi_n over the y axis, c = sum lambda_n psi_n phi_n^T
  bool renormalized = false;  // input was not unit norm and was rescaled
};

// SVD of the amplitude matrix. Inputs off unit norm by more than 1e-10 are
// renormalized and flagged.
SchmidtSpectrum schmidt_decompose(const Eigen::MatrixXcd& c, bool with_modes = false);

// -sum lambda^2 log2 lambda^2, with 0 log 0 = 0.
double entropy(const Eigen::VectorXd& lambdas);

struct BellMetrics {
  double eta = 0;
  double fidelity = 0;
};

// eta = l0^2 + l1^2, F = (l0 + l1)^2 / (2 (l0^2 + l1^2)); missing values are zero.
BellMetrics bell_metrics(const Eigen::VectorXd& lambdas);

struct EntanglementMetrics {
  double S_bits = 0;
  double eta = 0;
  double fidelity = 0;
  std::vector<double> lambda_head;
};

inline constexpr std::size_t kLambdaHead = 8;

EntanglementMetrics entanglement_metrics(const SchmidtSpectrum& s, std::size_t head = kLambdaHead);

}  // namespace defect_cascade
