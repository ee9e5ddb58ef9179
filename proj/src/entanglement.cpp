#include "defect_cascade/entanglement.hpp"

#include "defect_cascade/error.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace defect_cascade {

SchmidtSpectrum schmidt_decompose(const Eigen::MatrixXcd& c, bool with_modes) {
  if (c.size() == 0) throw DomainError("empty amplitude matrix");
  if (!c.allFinite()) throw NumericError("amplitude matrix contains non-finite entries");
  SchmidtSpectrum s;
  const double norm = c.norm();
  if (!(norm > 0)) throw DomainError("amplitude matrix is identically zero");
  s.renormalized = std::abs(norm - 1.0) > 1e-10;
  const Eigen::MatrixXcd a = s.renormalized ? Eigen::MatrixXcd(c / norm) : c;

  const unsigned opts = with_modes ? (Eigen::ComputeThinU | Eigen::ComputeThinV) : 0u;
  Eigen::BDCSVD<Eigen::MatrixXcd> svd(a, opts);
  if (svd.info() != Eigen::Success) throw NumericError("singular value decomposition failed");
  s.lambdas = svd.singularValues();
  if (with_modes) {
    s.modes_X = svd.matrixU();
    // c = U S V^H, so the y-side modes entering c = sum l psi phi^T are conj(V).
    s.modes_Y = svd.matrixV().conjugate();
  }
  return s;
}

double entropy(const Eigen::VectorXd& lambdas) {
  double S = 0;
  for (Eigen::Index i = 0; i < lambdas.size(); ++i) {
    const double p = lambdas(i) * lambdas(i);
    if (p > 0) S -= p * std::log2(p);
  }
  return S;
}

BellMetrics bell_metrics(const Eigen::VectorXd& lambdas) {
  const double l0 = lambdas.size() > 0 ? lambdas(0) : 0.0;
  const double l1 = lambdas.size() > 1 ? lambdas(1) : 0.0;
  BellMetrics m;
  m.eta = l0 * l0 + l1 * l1;
  if (!(m.eta > 0)) throw DomainError("Bell metrics need a nonzero leading Schmidt coefficient");
  m.fidelity = 0.5 * (l0 + l1) * (l0 + l1) / m.eta;
  return m;
}

EntanglementMetrics entanglement_metrics(const SchmidtSpectrum& s, std::size_t head) {
  EntanglementMetrics m;
  m.S_bits = entropy(s.lambdas);
  const BellMetrics b = bell_metrics(s.lambdas);
  m.eta = b.eta;
  m.fidelity = b.fidelity;
  const auto n = std::min<std::size_t>(head, static_cast<std::size_t>(s.lambdas.size()));
  m.lambda_head.assign(s.lambdas.data(), s.lambdas.data() + n);
  m.lambda_head.resize(head, 0.0);
  return m;
}

}  // namespace defect_cascade
