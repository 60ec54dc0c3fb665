#include "stblsim/quadrature.hpp"

#include <map>
#include <memory>
#include <mutex>

#include <Eigen/Eigenvalues>

namespace stblsim {

void QuadratureSpec::validate() const {
  if (node_count < 8)
    throw ModelError(ErrorKind::Config, "quadrature.node_count: must be >= 8");
  if (!(abs_tol > 0.0) || !(rel_tol > 0.0))
    throw ModelError(ErrorKind::Config, "quadrature tolerances must be > 0");
  if (!(tail_mass > 0.0) || tail_mass >= 1.0)
    throw ModelError(ErrorKind::Config,
                     "quadrature.tail_mass: must lie in (0, 1)");
  if (max_panels < 1)
    throw ModelError(ErrorKind::Config, "quadrature.max_panels: must be >= 1");
}

namespace {

GaussRule golub_welsch(int n) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    const double b = k / std::sqrt(4.0 * k * k - 1.0);
    J(k, k - 1) = b;
    J(k - 1, k) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  GaussRule rule;
  rule.nodes = es.eigenvalues().array();
  rule.weights = 2.0 * es.eigenvectors().row(0).transpose().array().square();
  // symmetrize to remove eigen-solver noise
  for (int i = 0; i < n / 2; ++i) {
    const int j = n - 1 - i;
    const double x = 0.5 * (rule.nodes[j] - rule.nodes[i]);
    const double w = 0.5 * (rule.weights[i] + rule.weights[j]);
    rule.nodes[i] = -x;
    rule.nodes[j] = x;
    rule.weights[i] = rule.weights[j] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

}  // namespace

const GaussRule& gauss_legendre(int n) {
  static std::mutex mu;
  static std::map<int, std::unique_ptr<GaussRule>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<GaussRule>(golub_welsch(n));
  return *slot;
}

}  // namespace stblsim
