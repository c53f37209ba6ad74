#include "aghqmm/quadrature.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <stdexcept>

namespace aghqmm {

QuadRule1D gh_rule_1d(int k) {
  if (k < 1 || k > 64) throw std::invalid_argument("gh_rule_1d: k must be in [1, 64]");

  QuadRule1D rule;
  rule.k = k;
  if (k == 1) {
    rule.nodes = Eigen::VectorXd::Zero(1);
    rule.weights = Eigen::VectorXd::Constant(1, std::sqrt(M_PI));
    return rule;
  }

  // Jacobi matrix of the (physicists') Hermite polynomials: zero diagonal,
  // off-diagonal sqrt(i/2). Eigenvalues are the nodes; weights come from the
  // squared first components of the normalized eigenvectors.
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(k, k);
  for (int i = 1; i < k; ++i) {
    const double b = std::sqrt(i / 2.0);
    jacobi(i, i - 1) = b;
    jacobi(i - 1, i) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
  rule.nodes = eig.eigenvalues();
  rule.weights.resize(k);
  const double mu0 = std::sqrt(M_PI);  // integral of exp(-x^2)
  for (int i = 0; i < k; ++i) {
    const double v0 = eig.eigenvectors()(0, i);
    rule.weights(i) = mu0 * v0 * v0;
  }

  // Symmetrize: the exact rule is symmetric about zero, so average the
  // paired eigenvalues and pin the middle node of odd rules at zero.
  for (int i = 0; i < k / 2; ++i) {
    const int j = k - 1 - i;
    const double x = 0.5 * (rule.nodes(j) - rule.nodes(i));
    rule.nodes(i) = -x;
    rule.nodes(j) = x;
    const double w = 0.5 * (rule.weights(i) + rule.weights(j));
    rule.weights(i) = w;
    rule.weights(j) = w;
  }
  if (k % 2 == 1) rule.nodes(k / 2) = 0.0;
  return rule;
}

AdaptedRuleD adapt_rule(int d, int k) {
  if (d < 1 || d > 5) throw std::invalid_argument("adapt_rule: d must be in [1, 5]");
  const QuadRule1D base = gh_rule_1d(k);
  if (d * std::log(static_cast<double>(k)) > std::log(1e7))
    throw std::invalid_argument("adapt_rule: k^d too large");

  long total = 1;
  for (int a = 0; a < d; ++a) total *= k;

  AdaptedRuleD rule;
  rule.d = d;
  rule.k = k;
  rule.points.resize(total, d);
  rule.log_weights.resize(total);

  Eigen::VectorXd logw1(k);
  for (int i = 0; i < k; ++i) logw1(i) = std::log(base.weights(i));

  const double sqrt2 = std::sqrt(2.0);
  for (long idx = 0; idx < total; ++idx) {
    // row-major enumeration: axis 0 (spec's axis 1) varies slowest
    long rem = idx;
    double logw = 0.5 * d * std::log(2.0);
    double sq = 0.0;
    for (int a = d - 1; a >= 0; --a) {
      const int sub = static_cast<int>(rem % k);
      rem /= k;
      const double z = sqrt2 * base.nodes(sub);
      rule.points(idx, a) = z;
      logw += logw1(sub);
      sq += z * z;
    }
    rule.log_weights(idx) = logw + 0.5 * sq;
  }
  return rule;
}

}  // namespace aghqmm
