#pragma once

#include <Eigen/Core>

namespace aghqmm {

/// One-dimensional Gauss--Hermite rule for the weight function exp(-x^2).
struct QuadRule1D {
  int k;
  Eigen::VectorXd nodes;    // ascending, symmetric about zero
  Eigen::VectorXd weights;  // positive, sum to sqrt(pi)
};

/// Adapted d-dimensional product rule. Points are sqrt(2) * tensor products
/// of the 1-d nodes; weights carry the exp(z'z/2) adaptation factor so that
/// sum_z w(z) * N(z; 0, I) == 1 exactly up to the degree of the base rule.
struct AdaptedRuleD {
  int d;
  int k;
  Eigen::MatrixXd points;       // k^d x d, row-major over axes (axis 1 slowest)
  Eigen::VectorXd log_weights;  // log w(z), length k^d
};

/// Nodes and weights via Golub-Welsch on the Jacobi matrix. 1 <= k <= 64.
QuadRule1D gh_rule_1d(int k);

/// Product extension with the standard-Gaussian adaptation. 1 <= d <= 5.
AdaptedRuleD adapt_rule(int d, int k);

}  // namespace aghqmm
