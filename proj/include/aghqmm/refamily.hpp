#pragma once

#include <Eigen/Core>
#include <utility>

#include "aghqmm/smallmat.hpp"

namespace aghqmm {

/// Inverse log-Cholesky parameterization of the random-effects precision:
/// Sigma^{-1} = A D A^T with D = diag(exp(delta)) and A unit lower triangular
/// holding phi in column-major order below the diagonal. Any real (delta, phi)
/// is valid.
struct RePar {
  Eigen::VectorXd delta;  // length d
  Eigen::VectorXd phi;    // length r = d(d-1)/2

  int dim() const { return static_cast<int>(delta.size()); }
  int r() const { return static_cast<int>(phi.size()); }

  static RePar identity(int d);

  Eigen::MatrixXd unit_lower() const;  // A
  Eigen::MatrixXd precision() const;   // A D A^T, assembled without any decomposition
};

/// Value and all derivative blocks of log g(u; sigma) needed by the gradient
/// algorithm. Cross blocks are stored column-per-coordinate: hess_du.col(j) is
/// d^2 log g / du ddelta_j, hess_pu.col(j) is d^2 log g / dphi du_j.
struct LogDensityBundle {
  double value;
  Eigen::VectorXd grad_u;      // d
  Eigen::VectorXd grad_delta;  // d
  Eigen::VectorXd grad_phi;    // r
  Eigen::MatrixXd hess_uu;     // d x d, equals -A D A^T
  Eigen::VectorXd hess_dd;     // d, the diagonal d^2/ddelta_j^2 (off-diagonal is zero)
  Eigen::MatrixXd hess_pp;     // r x r
  Eigen::MatrixXd hess_du;     // d x d
  Eigen::MatrixXd hess_pu;     // r x d
  Eigen::MatrixXd hess_dp;     // d x r, row j is d^2/ddelta_j dphi
};

/// S(u) with A^T u = u + S(u) phi, identically in phi.
Eigen::MatrixXd selection_matrix(const Eigen::VectorXd& u);

/// dS(u)/du_l, a 0/1 matrix. l is 0-based.
Eigen::MatrixXd selection_matrix_deriv(int d, int l);

/// Location (i, j), 1-based with j < i, of phi_l (l in 1..r) in A.
std::pair<int, int> phi_position(int d, int l);

LogDensityBundle log_density_bundle(const Eigen::VectorXd& u, const RePar& par);

/// d(A D A^T)/ddelta_l for l = 1..d followed by d(A D A^T)/dphi_l for l = 1..r.
DerivStack precision_derivs(const RePar& par);

}  // namespace aghqmm
