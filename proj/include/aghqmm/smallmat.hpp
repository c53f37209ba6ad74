#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <vector>

namespace aghqmm {

/// Trial point with a non-concave joint log-likelihood; the caller backs off.
struct NotPositiveDefinite : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Stack of symmetric d x d matrices, the l-th being dH/d(theta,u)_l.
using DerivStack = std::vector<Eigen::MatrixXd>;

/// Lower Cholesky factor of a symmetric positive definite matrix.
/// Throws NotPositiveDefinite on a non-positive pivot.
Eigen::MatrixXd cholesky(const Eigen::MatrixXd& H);

/// v = L^{-1} z by forward substitution.
Eigen::VectorXd forward_solve(const Eigen::MatrixXd& L, const Eigen::VectorXd& z);

/// Forward substitution with derivative: v = L^{-1} z and g = d(L^{-1}z)/dL_{rs},
/// for a single lower-triangle index (r, s), 0-based, s <= r.
void forward_solve_grad(const Eigen::MatrixXd& L, const Eigen::VectorXd& z, int r, int s,
                        Eigen::VectorXd& v, Eigen::VectorXd& g);

/// (L L^T)^{-1} B via forward then backward substitution.
Eigen::MatrixXd solve_spd(const Eigen::MatrixXd& L, const Eigen::MatrixXd& B);

/// sum_j log L_jj. Throws std::domain_error on a non-positive diagonal.
double logdet_chol(const Eigen::MatrixXd& L);

/// Reverse-mode differentiation through the Cholesky factor of H(theta, u):
/// given F_{jl} = df/dL_{jl} and the stack H'_l = dH/d(theta,u)_l, returns
/// the vector with l-th entry d f(L(theta,u)) / d(theta,u)_l, holding all
/// non-Cholesky occurrences of (theta, u) fixed.
Eigen::VectorXd chol_reverse(const Eigen::MatrixXd& L, const Eigen::MatrixXd& F,
                             const DerivStack& H_prime);

}  // namespace aghqmm
