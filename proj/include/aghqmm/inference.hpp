#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "aghqmm/optimizer.hpp"

namespace aghqmm {

/// Standard normal quantile, |err| < 1e-12 over (0, 1).
double normal_quantile(double p);

struct Interval {
  std::string label;
  double estimate = 0.0;
  double se = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

/// Wald intervals theta_j +/- z_{1-alpha/2} sqrt(vcov_jj), one per coordinate
/// of theta = (beta, delta, phi).
std::vector<Interval> wald_intervals(const ParamVector& theta, const Eigen::MatrixXd& vcov,
                                     double alpha);

/// Sigma = (A D A^T)^{-1}, the random-effects covariance at (delta, phi).
Eigen::MatrixXd sigma_point(const RePar& par);

/// Jacobian of vech(Sigma) in (delta, phi): column l is the stacked lower
/// triangle (column-major, diagonal included) of -Sigma (dSigma^{-1}/dl) Sigma.
Eigen::MatrixXd sigma_jacobian(const RePar& par);

/// Delta-method intervals for the entries of Sigma. `vcov_vc` is the
/// (d + r) x (d + r) block of the parameter covariance matrix for (delta, phi).
/// Diagonal entries get symmetric intervals for log sigma_jj, exponentiated,
/// so the lower bounds stay positive; off-diagonals are symmetric as-is.
std::vector<Interval> sigma_intervals(const RePar& par, const Eigen::MatrixXd& vcov_vc,
                                      double alpha);

}  // namespace aghqmm
