#pragma once

#include <Eigen/Core>
#include <functional>
#include <vector>

#include "aghqmm/refamily.hpp"
#include "aghqmm/smallmat.hpp"

namespace aghqmm {

/// Canonical-link response family. The dispersion parameter is fixed.
struct Family {
  enum class Kind { BernoulliLogit, GaussianIdentity, ExpFamGeneric };
  Kind kind = Kind::BernoulliLogit;

  // ExpFamGeneric only: cumulant function and its first three derivatives.
  std::function<double(double)> b, b1, b2, b3;
  double dispersion = 1.0;

  static Family bernoulli() { return Family{Kind::BernoulliLogit, {}, {}, {}, {}, 1.0}; }
  static Family gaussian() { return Family{Kind::GaussianIdentity, {}, {}, {}, {}, 1.0}; }
  static Family expfam(std::function<double(double)> b, std::function<double(double)> b1,
                       std::function<double(double)> b2, std::function<double(double)> b3,
                       double dispersion = 1.0) {
    return Family{Kind::ExpFamGeneric, std::move(b), std::move(b1), std::move(b2),
                  std::move(b3), dispersion};
  }
};

/// Per-observation log-density and its first three derivatives in eta.
void eta_derivs(const Family& family, double y, double eta, double& l0, double& l1,
                double& l2, double& l3);

struct GroupData {
  Eigen::VectorXd y;  // n_i
  Eigen::MatrixXd X;  // n_i x q
  Eigen::MatrixXd V;  // n_i x d
  int n() const { return static_cast<int>(y.size()); }
};

struct Dataset {
  Family family;
  std::vector<GroupData> groups;
  int q = 0;
  int d = 0;
  int m() const { return static_cast<int>(groups.size()); }
};

/// theta = (beta, delta, phi), flattened in that order; p = q + d(d+1)/2.
struct ParamVector {
  Eigen::VectorXd beta;
  RePar repar;

  int q() const { return static_cast<int>(beta.size()); }
  int d() const { return repar.dim(); }
  int p() const { return q() + d() + repar.r(); }

  Eigen::VectorXd flatten() const;
  static ParamVector unflatten(const Eigen::VectorXd& theta, int q, int d);
};

/// Joint log-likelihood of one group and its gradient over the stacked
/// coordinates (beta, delta, phi, u), length p + d.
struct JointBundle {
  double value;
  Eigen::VectorXd grad;
};

JointBundle group_joint(const ParamVector& theta, const Eigen::VectorXd& u,
                        const Family& family, const GroupData& group);

/// H = -d^2_u log pi_i (d x d, SPD for canonical links) and the cross block
/// C = d^2 log pi_i / du dtheta^T (d x p).
void group_hessian_blocks(const ParamVector& theta, const Eigen::VectorXd& u,
                          const Family& family, const GroupData& group,
                          Eigen::MatrixXd& H, Eigen::MatrixXd& C);

/// The p + d slices dH/d(beta, delta, phi, u)_l of H = -d^2_u log pi_i.
DerivStack group_third_stack(const ParamVector& theta, const Eigen::VectorXd& u,
                             const Family& family, const GroupData& group);

}  // namespace aghqmm
