#include "aghqmm/model.hpp"

#include <cmath>
#include <stdexcept>

namespace aghqmm {

namespace {

inline double sigmoid(double eta) {
  if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

// log(1 + exp(eta)) without overflow; linear branch past |eta| = 30.
inline double softplus(double eta) {
  if (eta > 30.0) return eta + std::exp(-eta);
  if (eta < -30.0) return std::exp(eta);
  return std::log1p(std::exp(eta));
}

}  // namespace

void eta_derivs(const Family& family, double y, double eta, double& l0, double& l1,
                double& l2, double& l3) {
  switch (family.kind) {
    case Family::Kind::BernoulliLogit: {
      const double p = sigmoid(eta);
      l0 = y * eta - softplus(eta);
      l1 = y - p;
      l2 = -p * (1.0 - p);
      l3 = p * (1.0 - p) * (2.0 * p - 1.0);
      return;
    }
    case Family::Kind::GaussianIdentity: {
      const double res = y - eta;
      l0 = -0.5 * res * res - 0.5 * std::log(2.0 * M_PI);
      l1 = res;
      l2 = -1.0;
      l3 = 0.0;
      return;
    }
    case Family::Kind::ExpFamGeneric: {
      const double phi = family.dispersion;
      l0 = (y * eta - family.b(eta)) / phi;
      l1 = (y - family.b1(eta)) / phi;
      l2 = -family.b2(eta) / phi;
      l3 = -family.b3(eta) / phi;
      return;
    }
  }
  throw std::logic_error("eta_derivs: unknown family");
}

Eigen::VectorXd ParamVector::flatten() const {
  Eigen::VectorXd out(p());
  out << beta, repar.delta, repar.phi;
  return out;
}

ParamVector ParamVector::unflatten(const Eigen::VectorXd& theta, int q, int d) {
  const int r = d * (d - 1) / 2;
  if (theta.size() != q + d + r)
    throw std::invalid_argument("ParamVector::unflatten: length mismatch");
  ParamVector out;
  out.beta = theta.segment(0, q);
  out.repar.delta = theta.segment(q, d);
  out.repar.phi = theta.segment(q + d, r);
  return out;
}

JointBundle group_joint(const ParamVector& theta, const Eigen::VectorXd& u,
                        const Family& family, const GroupData& group) {
  const int q = theta.q();
  const int d = theta.d();
  const int r = theta.repar.r();
  const int n = group.n();

  JointBundle out;
  out.grad = Eigen::VectorXd::Zero(q + d + r + d);
  out.value = 0.0;

  const Eigen::VectorXd eta = group.X * theta.beta + group.V * u;
  for (int j = 0; j < n; ++j) {
    double l0, l1, l2, l3;
    eta_derivs(family, group.y(j), eta(j), l0, l1, l2, l3);
    out.value += l0;
    out.grad.segment(0, q) += l1 * group.X.row(j).transpose();
    out.grad.segment(q + d + r, d) += l1 * group.V.row(j).transpose();
  }

  const LogDensityBundle g = log_density_bundle(u, theta.repar);
  out.value += g.value;
  out.grad.segment(q, d) += g.grad_delta;
  out.grad.segment(q + d, r) += g.grad_phi;
  out.grad.segment(q + d + r, d) += g.grad_u;
  return out;
}

void group_hessian_blocks(const ParamVector& theta, const Eigen::VectorXd& u,
                          const Family& family, const GroupData& group,
                          Eigen::MatrixXd& H, Eigen::MatrixXd& C) {
  const int q = theta.q();
  const int d = theta.d();
  const int r = theta.repar.r();
  const int n = group.n();

  const LogDensityBundle g = log_density_bundle(u, theta.repar);
  H = -g.hess_uu;  // prior precision A D A^T
  C = Eigen::MatrixXd::Zero(d, q + d + r);
  C.block(0, q, d, d) = g.hess_du;
  C.block(0, q + d, d, r) = g.hess_pu.transpose();

  const Eigen::VectorXd eta = group.X * theta.beta + group.V * u;
  for (int j = 0; j < n; ++j) {
    double l0, l1, l2, l3;
    eta_derivs(family, group.y(j), eta(j), l0, l1, l2, l3);
    H -= l2 * group.V.row(j).transpose() * group.V.row(j);
    C.block(0, 0, d, q) += l2 * group.V.row(j).transpose() * group.X.row(j);
  }
}

DerivStack group_third_stack(const ParamVector& theta, const Eigen::VectorXd& u,
                             const Family& family, const GroupData& group) {
  const int q = theta.q();
  const int d = theta.d();
  const int r = theta.repar.r();
  const int n = group.n();

  DerivStack out(q + d + r + d, Eigen::MatrixXd::Zero(d, d));
  const Eigen::VectorXd eta = group.X * theta.beta + group.V * u;
  for (int j = 0; j < n; ++j) {
    double l0, l1, l2, l3;
    eta_derivs(family, group.y(j), eta(j), l0, l1, l2, l3);
    if (l3 == 0.0) continue;
    const Eigen::MatrixXd vv = group.V.row(j).transpose() * group.V.row(j);
    for (int l = 0; l < q; ++l) out[l] -= l3 * group.X(j, l) * vv;
    for (int l = 0; l < d; ++l) out[q + d + r + l] -= l3 * group.V(j, l) * vv;
  }
  const DerivStack prior = precision_derivs(theta.repar);
  for (int l = 0; l < d + r; ++l) out[q + l] = prior[l];
  return out;
}

}  // namespace aghqmm
