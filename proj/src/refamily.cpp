#include "aghqmm/refamily.hpp"

#include <cmath>
#include <stdexcept>

namespace aghqmm {

RePar RePar::identity(int d) {
  RePar par;
  par.delta = Eigen::VectorXd::Zero(d);
  par.phi = Eigen::VectorXd::Zero(d * (d - 1) / 2);
  return par;
}

Eigen::MatrixXd RePar::unit_lower() const {
  const int d = dim();
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(d, d);
  int l = 0;
  for (int j = 0; j < d; ++j)
    for (int i = j + 1; i < d; ++i) A(i, j) = phi(l++);
  return A;
}

Eigen::MatrixXd RePar::precision() const {
  const Eigen::MatrixXd A = unit_lower();
  return A * delta.array().exp().matrix().asDiagonal() * A.transpose();
}

Eigen::MatrixXd selection_matrix(const Eigen::VectorXd& u) {
  const int d = static_cast<int>(u.size());
  const int r = d * (d - 1) / 2;
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(d, r);
  int i = 0, j = 1;
  for (int k = 0; k < r; ++k) {
    if ((k + 1) % (d - i) == 0) {
      ++i;
      j = i + 1;
    }
    S(i, k) = u(j);
    ++j;
  }
  return S;
}

Eigen::MatrixXd selection_matrix_deriv(int d, int l) {
  if (l < 0 || l >= d) throw std::invalid_argument("selection_matrix_deriv: l out of range");
  const int r = d * (d - 1) / 2;
  Eigen::MatrixXd dS = Eigen::MatrixXd::Zero(d, r);
  int i = 0, j = 1;
  for (int k = 0; k < r; ++k) {
    if ((k + 1) % (d - i) == 0) {
      ++i;
      j = i + 1;
    }
    if (j == l) dS(i, k) = 1.0;
    ++j;
  }
  return dS;
}

std::pair<int, int> phi_position(int d, int l) {
  const int r = d * (d - 1) / 2;
  if (l < 1 || l > r) throw std::invalid_argument("phi_position: l out of range");
  int count = 0;
  for (int j = 1; j < d; ++j)
    for (int i = j + 1; i <= d; ++i)
      if (++count == l) return {i, j};
  throw std::logic_error("phi_position: unreachable");
}

LogDensityBundle log_density_bundle(const Eigen::VectorXd& u, const RePar& par) {
  const int d = par.dim();
  const int r = par.r();
  const Eigen::MatrixXd A = par.unit_lower();
  const Eigen::MatrixXd S = selection_matrix(u);
  const Eigen::VectorXd D = par.delta.array().exp();
  const Eigen::VectorXd w = u + S * par.phi;  // equals A^T u
  const Eigen::VectorXd Dw = D.cwiseProduct(w);

  LogDensityBundle out;
  out.value = -0.5 * d * std::log(2.0 * M_PI) + 0.5 * par.delta.sum() - 0.5 * w.dot(Dw);
  out.grad_u = -(A * Dw);
  out.grad_delta = 0.5 * (Eigen::VectorXd::Ones(d) - D.cwiseProduct(w.cwiseAbs2()));
  out.grad_phi = -(S.transpose() * Dw);
  out.hess_uu = -(A * D.asDiagonal() * A.transpose());
  out.hess_dd = -0.5 * D.cwiseProduct(w.cwiseAbs2());
  out.hess_pp = -(S.transpose() * D.asDiagonal() * S);
  out.hess_du.resize(d, d);
  out.hess_dp.resize(d, r);
  out.hess_pu.resize(r, d);
  for (int j = 0; j < d; ++j) {
    out.hess_du.col(j) = -D(j) * w(j) * A.col(j);
    out.hess_dp.row(j) = -D(j) * w(j) * S.row(j);
    const Eigen::MatrixXd dS = selection_matrix_deriv(d, j);
    Eigen::VectorXd dw = Eigen::VectorXd::Zero(d);  // dw/du_j = e_j + dS/du_j phi
    dw(j) = 1.0;
    dw += dS * par.phi;
    out.hess_pu.col(j) = -(dS.transpose() * Dw + S.transpose() * D.cwiseProduct(dw));
  }
  return out;
}

DerivStack precision_derivs(const RePar& par) {
  const int d = par.dim();
  const int r = par.r();
  const Eigen::MatrixXd A = par.unit_lower();
  const Eigen::VectorXd D = par.delta.array().exp();

  DerivStack out;
  out.reserve(d + r);
  for (int l = 0; l < d; ++l) out.push_back(D(l) * A.col(l) * A.col(l).transpose());
  // (dA/dphi_l) D A^T is the zero matrix with row j of D A^T written into row i
  const Eigen::MatrixXd DAt = D.asDiagonal() * A.transpose();
  for (int l = 1; l <= r; ++l) {
    const auto [i, j] = phi_position(d, l);
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(d, d);
    M.row(i - 1) = DAt.row(j - 1);
    out.push_back(M + M.transpose());
  }
  return out;
}

}  // namespace aghqmm
