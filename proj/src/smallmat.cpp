#include "aghqmm/smallmat.hpp"

#include <cmath>

namespace aghqmm {

Eigen::MatrixXd cholesky(const Eigen::MatrixXd& H) {
  const int d = static_cast<int>(H.rows());
  if (H.cols() != d) throw std::invalid_argument("cholesky: matrix not square");
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(d, d);
  for (int j = 0; j < d; ++j) {
    double piv = H(j, j);
    for (int k = 0; k < j; ++k) piv -= L(j, k) * L(j, k);
    if (!(piv > 0.0)) throw NotPositiveDefinite("cholesky: non-positive pivot");
    L(j, j) = std::sqrt(piv);
    for (int i = j + 1; i < d; ++i) {
      double s = H(i, j);
      for (int k = 0; k < j; ++k) s -= L(i, k) * L(j, k);
      L(i, j) = s / L(j, j);
    }
  }
  return L;
}

Eigen::VectorXd forward_solve(const Eigen::MatrixXd& L, const Eigen::VectorXd& z) {
  const int d = static_cast<int>(L.rows());
  Eigen::VectorXd v = z;
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < i; ++j) v(i) -= L(i, j) * v(j);
    v(i) /= L(i, i);
  }
  return v;
}

void forward_solve_grad(const Eigen::MatrixXd& L, const Eigen::VectorXd& z, int r, int s,
                        Eigen::VectorXd& v, Eigen::VectorXd& g) {
  const int d = static_cast<int>(L.rows());
  if (r < 0 || r >= d || s < 0 || s > r)
    throw std::invalid_argument("forward_solve_grad: (r, s) not in the lower triangle");
  v = z;
  g = Eigen::VectorXd::Zero(d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < i; ++j) {
      v(i) -= L(i, j) * v(j);
      g(i) -= L(i, j) * g(j);
      if (i == r && j == s) g(i) -= v(j);
    }
    if (L(i, i) == 0.0) throw std::domain_error("forward_solve_grad: zero diagonal");
    v(i) /= L(i, i);
    g(i) /= L(i, i);
    if (i == r && r == s) g(i) -= v(i) / L(i, i);
  }
}

Eigen::MatrixXd solve_spd(const Eigen::MatrixXd& L, const Eigen::MatrixXd& B) {
  const int d = static_cast<int>(L.rows());
  if (B.rows() != d) throw std::invalid_argument("solve_spd: dimension mismatch");
  Eigen::MatrixXd X = B;
  for (int c = 0; c < X.cols(); ++c) {
    for (int i = 0; i < d; ++i) {  // forward: L y = b
      for (int j = 0; j < i; ++j) X(i, c) -= L(i, j) * X(j, c);
      X(i, c) /= L(i, i);
    }
    for (int i = d - 1; i >= 0; --i) {  // backward: L^T x = y
      for (int j = i + 1; j < d; ++j) X(i, c) -= L(j, i) * X(j, c);
      X(i, c) /= L(i, i);
    }
  }
  return X;
}

double logdet_chol(const Eigen::MatrixXd& L) {
  double out = 0.0;
  for (int j = 0; j < L.rows(); ++j) {
    if (!(L(j, j) > 0.0)) throw std::domain_error("logdet_chol: non-positive diagonal");
    out += std::log(L(j, j));
  }
  return out;
}

Eigen::VectorXd chol_reverse(const Eigen::MatrixXd& L, const Eigen::MatrixXd& F,
                             const DerivStack& H_prime) {
  const int d = static_cast<int>(L.rows());
  if (F.rows() != d || F.cols() != d)
    throw std::invalid_argument("chol_reverse: F dimension mismatch");

  // Abar = L^{-T} Phi(L^T F) L^{-1}, with Phi taking the lower triangle and
  // halving the diagonal; then df/dt_l = <Abar, H'_l> for symmetric H'_l.
  Eigen::MatrixXd P = (L.transpose() * F).eval();
  for (int j = 0; j < d; ++j) {
    P(j, j) *= 0.5;
    for (int i = 0; i < j; ++i) P(i, j) = 0.0;
  }
  const auto Lt = L.transpose().triangularView<Eigen::Upper>();
  Eigen::MatrixXd Abar = Lt.solve(P);              // L^{-T} P
  Abar = Lt.solve(Abar.transpose()).transpose();   // (L^{-T} (L^{-T} P)^T)^T = Abar L^{-1}

  Eigen::VectorXd out(static_cast<int>(H_prime.size()));
  for (std::size_t l = 0; l < H_prime.size(); ++l) {
    if (H_prime[l].rows() != d || H_prime[l].cols() != d)
      throw std::invalid_argument("chol_reverse: H_prime dimension mismatch");
    out(static_cast<int>(l)) = (Abar.array() * H_prime[l].array()).sum();
  }
  return out;
}

}  // namespace aghqmm
