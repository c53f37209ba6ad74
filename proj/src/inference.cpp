#include "aghqmm/inference.hpp"

#include <cmath>
#include <stdexcept>

#include "aghqmm/smallmat.hpp"

namespace aghqmm {

// Acklam's rational approximation, then one Halley refinement against erfc,
// which brings the error well below 1e-12.
double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("normal_quantile: p must be in (0, 1)");

  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double dd[] = {7.784695709041462e-03, 3.224671290700398e-01,
                              2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;

  double x;
  if (p < plow) {
    const double u = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * u + c[1]) * u + c[2]) * u + c[3]) * u + c[4]) * u + c[5]) /
        ((((dd[0] * u + dd[1]) * u + dd[2]) * u + dd[3]) * u + 1.0);
  } else if (p <= 1.0 - plow) {
    const double u = p - 0.5;
    const double t = u * u;
    x = (((((a[0] * t + a[1]) * t + a[2]) * t + a[3]) * t + a[4]) * t + a[5]) * u /
        (((((b[0] * t + b[1]) * t + b[2]) * t + b[3]) * t + b[4]) * t + 1.0);
  } else {
    const double u = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * u + c[1]) * u + c[2]) * u + c[3]) * u + c[4]) * u + c[5]) /
        ((((dd[0] * u + dd[1]) * u + dd[2]) * u + dd[3]) * u + 1.0);
  }

  const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  const double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

std::vector<Interval> wald_intervals(const ParamVector& theta, const Eigen::MatrixXd& vcov,
                                     double alpha) {
  const Eigen::VectorXd flat = theta.flatten();
  const int p = static_cast<int>(flat.size());
  if (vcov.rows() != p || vcov.cols() != p)
    throw std::invalid_argument("wald_intervals: vcov dimension mismatch");
  const double z = normal_quantile(1.0 - alpha / 2.0);

  std::vector<Interval> out(p);
  const int q = theta.q(), d = theta.d();
  for (int j = 0; j < p; ++j) {
    Interval& iv = out[j];
    if (j < q)
      iv.label = "beta" + std::to_string(j + 1);
    else if (j < q + d)
      iv.label = "delta" + std::to_string(j - q + 1);
    else
      iv.label = "phi" + std::to_string(j - q - d + 1);
    iv.estimate = flat(j);
    iv.se = std::sqrt(vcov(j, j));
    iv.lower = iv.estimate - z * iv.se;
    iv.upper = iv.estimate + z * iv.se;
  }
  return out;
}

Eigen::MatrixXd sigma_point(const RePar& par) {
  const int d = par.dim();
  const Eigen::MatrixXd L = cholesky(par.precision());
  Eigen::MatrixXd S = solve_spd(L, Eigen::MatrixXd::Identity(d, d));
  return 0.5 * (S + S.transpose()).eval();
}

Eigen::MatrixXd sigma_jacobian(const RePar& par) {
  const int d = par.dim();
  const int nvc = d + par.r();
  const int nvech = d * (d + 1) / 2;
  const Eigen::MatrixXd Sigma = sigma_point(par);
  const DerivStack dPrec = precision_derivs(par);

  Eigen::MatrixXd J(nvech, nvc);
  for (int l = 0; l < nvc; ++l) {
    const Eigen::MatrixXd dS = -Sigma * dPrec[static_cast<size_t>(l)] * Sigma;
    int row = 0;
    for (int j = 0; j < d; ++j)
      for (int i = j; i < d; ++i) J(row++, l) = dS(i, j);
  }
  return J;
}

std::vector<Interval> sigma_intervals(const RePar& par, const Eigen::MatrixXd& vcov_vc,
                                      double alpha) {
  const int d = par.dim();
  const int nvc = d + par.r();
  if (vcov_vc.rows() != nvc || vcov_vc.cols() != nvc)
    throw std::invalid_argument("sigma_intervals: vcov dimension mismatch");
  const double z = normal_quantile(1.0 - alpha / 2.0);
  const Eigen::MatrixXd Sigma = sigma_point(par);
  const Eigen::MatrixXd J = sigma_jacobian(par);

  std::vector<Interval> out;
  int row = 0;
  for (int j = 0; j < d; ++j) {
    for (int i = j; i < d; ++i, ++row) {
      Interval iv;
      iv.label = "sigma" + std::to_string(i + 1) + std::to_string(j + 1);
      iv.estimate = Sigma(i, j);
      const double var = J.row(row) * vcov_vc * J.row(row).transpose();
      iv.se = std::sqrt(std::max(var, 0.0));
      if (i == j) {
        // interval for log sigma_jj, Var(log s) = Var(s) / s^2, mapped back
        const double se_log = iv.se / iv.estimate;
        iv.lower = iv.estimate * std::exp(-z * se_log);
        iv.upper = iv.estimate * std::exp(z * se_log);
      } else {
        iv.lower = iv.estimate - z * iv.se;
        iv.upper = iv.estimate + z * iv.se;
      }
      out.push_back(iv);
    }
  }
  return out;
}

}  // namespace aghqmm
