#include "aghqmm/sim.hpp"

#include <cmath>
#include <stdexcept>

#include "aghqmm/smallmat.hpp"

namespace aghqmm {

double Rng::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * M_PI * u2;
  spare_ = r * std::sin(a);
  have_spare_ = true;
  return r * std::cos(a);
}

std::uint64_t Rng::derive_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + (index + 1) * 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Eigen::VectorXd design_default_beta(Design design) {
  if (design == Design::Eq5) {
    Eigen::VectorXd b(4);
    b << -2.5, -0.15, 0.1, 0.2;
    return b;
  }
  Eigen::VectorXd b(2);
  b << -2.5, -0.15;
  return b;
}

Eigen::MatrixXd design_default_sigma(Design design) {
  if (design == Design::Eq5) {
    Eigen::MatrixXd s(2, 2);
    s << 2.0, 1.0, 1.0, 1.0;
    return s;
  }
  return Eigen::MatrixXd::Constant(1, 1, 2.0);
}

SimResult simulate(const SimSpec& spec) {
  if (spec.m < 1 || spec.n < 2) throw std::invalid_argument("simulate: need m >= 1, n >= 2");
  const bool eq5 = spec.design == Design::Eq5;
  const int d = eq5 ? 2 : 1;
  const int q = eq5 ? 4 : 2;

  SimResult res;
  res.beta = spec.beta.size() ? spec.beta : design_default_beta(spec.design);
  res.sigma = spec.sigma.size() ? spec.sigma : design_default_sigma(spec.design);
  if (res.beta.size() != q) throw std::invalid_argument("simulate: beta has wrong length");
  if (res.sigma.rows() != d || res.sigma.cols() != d)
    throw std::invalid_argument("simulate: sigma has wrong dimension");
  const Eigen::MatrixXd Lsig = cholesky(res.sigma);  // throws if not SPD

  Rng rng(spec.seed);
  Eigen::VectorXd t(spec.n);
  for (int j = 0; j < spec.n; ++j)
    t(j) = -3.0 + 6.0 * static_cast<double>(j) / static_cast<double>(spec.n - 1);

  res.data.family = Family::bernoulli();
  res.data.q = q;
  res.data.d = d;
  res.columns = eq5 ? std::vector<std::string>{"group", "y", "x", "t", "xt"}
                    : std::vector<std::string>{"group", "y", "t"};

  Eigen::VectorXd z(d), u(d);
  for (int i = 0; i < spec.m; ++i) {
    const double x = (eq5 && i >= spec.m / 2) ? 1.0 : 0.0;
    for (int a = 0; a < d; ++a) z(a) = rng.normal();
    u = Lsig * z;

    GroupData g;
    g.y.resize(spec.n);
    g.X.resize(spec.n, q);
    g.V.resize(spec.n, d);
    for (int j = 0; j < spec.n; ++j) {
      if (eq5) {
        g.X.row(j) << 1.0, x, t(j), x * t(j);
        g.V.row(j) << 1.0, t(j);
      } else {
        g.X.row(j) << 1.0, t(j);
        g.V.row(j) << 1.0;
      }
      const double eta = g.X.row(j).dot(res.beta) + g.V.row(j).dot(u);
      const double p = 1.0 / (1.0 + std::exp(-eta));
      g.y(j) = rng.uniform() < p ? 1.0 : 0.0;

      if (eq5)
        res.rows.push_back({static_cast<double>(i + 1), g.y(j), x, t(j), x * t(j)});
      else
        res.rows.push_back({static_cast<double>(i + 1), g.y(j), t(j)});
    }
    res.data.groups.push_back(std::move(g));
  }
  return res;
}

}  // namespace aghqmm
