#include <doctest.h>

#include <cmath>

#include "aghqmm/model.hpp"
#include "test_util.hpp"

using namespace aghqmm;
using namespace testutil;

namespace {

void check_eta_chain(const Family& fam, double y) {
  const double h = 1e-6;
  for (double eta : {-2.0, -0.3, 0.0, 0.7, 3.1}) {
    double l0, l1, l2, l3, a, b0, c0;
    eta_derivs(fam, y, eta, l0, l1, l2, l3);
    double l0p, l0m, l1p, l1m, l2p, l2m;
    eta_derivs(fam, y, eta + h, l0p, l1p, l2p, a);
    eta_derivs(fam, y, eta - h, l0m, l1m, l2m, b0);
    c0 = a + b0;  // silence unused warnings
    (void)c0;
    CHECK(l1 == doctest::Approx((l0p - l0m) / (2 * h)).epsilon(1e-7));
    CHECK(l2 == doctest::Approx((l1p - l1m) / (2 * h)).epsilon(1e-7));
    CHECK(l3 == doctest::Approx((l2p - l2m) / (2 * h)).epsilon(1e-6).scale(1.0));
  }
}

}  // namespace

TEST_CASE("bernoulli derivatives form a consistent chain") {
  check_eta_chain(Family::bernoulli(), 0.0);
  check_eta_chain(Family::bernoulli(), 1.0);
}

TEST_CASE("gaussian derivatives form a consistent chain") {
  check_eta_chain(Family::gaussian(), 0.4);
}

TEST_CASE("generic family reproduces the logit when given its cumulant") {
  const Family generic = Family::expfam(
      [](double e) { return std::log1p(std::exp(e)); },
      [](double e) { return 1.0 / (1.0 + std::exp(-e)); },
      [](double e) {
        const double p = 1.0 / (1.0 + std::exp(-e));
        return p * (1.0 - p);
      },
      [](double e) {
        const double p = 1.0 / (1.0 + std::exp(-e));
        return p * (1.0 - p) * (1.0 - 2.0 * p);
      });
  for (double eta : {-1.2, 0.0, 2.2}) {
    double a0, a1, a2, a3, b0, b1, b2, b3;
    eta_derivs(Family::bernoulli(), 1.0, eta, a0, a1, a2, a3);
    eta_derivs(generic, 1.0, eta, b0, b1, b2, b3);
    CHECK(a0 == doctest::Approx(b0).epsilon(1e-12));
    CHECK(a1 == doctest::Approx(b1).epsilon(1e-12));
    CHECK(a2 == doctest::Approx(b2).epsilon(1e-12));
    CHECK(a3 == doctest::Approx(b3).epsilon(1e-10));
  }
}

TEST_CASE("bernoulli derivatives are stable at extreme linear predictors") {
  for (double eta : {-700.0, -40.0, 40.0, 700.0}) {
    for (double y : {0.0, 1.0}) {
      double l0, l1, l2, l3;
      eta_derivs(Family::bernoulli(), y, eta, l0, l1, l2, l3);
      CHECK(std::isfinite(l0));
      CHECK(std::isfinite(l1));
      CHECK(std::isfinite(l2));
      CHECK(std::isfinite(l3));
      CHECK(l2 <= 0.0);
    }
  }
}

TEST_CASE("flatten and unflatten round-trip") {
  const ParamVector pv = random_params(3, 2);
  const Eigen::VectorXd theta = pv.flatten();
  REQUIRE(theta.size() == 3 + 2 + 1);
  const ParamVector back = ParamVector::unflatten(theta, 3, 2);
  CHECK((back.beta - pv.beta).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.repar.delta - pv.repar.delta).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.repar.phi - pv.repar.phi).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("joint gradient matches finite differences over (beta, delta, phi, u)") {
  for (auto fam : {Family::bernoulli(), Family::gaussian()}) {
    for (int d : {1, 2, 3}) {
      const int q = 2, n = 6;
      const ParamVector truth = random_params(q, d);
      const Dataset data = random_dataset(fam, 1, n, q, d, truth);
      const GroupData& g = data.groups[0];
      const ParamVector at = random_params(q, d, 0.4);
      const Eigen::VectorXd u = rvec(d);

      const JointBundle jb = group_joint(at, u, fam, g);
      Eigen::VectorXd x(at.p() + d);
      x << at.flatten(), u;
      const Eigen::VectorXd fd = fd_gradient(
          [&](const Eigen::VectorXd& v) {
            const ParamVector pv = ParamVector::unflatten(v.head(at.p()), q, d);
            return group_joint(pv, v.tail(d), fam, g).value;
          },
          x);
      CHECK(max_rel_err(jb.grad, fd) < 1e-7);
    }
  }
}

TEST_CASE("hessian blocks match finite differences of the joint gradient") {
  const Family fam = Family::bernoulli();
  const int q = 2, d = 2, n = 5;
  const ParamVector truth = random_params(q, d);
  const Dataset data = random_dataset(fam, 1, n, q, d, truth);
  const GroupData& g = data.groups[0];
  const ParamVector at = random_params(q, d, 0.4);
  const Eigen::VectorXd u = rvec(d);
  const int p = at.p();

  Eigen::MatrixXd H, C;
  group_hessian_blocks(at, u, fam, g, H, C);
  REQUIRE(H.rows() == d);
  REQUIRE(C.rows() == d);
  REQUIRE(C.cols() == p);

  const double h = 1e-6;
  // H = -d^2/du du^T, via the u-tail of the joint gradient
  for (int j = 0; j < d; ++j) {
    Eigen::VectorXd up = u, um = u;
    up(j) += h;
    um(j) -= h;
    const Eigen::VectorXd fd =
        (group_joint(at, up, fam, g).grad.tail(d) - group_joint(at, um, fam, g).grad.tail(d)) /
        (2.0 * h);
    CHECK(max_rel_err(-H.col(j), fd) < 1e-7);
  }
  // C = d^2/du dtheta^T
  const Eigen::VectorXd theta = at.flatten();
  for (int l = 0; l < p; ++l) {
    Eigen::VectorXd tp = theta, tm = theta;
    tp(l) += h;
    tm(l) -= h;
    const Eigen::VectorXd fd =
        (group_joint(ParamVector::unflatten(tp, q, d), u, fam, g).grad.tail(d) -
         group_joint(ParamVector::unflatten(tm, q, d), u, fam, g).grad.tail(d)) /
        (2.0 * h);
    CHECK(max_rel_err(C.col(l), fd) < 1e-7);
  }
}

TEST_CASE("third-derivative stack matches finite differences of H") {
  const Family fam = Family::bernoulli();
  const int q = 2, d = 2, n = 5;
  const ParamVector truth = random_params(q, d);
  const Dataset data = random_dataset(fam, 1, n, q, d, truth);
  const GroupData& g = data.groups[0];
  const ParamVector at = random_params(q, d, 0.4);
  const Eigen::VectorXd u = rvec(d);
  const int p = at.p();

  const DerivStack stack = group_third_stack(at, u, fam, g);
  REQUIRE(static_cast<int>(stack.size()) == p + d);

  const double h = 1e-6;
  const Eigen::VectorXd theta = at.flatten();
  auto H_at = [&](const Eigen::VectorXd& th, const Eigen::VectorXd& uu) {
    Eigen::MatrixXd H, C;
    group_hessian_blocks(ParamVector::unflatten(th, q, d), uu, fam, g, H, C);
    return H;
  };
  for (int l = 0; l < p + d; ++l) {
    Eigen::MatrixXd fd;
    if (l < p) {
      Eigen::VectorXd tp = theta, tm = theta;
      tp(l) += h;
      tm(l) -= h;
      fd = (H_at(tp, u) - H_at(tm, u)) / (2.0 * h);
    } else {
      Eigen::VectorXd up = u, um = u;
      up(l - p) += h;
      um(l - p) -= h;
      fd = (H_at(theta, up) - H_at(theta, um)) / (2.0 * h);
    }
    CHECK((stack[static_cast<size_t>(l)] - fd).cwiseAbs().maxCoeff() < 1e-6);
  }
}
