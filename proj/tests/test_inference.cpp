#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "aghqmm/inference.hpp"
#include "test_util.hpp"

using namespace aghqmm;
using namespace testutil;

namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace

TEST_CASE("normal quantile inverts the cdf to high precision") {
  for (double p : {1e-10, 1e-4, 0.01, 0.025, 0.2, 0.5, 0.8, 0.975, 0.99, 1.0 - 1e-6}) {
    CHECK(normal_cdf(normal_quantile(p)) == doctest::Approx(p).epsilon(1e-11));
  }
  CHECK(normal_quantile(0.5) == doctest::Approx(0.0).scale(1.0).epsilon(1e-14));
  CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
  CHECK_THROWS_AS(normal_quantile(0.0), std::invalid_argument);
  CHECK_THROWS_AS(normal_quantile(1.0), std::invalid_argument);
}

TEST_CASE("wald intervals have the standard form") {
  const ParamVector pv = random_params(2, 2);
  const Eigen::MatrixXd V = random_spd(pv.p(), 0.3);
  const auto ivs = wald_intervals(pv, V, 0.05);
  REQUIRE(static_cast<int>(ivs.size()) == pv.p());
  const double z = normal_quantile(0.975);
  const Eigen::VectorXd flat = pv.flatten();
  for (int j = 0; j < pv.p(); ++j) {
    CHECK(ivs[static_cast<size_t>(j)].estimate == flat(j));
    CHECK(ivs[static_cast<size_t>(j)].lower ==
          doctest::Approx(flat(j) - z * std::sqrt(V(j, j))).epsilon(1e-12));
    CHECK(ivs[static_cast<size_t>(j)].upper ==
          doctest::Approx(flat(j) + z * std::sqrt(V(j, j))).epsilon(1e-12));
  }
  CHECK(ivs[0].label == "beta1");
  CHECK(ivs[2].label == "delta1");
  CHECK(ivs[4].label == "phi1");
}

TEST_CASE("sigma_point matches the analytic 2x2 inverse") {
  const ParamVector pv = random_params(1, 2);
  const Eigen::MatrixXd P = pv.repar.precision();
  const double det = P(0, 0) * P(1, 1) - P(0, 1) * P(1, 0);
  Eigen::MatrixXd want(2, 2);
  want << P(1, 1) / det, -P(0, 1) / det, -P(1, 0) / det, P(0, 0) / det;
  CHECK((sigma_point(pv.repar) - want).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("sigma_jacobian matches finite differences of sigma_point") {
  const double h = 1e-6;
  for (int d : {1, 2, 3}) {
    const ParamVector pv = random_params(1, d);
    const Eigen::MatrixXd J = sigma_jacobian(pv.repar);
    const int nvc = d + d * (d - 1) / 2;
    REQUIRE(J.cols() == nvc);
    REQUIRE(J.rows() == d * (d + 1) / 2);
    for (int l = 0; l < nvc; ++l) {
      RePar up = pv.repar, um = pv.repar;
      if (l < d) {
        up.delta(l) += h;
        um.delta(l) -= h;
      } else {
        up.phi(l - d) += h;
        um.phi(l - d) -= h;
      }
      const Eigen::MatrixXd fd = (sigma_point(up) - sigma_point(um)) / (2.0 * h);
      int row = 0;
      for (int j = 0; j < d; ++j)
        for (int i = j; i < d; ++i, ++row)
          CHECK(J(row, l) == doctest::Approx(fd(i, j)).epsilon(1e-6).scale(1.0));
    }
  }
}

TEST_CASE("diagonal sigma intervals stay positive even with huge variance") {
  const ParamVector pv = random_params(1, 2);
  const Eigen::MatrixXd V = 25.0 * random_spd(3, 1.0);  // absurdly wide
  const auto ivs = sigma_intervals(pv.repar, V, 0.05);
  REQUIRE(ivs.size() == 3);
  CHECK(ivs[0].label == "sigma11");
  CHECK(ivs[1].label == "sigma21");
  CHECK(ivs[2].label == "sigma22");
  CHECK(ivs[0].lower > 0.0);
  CHECK(ivs[2].lower > 0.0);
  for (const Interval& iv : ivs) {
    CHECK(iv.lower < iv.estimate);
    CHECK(iv.estimate < iv.upper);
  }
  // off-diagonal is symmetric about the estimate
  CHECK(ivs[1].estimate - ivs[1].lower == doctest::Approx(ivs[1].upper - ivs[1].estimate));
}
