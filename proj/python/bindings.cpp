#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "aghqmm/inference.hpp"
#include "aghqmm/io.hpp"
#include "aghqmm/optimizer.hpp"
#include "aghqmm/sim.hpp"

namespace py = pybind11;
using namespace aghqmm;

namespace {

Family family_from_name(const std::string& name) {
  if (name == "bernoulli") return Family::bernoulli();
  if (name == "gaussian") return Family::gaussian();
  throw std::invalid_argument("unknown family: " + name);
}

// Pack flat observation arrays into per-group blocks; `group` must hold a
// contiguous block of rows per group but group labels can be arbitrary ints.
Dataset make_dataset(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                     const Eigen::MatrixXd& V, const std::vector<long>& group,
                     const std::string& family) {
  const long N = y.size();
  if (X.rows() != N || V.rows() != N || static_cast<long>(group.size()) != N)
    throw std::invalid_argument("y, X, V, group must have the same number of rows");
  if (N == 0) throw std::invalid_argument("empty dataset");

  Dataset data;
  data.family = family_from_name(family);
  data.q = static_cast<int>(X.cols());
  data.d = static_cast<int>(V.cols());

  long start = 0;
  for (long i = 1; i <= N; ++i) {
    if (i == N || group[static_cast<size_t>(i)] != group[static_cast<size_t>(start)]) {
      const long n = i - start;
      GroupData g;
      g.y = y.segment(start, n);
      g.X = X.middleRows(start, n);
      g.V = V.middleRows(start, n);
      data.groups.push_back(std::move(g));
      start = i;
    }
  }
  return data;
}

py::dict interval_dict(const Interval& iv) {
  py::dict d;
  d["label"] = iv.label;
  d["estimate"] = iv.estimate;
  d["se"] = iv.se;
  d["lower"] = iv.lower;
  d["upper"] = iv.upper;
  return d;
}

py::dict fit_py(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, const Eigen::MatrixXd& V,
                const std::vector<long>& group, const std::string& family, int k,
                double alpha) {
  const Dataset data = make_dataset(y, X, V, group, family);
  FitOptions opts;
  opts.k = k;
  const FitResult res = fit(data, opts);

  const int q = data.q, d = data.d;
  const int nvc = d + d * (d - 1) / 2;
  py::dict out;
  out["converged"] = res.converged;
  out["nll"] = res.nll;
  out["grad_norm"] = res.grad_norm;
  out["outer_iters"] = res.outer_iters;
  out["inner_iters"] = res.total_inner_iters;
  out["theta"] = res.theta_hat.flatten();
  out["vcov"] = res.vcov;
  out["sigma"] = sigma_point(res.theta_hat.repar);

  py::list coefficients, sigma_ivs;
  for (const Interval& iv : wald_intervals(res.theta_hat, res.vcov, alpha))
    coefficients.append(interval_dict(iv));
  if (res.vcov.allFinite())
    for (const Interval& iv :
         sigma_intervals(res.theta_hat.repar, res.vcov.block(q, q, nvc, nvc), alpha))
      sigma_ivs.append(interval_dict(iv));
  out["intervals"] = coefficients;
  out["sigma_intervals"] = sigma_ivs;
  return out;
}

py::tuple marginal_nll_py(const Eigen::VectorXd& theta, const Eigen::VectorXd& y,
                          const Eigen::MatrixXd& X, const Eigen::MatrixXd& V,
                          const std::vector<long>& group, const std::string& family, int k) {
  const Dataset data = make_dataset(y, X, V, group, family);
  MarginalNll nll(data, k, false, false, {});
  Eigen::VectorXd grad(theta.size());
  const double value = nll(theta, grad);
  return py::make_tuple(value, grad);
}

py::dict simulate_py(const std::string& design, int m, int n, std::uint64_t seed) {
  SimSpec spec;
  if (design == "eq5")
    spec.design = Design::Eq5;
  else if (design == "eq6")
    spec.design = Design::Eq6;
  else
    throw std::invalid_argument("unknown design: " + design);
  spec.m = m;
  spec.n = n;
  spec.seed = seed;
  const SimResult res = simulate(spec);

  const long N = static_cast<long>(res.rows.size());
  Eigen::VectorXd y(N);
  std::vector<long> group(static_cast<size_t>(N));
  const long q = res.beta.size();
  const long d = res.sigma.rows();
  Eigen::MatrixXd X(N, q), V(N, d);
  long row = 0;
  for (const GroupData& g : res.data.groups) {
    for (int j = 0; j < g.n(); ++j, ++row) {
      y(row) = g.y(j);
      X.row(row) = g.X.row(j);
      V.row(row) = g.V.row(j);
      group[static_cast<size_t>(row)] = row == 0 ? 1 : group[static_cast<size_t>(row - 1)];
    }
  }
  // recompute the group labels from the draw table (first column)
  for (long i = 0; i < N; ++i)
    group[static_cast<size_t>(i)] = static_cast<long>(res.rows[static_cast<size_t>(i)][0]);

  py::dict out;
  out["y"] = y;
  out["X"] = X;
  out["V"] = V;
  out["group"] = group;
  out["beta"] = res.beta;
  out["sigma"] = res.sigma;
  out["columns"] = res.columns;
  return out;
}

py::tuple gh_rule_py(int k) {
  const QuadRule1D rule = gh_rule_1d(k);
  return py::make_tuple(rule.nodes, rule.weights);
}

py::tuple adapted_rule_py(int d, int k) {
  const AdaptedRuleD rule = adapt_rule(d, k);
  return py::make_tuple(rule.points, rule.log_weights);
}

}  // namespace

PYBIND11_MODULE(_aghqmm, mod) {
  mod.doc() = "adaptive Gauss-Hermite quadrature for two-level GLMMs";
  mod.def("fit", &fit_py, py::arg("y"), py::arg("X"), py::arg("V"), py::arg("group"),
          py::arg("family") = "bernoulli", py::arg("k") = 25, py::arg("alpha") = 0.05,
          "maximum AGHQ-likelihood fit with Wald and delta-method intervals");
  mod.def("marginal_nll", &marginal_nll_py, py::arg("theta"), py::arg("y"), py::arg("X"),
          py::arg("V"), py::arg("group"), py::arg("family") = "bernoulli", py::arg("k") = 25,
          "negative approximate marginal log-likelihood and exact gradient");
  mod.def("simulate", &simulate_py, py::arg("design"), py::arg("m"), py::arg("n"),
          py::arg("seed") = 1, "draw one dataset from the eq5 or eq6 design");
  mod.def("gh_rule", &gh_rule_py, py::arg("k"), "one-dimensional Gauss-Hermite nodes/weights");
  mod.def("adapted_rule", &adapted_rule_py, py::arg("d"), py::arg("k"),
          "product rule points and log weights before adaption to a mode");
}
