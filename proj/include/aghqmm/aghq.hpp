#pragma once

#include <Eigen/Core>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "aghqmm/model.hpp"
#include "aghqmm/quadrature.hpp"

namespace aghqmm {

/// Cached inner solution for one group: the mode of log pi_i over u and the
/// Cholesky factor of the negative Hessian there.
struct GroupState {
  Eigen::VectorXd mode;
  Eigen::MatrixXd chol;
  int inner_iters = 0;
};

struct EvalOutput {
  double value = 0.0;       // -l^AQ_k(theta)
  Eigen::VectorXd grad;     // -grad l^AQ_k(theta), length p
  std::vector<GroupState> states;
  long total_inner_iters = 0;
};

struct InnerFailure : std::runtime_error {
  int group;
  explicit InnerFailure(int g)
      : std::runtime_error("inner Newton failed to converge for group " + std::to_string(g)),
        group(g) {}
};

struct EvalFailure : std::runtime_error {
  int group;
  EvalFailure(int g, const std::string& what)
      : std::runtime_error("evaluation failed for group " + std::to_string(g) + ": " + what),
        group(g) {}
};

struct InnerOptions {
  double tol = 1e-8;   // inf-norm of the joint gradient in u
  int max_iter = 50;
  int max_halvings = 30;
};

/// Newton maximization of log pi_i(theta, .) from u0 with step-halving.
GroupState inner_newton(const ParamVector& theta, const Family& family,
                        const GroupData& group, const Eigen::VectorXd& u0,
                        const InnerOptions& opts = {});

/// Value l^AQ_{k,i}(theta) and its exact theta-gradient for one group, given a
/// converged GroupState at theta.
double eval_group(const ParamVector& theta, const Family& family, const GroupData& group,
                  const GroupState& state, const AdaptedRuleD& rule,
                  Eigen::VectorXd& grad_theta);

/// Negated total: value = -l^AQ_k, grad = -grad l^AQ_k. Inner modes warm-start
/// from `warm` when given, else from zero.
EvalOutput nll_grad(const ParamVector& theta, const Dataset& data, const AdaptedRuleD& rule,
                    const std::vector<GroupState>* warm = nullptr,
                    const InnerOptions& inner = {});

/// Same contract as nll_grad, d == 1 only, all matrix machinery replaced by
/// scalar arithmetic.
EvalOutput nll_grad_scalar(const ParamVector& theta, const Dataset& data,
                           const AdaptedRuleD& rule,
                           const std::vector<GroupState>* warm = nullptr,
                           const InnerOptions& inner = {});

}  // namespace aghqmm
