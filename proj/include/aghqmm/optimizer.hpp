#pragma once

#include <Eigen/Core>
#include <functional>
#include <stdexcept>

#include "aghqmm/aghq.hpp"

namespace aghqmm {

struct FitOptions {
  int k = 25;                 // quadrature points per axis
  int lbfgs_memory = 10;
  double grad_tol = 1e-6;     // relative outer gradient tolerance
  int max_outer = 500;
  double fd_eps = 1e-8;       // Hessian forward-difference step
  bool fd_central = false;    // central differences, for cross-checks
  int polish_max = 10;
  bool use_warm_starts = true;
  bool force_general_path = false;  // evaluate d == 1 through the matrix path
  InnerOptions inner;
};

struct FitResult {
  ParamVector theta_hat;
  double nll = 0.0;
  double grad_norm = 0.0;         // inf-norm at theta_hat
  Eigen::MatrixXd H_tilde;        // FD Hessian of the negative log-likelihood
  Eigen::MatrixXd vcov;           // H_tilde^{-1}
  int outer_iters = 0;
  long total_inner_iters = 0;
  bool converged = false;
  bool polished = false;
};

struct LineSearchFailure : std::runtime_error {
  Eigen::VectorXd best_theta;
  LineSearchFailure(const char* what, Eigen::VectorXd theta)
      : std::runtime_error(what), best_theta(std::move(theta)) {}
};

/// Objective: overwrite grad and return the value at theta; may throw or
/// return non-finite at infeasible points, which the line search backs off.
using Objective = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

struct LbfgsTrace {
  int iterations = 0;
  int evaluations = 0;
  double final_value = 0.0;
  double final_grad_norm = 0.0;
  bool converged = false;
};

/// L-BFGS minimization with a strong-Wolfe line search (c1 = 1e-4, c2 = 0.9).
Eigen::VectorXd lbfgs_fit(const Objective& fn, const Eigen::VectorXd& theta0,
                          const FitOptions& opts, LbfgsTrace* trace = nullptr);

/// Forward-difference Jacobian of the gradient, symmetrized.
Eigen::MatrixXd fd_hessian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& grad_fn,
                           const Eigen::VectorXd& theta, double eps, bool central = false);

/// Newton iterations from the L-BFGS terminal point using H_tilde in place of
/// the Hessian; stops when the gradient norm stops decreasing.
Eigen::VectorXd newton_polish(const Objective& fn, const Eigen::MatrixXd& H_tilde,
                              const Eigen::VectorXd& theta, const FitOptions& opts,
                              bool* polished = nullptr);

/// Pooled no-random-effects GLM coefficients, for starting values.
Eigen::VectorXd glm_start(const Dataset& data, int max_iter = 25, double tol = 1e-8);

/// Full pipeline: GLM start, L-BFGS, FD Hessian, Newton polish, final Hessian.
FitResult fit(const Dataset& data, const FitOptions& opts);

/// The evaluator used by fit: wraps nll_grad with a fixed rule and a
/// warm-start cache. Exposed for the warm-start and gradcheck paths.
class MarginalNll {
 public:
  MarginalNll(const Dataset& data, int k, bool use_warm, bool force_general,
              const InnerOptions& inner);

  double operator()(const Eigen::VectorXd& theta, Eigen::VectorXd& grad);

  long total_inner_iters() const { return total_inner_; }
  int evaluations() const { return evals_; }
  const Dataset& data() const { return data_; }

 private:
  const Dataset& data_;
  AdaptedRuleD rule_;
  bool use_warm_;
  bool scalar_path_;
  InnerOptions inner_;
  std::vector<GroupState> warm_;
  bool have_warm_ = false;
  long total_inner_ = 0;
  int evals_ = 0;
};

}  // namespace aghqmm
