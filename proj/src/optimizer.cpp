#include "aghqmm/optimizer.hpp"

#include <cmath>
#include <deque>
#include <limits>

#include "aghqmm/smallmat.hpp"

namespace aghqmm {

namespace {

constexpr double kC1 = 1e-4;
constexpr double kC2 = 0.9;
constexpr int kMaxTrials = 40;
constexpr double kInf = std::numeric_limits<double>::infinity();

// Evaluate, mapping infeasible points (exceptions, NaN) to +inf.
double safe_eval(const Objective& fn, const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
  try {
    const double f = fn(x, grad);
    return std::isfinite(f) ? f : kInf;
  } catch (const NotPositiveDefinite&) {
    return kInf;
  } catch (const InnerFailure&) {
    return kInf;
  } catch (const EvalFailure&) {
    return kInf;
  }
}

struct LineSearchResult {
  double alpha;
  double f;
  int evals;
};

// Strong-Wolfe line search, Nocedal & Wright Algorithms 3.5/3.6 with
// bisection in the zoom stage.
LineSearchResult wolfe_search(const Objective& fn, const Eigen::VectorXd& x,
                              const Eigen::VectorXd& dir, double f0, double d0,
                              Eigen::VectorXd& grad_out) {
  int evals = 0;
  Eigen::VectorXd xt(x.size());
  auto phi = [&](double alpha, double& dphi) {
    xt = x + alpha * dir;
    const double f = safe_eval(fn, xt, grad_out);
    ++evals;
    dphi = std::isfinite(f) ? grad_out.dot(dir) : kInf;
    return f;
  };

  auto zoom = [&](double lo, double f_lo, double hi) -> LineSearchResult {
    for (; evals < kMaxTrials;) {
      const double alpha = 0.5 * (lo + hi);
      double dphi;
      const double f = phi(alpha, dphi);
      if (!std::isfinite(f) || f > f0 + kC1 * alpha * d0 || f >= f_lo) {
        hi = alpha;
      } else {
        if (std::abs(dphi) <= -kC2 * d0) return {alpha, f, evals};
        if (dphi * (hi - lo) >= 0.0) hi = lo;
        lo = alpha;
        f_lo = f;
      }
    }
    throw LineSearchFailure("line search failed (zoom)", x);
  };

  double alpha_prev = 0.0, f_prev = f0;
  double alpha = 1.0;
  for (int i = 0; evals < kMaxTrials; ++i) {
    double dphi;
    const double f = phi(alpha, dphi);
    if (!std::isfinite(f)) {  // infeasible trial: shrink toward the last good point
      alpha = 0.5 * (alpha_prev + alpha);
      continue;
    }
    if (f > f0 + kC1 * alpha * d0 || (i > 0 && f >= f_prev)) return zoom(alpha_prev, f_prev, alpha);
    if (std::abs(dphi) <= -kC2 * d0) return {alpha, f, evals};
    if (dphi >= 0.0) return zoom(alpha, f, alpha_prev);
    alpha_prev = alpha;
    f_prev = f;
    alpha = std::min(2.0 * alpha, 1e10);
  }
  throw LineSearchFailure("line search failed after maximum trial steps", x);
}

}  // namespace

Eigen::VectorXd lbfgs_fit(const Objective& fn, const Eigen::VectorXd& theta0,
                          const FitOptions& opts, LbfgsTrace* trace) {
  const int p = static_cast<int>(theta0.size());
  Eigen::VectorXd x = theta0;
  Eigen::VectorXd grad(p);
  double f = safe_eval(fn, x, grad);
  int evals = 1;
  if (!std::isfinite(f)) throw std::invalid_argument("lbfgs_fit: infeasible starting point");

  std::deque<Eigen::VectorXd> s_hist, y_hist;
  std::deque<double> rho_hist;
  Eigen::VectorXd q(p), dir(p), x_new(p), grad_new(p);

  int iter = 0;
  bool converged = false;
  for (; iter < opts.max_outer; ++iter) {
    if (grad.lpNorm<Eigen::Infinity>() <= opts.grad_tol * std::max(1.0, std::abs(f))) {
      converged = true;
      break;
    }

    // two-loop recursion
    q = grad;
    const int hist = static_cast<int>(s_hist.size());
    std::vector<double> alpha_i(hist);
    for (int i = hist - 1; i >= 0; --i) {
      alpha_i[i] = rho_hist[i] * s_hist[i].dot(q);
      q -= alpha_i[i] * y_hist[i];
    }
    if (hist > 0) {
      const double gamma = s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
      q *= gamma;
    }
    for (int i = 0; i < hist; ++i) {
      const double beta = rho_hist[i] * y_hist[i].dot(q);
      q += (alpha_i[i] - beta) * s_hist[i];
    }
    dir = -q;

    double d0 = grad.dot(dir);
    if (d0 >= 0.0) {  // not a descent direction; reset to steepest descent
      dir = -grad;
      d0 = grad.dot(dir);
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
    }

    const LineSearchResult ls = wolfe_search(fn, x, dir, f, d0, grad_new);
    evals += ls.evals;
    x_new = x + ls.alpha * dir;

    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd y = grad_new - grad;
    const double sy = s.dot(y);
    if (sy > 1e-10 * s.norm() * y.norm()) {
      s_hist.push_back(s);
      y_hist.push_back(y);
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > opts.lbfgs_memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    x = x_new;
    f = ls.f;
    grad = grad_new;
  }

  if (trace) {
    trace->iterations = iter;
    trace->evaluations = evals;
    trace->final_value = f;
    trace->final_grad_norm = grad.lpNorm<Eigen::Infinity>();
    trace->converged = converged;
  }
  return x;
}

Eigen::MatrixXd fd_hessian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& grad_fn,
                           const Eigen::VectorXd& theta, double eps, bool central) {
  if (!(eps > 0.0)) throw std::invalid_argument("fd_hessian: eps must be positive");
  const int p = static_cast<int>(theta.size());
  Eigen::MatrixXd H(p, p);
  const Eigen::VectorXd g0 = central ? Eigen::VectorXd() : grad_fn(theta);
  Eigen::VectorXd tp = theta;
  for (int j = 0; j < p; ++j) {
    Eigen::VectorXd col;
    if (central) {
      tp(j) = theta(j) + eps;
      const Eigen::VectorXd gp = grad_fn(tp);
      tp(j) = theta(j) - eps;
      const Eigen::VectorXd gm = grad_fn(tp);
      col = (gp - gm) / (2.0 * eps);
    } else {
      tp(j) = theta(j) + eps;
      col = (grad_fn(tp) - g0) / eps;
    }
    tp(j) = theta(j);
    if (!col.allFinite())
      throw std::runtime_error("fd_hessian: non-finite column at coordinate " + std::to_string(j));
    H.col(j) = col;
  }
  return 0.5 * (H + H.transpose());
}

Eigen::VectorXd newton_polish(const Objective& fn, const Eigen::MatrixXd& H_tilde,
                              const Eigen::VectorXd& theta, const FitOptions& opts,
                              bool* polished) {
  if (polished) *polished = false;
  Eigen::MatrixXd L;
  try {
    L = cholesky(H_tilde);
  } catch (const NotPositiveDefinite&) {
    return theta;  // skip polish, caller flags it
  }

  Eigen::VectorXd x = theta;
  Eigen::VectorXd grad(theta.size()), grad_new(theta.size());
  double f = safe_eval(fn, x, grad);
  if (!std::isfinite(f)) return theta;
  double gnorm = grad.lpNorm<Eigen::Infinity>();

  for (int iter = 0; iter < opts.polish_max; ++iter) {
    const Eigen::VectorXd step = solve_spd(L, grad);
    if (step.norm() <= 1e-10) break;
    double t = 1.0;
    bool improved = false;
    Eigen::VectorXd x_new;
    for (int h = 0; h < 30; ++h) {
      x_new = x - t * step;
      const double f_new = safe_eval(fn, x_new, grad_new);
      if (std::isfinite(f_new) && grad_new.lpNorm<Eigen::Infinity>() < gnorm) {
        improved = true;
        break;
      }
      t *= 0.5;
    }
    if (!improved) break;
    x = x_new;
    grad = grad_new;
    gnorm = grad.lpNorm<Eigen::Infinity>();
    if (polished) *polished = true;
  }
  return x;
}

Eigen::VectorXd glm_start(const Dataset& data, int max_iter, double tol) {
  const int q = data.q;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(q);
  try {
    for (int iter = 0; iter < max_iter; ++iter) {
      Eigen::VectorXd g = Eigen::VectorXd::Zero(q);
      Eigen::MatrixXd H = Eigen::MatrixXd::Zero(q, q);
      for (const GroupData& group : data.groups) {
        const Eigen::VectorXd eta = group.X * beta;
        for (int j = 0; j < group.n(); ++j) {
          double l0, l1, l2, l3;
          eta_derivs(data.family, group.y(j), eta(j), l0, l1, l2, l3);
          g += l1 * group.X.row(j).transpose();
          H -= l2 * group.X.row(j).transpose() * group.X.row(j);
        }
      }
      if (g.lpNorm<Eigen::Infinity>() <= tol) break;
      beta += solve_spd(cholesky(H), g);
      if (!beta.allFinite()) return Eigen::VectorXd::Zero(q);
    }
  } catch (const NotPositiveDefinite&) {
    return Eigen::VectorXd::Zero(q);
  }
  return beta;
}

MarginalNll::MarginalNll(const Dataset& data, int k, bool use_warm, bool force_general,
                         const InnerOptions& inner)
    : data_(data),
      rule_(adapt_rule(data.d, k)),
      use_warm_(use_warm),
      scalar_path_(data.d == 1 && !force_general),
      inner_(inner) {}

double MarginalNll::operator()(const Eigen::VectorXd& theta, Eigen::VectorXd& grad) {
  const ParamVector pv = ParamVector::unflatten(theta, data_.q, data_.d);
  const std::vector<GroupState>* warm = (use_warm_ && have_warm_) ? &warm_ : nullptr;
  EvalOutput out = scalar_path_ ? nll_grad_scalar(pv, data_, rule_, warm, inner_)
                                : nll_grad(pv, data_, rule_, warm, inner_);
  ++evals_;
  total_inner_ += out.total_inner_iters;
  grad = out.grad;
  if (use_warm_) {
    warm_ = std::move(out.states);
    have_warm_ = true;
  }
  return out.value;
}

FitResult fit(const Dataset& data, const FitOptions& opts) {
  const int d = data.d;
  const int p = data.q + d * (d + 1) / 2;

  ParamVector start;
  start.beta = glm_start(data);
  start.repar = RePar::identity(d);

  MarginalNll nll(data, opts.k, opts.use_warm_starts, opts.force_general_path, opts.inner);
  Objective fn = [&nll](const Eigen::VectorXd& t, Eigen::VectorXd& g) { return nll(t, g); };

  FitResult result;
  LbfgsTrace trace;
  Eigen::VectorXd theta;
  try {
    theta = lbfgs_fit(fn, start.flatten(), opts, &trace);
  } catch (const LineSearchFailure& e) {
    theta = e.best_theta;
    trace.converged = false;
  }
  result.outer_iters = trace.iterations;

  auto grad_fn = [&](const Eigen::VectorXd& t) {
    Eigen::VectorXd g(p);
    if (!std::isfinite(safe_eval(fn, t, g))) g.setConstant(std::numeric_limits<double>::quiet_NaN());
    return g;
  };

  Eigen::MatrixXd H = fd_hessian(grad_fn, theta, opts.fd_eps, opts.fd_central);
  theta = newton_polish(fn, H, theta, opts, &result.polished);
  H = fd_hessian(grad_fn, theta, opts.fd_eps, opts.fd_central);

  Eigen::VectorXd grad(p);
  result.nll = safe_eval(fn, theta, grad);
  result.grad_norm = grad.lpNorm<Eigen::Infinity>();
  result.theta_hat = ParamVector::unflatten(theta, data.q, data.d);
  result.H_tilde = H;
  try {
    result.vcov = solve_spd(cholesky(H), Eigen::MatrixXd::Identity(p, p));
    result.vcov = 0.5 * (result.vcov + result.vcov.transpose()).eval();
  } catch (const NotPositiveDefinite&) {
    result.vcov = Eigen::MatrixXd::Constant(p, p, std::numeric_limits<double>::quiet_NaN());
  }
  result.total_inner_iters = nll.total_inner_iters();
  result.converged =
      std::isfinite(result.nll) &&
      result.grad_norm <= opts.grad_tol * std::max(1.0, std::abs(result.nll)) &&
      result.vcov.allFinite();
  return result;
}

}  // namespace aghqmm
