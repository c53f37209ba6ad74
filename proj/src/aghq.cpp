#include "aghqmm/aghq.hpp"

#include <cmath>

#include "aghqmm/smallmat.hpp"

namespace aghqmm {

namespace {

// Preallocated buffers and per-theta constants for the node loop.
struct EvalWorkspace {
  int q = -1, d = -1, r = -1;
  Eigen::MatrixXd A;
  Eigen::VectorXd Dvec;
  std::vector<std::pair<int, int>> pos;  // 0-based (i, j) of phi_l in A
  double sumdelta = 0.0;

  Eigen::VectorXd eta, w, Dw, gu, ushift, vz, gz, grad_node, vvec, g1, g3, gtail;
  Eigen::MatrixXd Wu, WL, F, H, C, Xsol;

  void bind(const ParamVector& theta) {
    q = theta.q();
    d = theta.d();
    r = theta.repar.r();
    A = theta.repar.unit_lower();
    Dvec = theta.repar.delta.array().exp();
    sumdelta = theta.repar.delta.sum();
    pos.clear();
    for (int l = 1; l <= r; ++l) {
      auto [i, j] = phi_position(d, l);
      pos.emplace_back(i - 1, j - 1);
    }
    w.resize(d);
    Dw.resize(d);
    gu.resize(d);
    ushift.resize(d);
    vz.resize(d);
    gz.resize(d);
    grad_node.resize(q + d + r + d);
    gtail.resize(d);
  }
};

// Joint log-likelihood and its (beta, delta, phi, u)-gradient, allocation-free.
double joint_value_grad(const ParamVector& theta, const Family& family,
                        const GroupData& group, const Eigen::VectorXd& u,
                        EvalWorkspace& ws, Eigen::VectorXd& grad) {
  const int q = ws.q, d = ws.d, r = ws.r;
  const int n = group.n();
  grad.setZero();

  ws.eta.resize(n);
  ws.eta.noalias() = group.X * theta.beta;
  ws.eta.noalias() += group.V * u;

  double value = 0.0;
  for (int j = 0; j < n; ++j) {
    double l0, l1, l2, l3;
    eta_derivs(family, group.y(j), ws.eta(j), l0, l1, l2, l3);
    value += l0;
    grad.segment(0, q) += l1 * group.X.row(j).transpose();
    grad.segment(q + d + r, d) += l1 * group.V.row(j).transpose();
  }

  // prior: log g(u; sigma) with w = A^T u
  ws.w = u;
  for (int l = 0; l < r; ++l) {
    const auto [i, j] = ws.pos[l];
    ws.w(j) += theta.repar.phi(l) * u(i);
  }
  double quad = 0.0;
  for (int t = 0; t < d; ++t) {
    ws.Dw(t) = ws.Dvec(t) * ws.w(t);
    quad += ws.w(t) * ws.Dw(t);
  }
  value += -0.5 * d * std::log(2.0 * M_PI) + 0.5 * ws.sumdelta - 0.5 * quad;
  for (int t = 0; t < d; ++t) grad(q + t) += 0.5 * (1.0 - ws.w(t) * ws.Dw(t));
  for (int l = 0; l < r; ++l) {
    const auto [i, j] = ws.pos[l];
    grad(q + d + l) -= ws.Dw(j) * u(i);
  }
  ws.gu = ws.Dw;  // A * Dw
  for (int l = 0; l < r; ++l) {
    const auto [i, j] = ws.pos[l];
    ws.gu(i) += theta.repar.phi(l) * ws.Dw(j);
  }
  grad.segment(q + d + r, d) -= ws.gu;
  return value;
}

double eval_group_ws(const ParamVector& theta, const Family& family, const GroupData& group,
                     const GroupState& state, const AdaptedRuleD& rule,
                     Eigen::VectorXd& grad_theta, EvalWorkspace& ws) {
  const int q = ws.q, d = ws.d, r = ws.r;
  const int p = q + d + r;
  const int ntri = d * (d + 1) / 2;
  const long nq = rule.points.rows();

  const Eigen::MatrixXd& L = state.chol;
  const double logdet = logdet_chol(L);

  ws.vvec.resize(nq);
  ws.Wu.resize(nq, p + d);
  ws.WL.resize(nq, ntri);

  for (long j = 0; j < nq; ++j) {
    ws.ushift = forward_solve(L, rule.points.row(j).transpose());
    ws.ushift += state.mode;
    const double val = joint_value_grad(theta, family, group, ws.ushift, ws, ws.grad_node);
    ws.vvec(j) = val + rule.log_weights(j) - logdet;
    ws.Wu.row(j) = ws.grad_node;
    ws.gtail = ws.grad_node.segment(p, d);
    int idx = 0;
    for (int s = 0; s < d; ++s) {
      for (int rr = s; rr < d; ++rr) {
        forward_solve_grad(L, rule.points.row(j).transpose(), rr, s, ws.vz, ws.gz);
        double wl = ws.gz.dot(ws.gtail);
        if (rr == s) wl -= 1.0 / L(rr, rr);
        ws.WL(j, idx++) = wl;
      }
    }
  }

  const double vmax = ws.vvec.maxCoeff();
  if (!std::isfinite(vmax)) throw EvalFailure(-1, "non-finite node value");
  double sum = 0.0;
  for (long j = 0; j < nq; ++j) {
    ws.vvec(j) = std::exp(ws.vvec(j) - vmax);  // reuse as softmax weights
    sum += ws.vvec(j);
  }
  const double value = vmax + std::log(sum);
  ws.vvec /= sum;

  ws.g1.noalias() = ws.Wu.transpose() * ws.vvec;
  ws.F = Eigen::MatrixXd::Zero(d, d);
  {
    int idx = 0;
    for (int s = 0; s < d; ++s)
      for (int rr = s; rr < d; ++rr) ws.F(rr, s) = ws.WL.col(idx++).dot(ws.vvec);
  }
  const DerivStack H_prime = group_third_stack(theta, state.mode, family, group);
  ws.g3 = ws.g1 + chol_reverse(L, ws.F, H_prime);

  // implicit term: H dmode/dtheta = C, so grad += (H^{-1} C)^T g3_u
  group_hessian_blocks(theta, state.mode, family, group, ws.H, ws.C);
  ws.Xsol = solve_spd(L, ws.C);
  grad_theta = ws.g3.segment(0, p);
  grad_theta.noalias() += ws.Xsol.transpose() * ws.g3.segment(p, d);
  return value;
}

}  // namespace

GroupState inner_newton(const ParamVector& theta, const Family& family,
                        const GroupData& group, const Eigen::VectorXd& u0,
                        const InnerOptions& opts) {
  const int d = theta.d();
  const int p = theta.p();
  Eigen::VectorXd u = u0;
  JointBundle jb = group_joint(theta, u, family, group);

  GroupState state;
  Eigen::MatrixXd H, C;
  for (int iter = 0; iter < opts.max_iter; ++iter) {
    const Eigen::VectorXd grad_u = jb.grad.segment(p, d);
    if (grad_u.lpNorm<Eigen::Infinity>() <= opts.tol) {
      group_hessian_blocks(theta, u, family, group, H, C);
      state.mode = u;
      state.chol = cholesky(H);
      state.inner_iters = iter;
      return state;
    }
    group_hessian_blocks(theta, u, family, group, H, C);
    const Eigen::MatrixXd L = cholesky(H);
    const Eigen::VectorXd step = solve_spd(L, grad_u);

    double t = 1.0;
    Eigen::VectorXd u_new;
    JointBundle jb_new;
    bool accepted = false;
    for (int h = 0; h <= opts.max_halvings; ++h) {
      u_new = u + t * step;
      jb_new = group_joint(theta, u_new, family, group);
      if (std::isfinite(jb_new.value) && jb_new.value >= jb.value - 1e-12) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;
    u = u_new;
    jb = jb_new;
    state.inner_iters = iter + 1;
  }
  throw InnerFailure(-1);
}

double eval_group(const ParamVector& theta, const Family& family, const GroupData& group,
                  const GroupState& state, const AdaptedRuleD& rule,
                  Eigen::VectorXd& grad_theta) {
  EvalWorkspace ws;
  ws.bind(theta);
  return eval_group_ws(theta, family, group, state, rule, grad_theta, ws);
}

EvalOutput nll_grad(const ParamVector& theta, const Dataset& data, const AdaptedRuleD& rule,
                    const std::vector<GroupState>* warm, const InnerOptions& inner) {
  if (data.groups.empty()) throw std::invalid_argument("nll_grad: empty dataset");
  const int p = theta.p();
  const int d = theta.d();

  EvalOutput out;
  out.grad = Eigen::VectorXd::Zero(p);
  out.states.resize(data.m());

  EvalWorkspace ws;
  ws.bind(theta);
  Eigen::VectorXd gtheta(p);
  for (int i = 0; i < data.m(); ++i) {
    try {
      const Eigen::VectorXd u0 =
          warm ? (*warm)[i].mode : Eigen::VectorXd::Zero(d).eval();
      GroupState state = inner_newton(theta, data.family, data.groups[i], u0, inner);
      out.total_inner_iters += state.inner_iters;
      const double value_i =
          eval_group_ws(theta, data.family, data.groups[i], state, rule, gtheta, ws);
      if (!std::isfinite(value_i)) throw EvalFailure(i, "non-finite group value");
      out.value -= value_i;
      out.grad -= gtheta;
      out.states[i] = std::move(state);
    } catch (const NotPositiveDefinite& e) {
      throw EvalFailure(i, e.what());
    } catch (const InnerFailure&) {
      throw InnerFailure(i);
    }
  }
  return out;
}

EvalOutput nll_grad_scalar(const ParamVector& theta, const Dataset& data,
                           const AdaptedRuleD& rule, const std::vector<GroupState>* warm,
                           const InnerOptions& inner) {
  if (theta.d() != 1) throw std::invalid_argument("nll_grad_scalar: requires d == 1");
  if (data.groups.empty()) throw std::invalid_argument("nll_grad_scalar: empty dataset");
  const int q = theta.q();
  const int p = q + 1;  // (beta, delta)
  const double expdelta = std::exp(theta.repar.delta(0));
  const double log2pi = std::log(2.0 * M_PI);
  const long nq = rule.points.rows();

  EvalOutput out;
  out.grad = Eigen::VectorXd::Zero(p);
  out.states.resize(data.m());

  Eigen::VectorXd eta, vvec(nq), gbeta(q);
  Eigen::MatrixXd Wu, C(1, p);
  Wu.resize(nq, p + 1);
  Eigen::VectorXd wL(nq), Hprime(p + 1), g1(p + 1), g3(p + 1);

  for (int gi = 0; gi < data.m(); ++gi) {
    const GroupData& group = data.groups[gi];
    const int n = group.n();

    // joint value / gradient / curvature in u, all scalars
    auto joint_u = [&](double u, double& val, double& gu, double& hu) {
      eta = group.X * theta.beta;
      eta += u * group.V.col(0);
      val = -0.5 * log2pi + 0.5 * theta.repar.delta(0) - 0.5 * expdelta * u * u;
      gu = -expdelta * u;
      hu = expdelta;
      for (int j = 0; j < n; ++j) {
        double l0, l1, l2, l3;
        eta_derivs(data.family, group.y(j), eta(j), l0, l1, l2, l3);
        const double v = group.V(j, 0);
        val += l0;
        gu += l1 * v;
        hu -= l2 * v * v;
      }
    };

    // inner Newton
    double u = warm ? (*warm)[gi].mode(0) : 0.0;
    double val, gu, hu;
    joint_u(u, val, gu, hu);
    int iters = 0;
    bool converged = false;
    for (int iter = 0; iter < inner.max_iter; ++iter) {
      if (std::abs(gu) <= inner.tol) {
        converged = true;
        break;
      }
      const double step = gu / hu;
      double t = 1.0, val_new, gu_new, hu_new;
      bool accepted = false;
      for (int h = 0; h <= inner.max_halvings; ++h) {
        joint_u(u + t * step, val_new, gu_new, hu_new);
        if (std::isfinite(val_new) && val_new >= val - 1e-12) {
          accepted = true;
          break;
        }
        t *= 0.5;
      }
      if (!accepted) break;
      u += t * step;
      val = val_new;
      gu = gu_new;
      hu = hu_new;
      iters = iter + 1;
    }
    if (!converged && std::abs(gu) > inner.tol) throw InnerFailure(gi);
    out.total_inner_iters += iters;

    if (!(hu > 0.0)) throw EvalFailure(gi, "non-positive curvature at mode");
    const double H = hu;
    const double L = std::sqrt(H);
    const double logL = std::log(L);

    // third-derivative stack over (beta, delta, u)
    Hprime.setZero();
    Hprime(q) = expdelta;
    eta = group.X * theta.beta;
    eta += u * group.V.col(0);
    C.setZero();
    C(0, q) = -expdelta * u;  // d^2 log pi / du ddelta
    for (int j = 0; j < n; ++j) {
      double l0, l1, l2, l3;
      eta_derivs(data.family, group.y(j), eta(j), l0, l1, l2, l3);
      const double v = group.V(j, 0);
      Hprime.segment(0, q) -= l3 * v * v * group.X.row(j).transpose();
      Hprime(p) -= l3 * v * v * v;
      C.block(0, 0, 1, q) += l2 * v * group.X.row(j);
    }

    // node loop
    for (long j = 0; j < nq; ++j) {
      const double z = rule.points(j, 0);
      const double ushift = z / L + u;
      eta = group.X * theta.beta;
      eta += ushift * group.V.col(0);
      double jval = -0.5 * log2pi + 0.5 * theta.repar.delta(0) -
                    0.5 * expdelta * ushift * ushift;
      double jgu = -expdelta * ushift;
      gbeta.setZero();
      for (int t = 0; t < n; ++t) {
        double l0, l1, l2, l3;
        eta_derivs(data.family, group.y(t), eta(t), l0, l1, l2, l3);
        const double v = group.V(t, 0);
        jval += l0;
        jgu += l1 * v;
        gbeta += l1 * group.X.row(t).transpose();
      }
      vvec(j) = jval + rule.log_weights(j) - logL;
      Wu.row(j).segment(0, q) = gbeta;
      Wu(j, q) = 0.5 * (1.0 - expdelta * ushift * ushift);
      Wu(j, p) = jgu;
      wL(j) = -1.0 / L - (z / (L * L)) * jgu;
    }

    const double vmax = vvec.maxCoeff();
    if (!std::isfinite(vmax)) throw EvalFailure(gi, "non-finite node value");
    double sum = 0.0;
    for (long j = 0; j < nq; ++j) {
      vvec(j) = std::exp(vvec(j) - vmax);
      sum += vvec(j);
    }
    const double value_i = vmax + std::log(sum);
    vvec /= sum;

    g1.noalias() = Wu.transpose() * vvec;
    const double F11 = wL.dot(vvec);
    g3 = g1 + (F11 / (2.0 * L)) * Hprime;
    out.value -= value_i;
    out.grad -= g3.segment(0, p);
    out.grad -= (g3(p) / H) * C.row(0).transpose();

    GroupState state;
    state.mode = Eigen::VectorXd::Constant(1, u);
    state.chol = Eigen::MatrixXd::Constant(1, 1, L);
    state.inner_iters = iters;
    out.states[gi] = std::move(state);
  }
  return out;
}

}  // namespace aghqmm
