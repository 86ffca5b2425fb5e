#pragma once

// Dense equality/inequality constrained solver: augmented Lagrangian outer loop
// with a BFGS inner minimizer and Armijo backtracking. Multiplier estimates come
// from the standard first-order updates, so on convergence they satisfy the KKT
// system to the requested tolerance and can be used for sensitivities.

#include <Eigen/Dense>

#include <cmath>
#ifdef PERMON_NLP_TRACE
#include <cstdio>
#endif
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

namespace permon {

struct NlpProblem {
  int n = 0;
  int num_equality = 0;    // c(z) = 0
  int num_inequality = 0;  // g(z) <= 0

  std::function<double(const Eigen::VectorXd&)> objective;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient;  // optional
  // Optional objective Hessian (or any PSD surrogate for it). Folded into the
  // quasi-Newton seed; sharply curved objectives (stiff smoothing terms) are
  // hard to recover by secant updates alone.
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> objective_hessian;
  // Optional weighted constraint curvature sum_i we_i d2c_i + sum_i wi_i d2g_i,
  // called with the augmented-Lagrangian weights we = lambda + rho c and
  // wi = max(0, mu + rho g). Supplying it upgrades the quasi-Newton seed to
  // the exact subproblem Hessian, which large transcriptions need to converge
  // in a useful number of iterations.
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&, const Eigen::VectorXd&,
                                const Eigen::VectorXd&)>
      constraint_curvature;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> equality;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> equality_jacobian;  // optional
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> inequality;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> inequality_jacobian;  // optional
};

struct NlpOptions {
  double kkt_tol = 1e-6;    // stationarity and complementarity
  double feas_tol = 1e-6;   // constraint violation
  int max_outer = 500;
  int max_inner = 400;
  double rho0 = 10.0;       // initial penalty
  double rho_growth = 5.0;
  double rho_max = 1e10;
  double fd_step = 1e-6;    // for derivative fallbacks
};

struct NlpWarmStart {
  Eigen::VectorXd z;
  Eigen::VectorXd lambda;  // equality multipliers
  Eigen::VectorXd mu;      // inequality multipliers (>= 0)
  double rho = 0.0;
};

enum class NlpStatus { converged, max_iterations, line_search_failure };

struct NlpResult {
  NlpStatus status = NlpStatus::max_iterations;
  Eigen::VectorXd z;
  Eigen::VectorXd lambda;
  Eigen::VectorXd mu;
  double objective = 0.0;
  double stationarity = std::numeric_limits<double>::infinity();
  double feasibility = std::numeric_limits<double>::infinity();
  double complementarity = std::numeric_limits<double>::infinity();
  int outer_iterations = 0;
  int inner_iterations = 0;
  int function_evals = 0;
  int gradient_evals = 0;
  double rho = 0.0;
};

namespace detail {

// Wraps the user problem and supplies finite-difference fallbacks for any
// missing derivative evaluator (central differences, relative step).
class NlpEvaluator {
 public:
  explicit NlpEvaluator(const NlpProblem& p, double fd_step) : p_(p), fd_(fd_step) {
    if (p_.n <= 0 || !p_.objective) throw std::invalid_argument("solve_nlp: malformed problem");
  }

  double f(const Eigen::VectorXd& z) const { return p_.objective(z); }

  Eigen::VectorXd c(const Eigen::VectorXd& z) const {
    if (p_.num_equality == 0) return Eigen::VectorXd::Zero(0);
    return p_.equality(z);
  }
  Eigen::VectorXd g(const Eigen::VectorXd& z) const {
    if (p_.num_inequality == 0) return Eigen::VectorXd::Zero(0);
    return p_.inequality(z);
  }

  Eigen::VectorXd grad_f(const Eigen::VectorXd& z) const {
    if (p_.gradient) return p_.gradient(z);
    Eigen::VectorXd out(p_.n);
    Eigen::VectorXd zz = z;
    for (int i = 0; i < p_.n; ++i) {
      double h = fd_ * std::max(1.0, std::abs(z[i]));
      double zi = z[i];
      zz[i] = zi + h;
      double fp = p_.objective(zz);
      zz[i] = zi - h;
      double fm = p_.objective(zz);
      zz[i] = zi;
      out[i] = (fp - fm) / (2.0 * h);
    }
    return out;
  }

  Eigen::MatrixXd jac_c(const Eigen::VectorXd& z) const {
    if (p_.num_equality == 0) return Eigen::MatrixXd::Zero(0, p_.n);
    if (p_.equality_jacobian) return p_.equality_jacobian(z);
    return fd_jacobian(p_.equality, p_.num_equality, z);
  }
  Eigen::MatrixXd jac_g(const Eigen::VectorXd& z) const {
    if (p_.num_inequality == 0) return Eigen::MatrixXd::Zero(0, p_.n);
    if (p_.inequality_jacobian) return p_.inequality_jacobian(z);
    return fd_jacobian(p_.inequality, p_.num_inequality, z);
  }

 private:
  Eigen::MatrixXd fd_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& fn,
                              int m, const Eigen::VectorXd& z) const {
    Eigen::MatrixXd J(m, p_.n);
    Eigen::VectorXd zz = z;
    for (int i = 0; i < p_.n; ++i) {
      double h = fd_ * std::max(1.0, std::abs(z[i]));
      double zi = z[i];
      zz[i] = zi + h;
      Eigen::VectorXd vp = fn(zz);
      zz[i] = zi - h;
      Eigen::VectorXd vm = fn(zz);
      zz[i] = zi;
      J.col(i) = (vp - vm) / (2.0 * h);
    }
    return J;
  }

  const NlpProblem& p_;
  double fd_;
};

}  // namespace detail

inline NlpResult solve_nlp(const NlpProblem& problem, const Eigen::VectorXd& z0,
                           const NlpOptions& opts = {}, const NlpWarmStart* warm = nullptr) {
  detail::NlpEvaluator ev(problem, opts.fd_step);
  const int n = problem.n;
  const int me = problem.num_equality;
  const int mi = problem.num_inequality;

  NlpResult res;
  Eigen::VectorXd z = (warm && warm->z.size() == n) ? warm->z : z0;
  Eigen::VectorXd lambda = (warm && warm->lambda.size() == me) ? warm->lambda
                                                               : Eigen::VectorXd::Zero(me);
  Eigen::VectorXd mu = (warm && warm->mu.size() == mi) ? warm->mu : Eigen::VectorXd::Zero(mi);
  double rho = (warm && warm->rho > 0.0) ? warm->rho : opts.rho0;

  // Augmented Lagrangian value (no derivatives needed: used by the line search).
  auto phi = [&](const Eigen::VectorXd& x) {
    ++res.function_evals;
    double val = ev.f(x);
    if (me > 0) {
      Eigen::VectorXd cx = ev.c(x);
      val += lambda.dot(cx) + 0.5 * rho * cx.squaredNorm();
    }
    if (mi > 0) {
      Eigen::VectorXd gx = ev.g(x);
      for (int i = 0; i < mi; ++i) {
        double t = std::max(0.0, mu[i] + rho * gx[i]);
        val += (t * t - mu[i] * mu[i]) / (2.0 * rho);
      }
    }
    return val;
  };
  // Gradient of phi; optionally reports which inequality penalty branches are
  // engaged at x, so the BFGS update can be skipped across activity changes.
  auto grad_phi = [&](const Eigen::VectorXd& x, std::vector<char>* active = nullptr) {
    ++res.gradient_evals;
    Eigen::VectorXd grad = ev.grad_f(x);
    if (me > 0) {
      Eigen::VectorXd cx = ev.c(x);
      grad.noalias() += ev.jac_c(x).transpose() * (lambda + rho * cx);
    }
    if (active) active->assign(static_cast<std::size_t>(mi), 0);
    if (mi > 0) {
      Eigen::VectorXd gx = ev.g(x);
      Eigen::VectorXd w(mi);
      for (int i = 0; i < mi; ++i) {
        w[i] = std::max(0.0, mu[i] + rho * gx[i]);
        if (active && w[i] > 0.0) (*active)[static_cast<std::size_t>(i)] = 1;
      }
      grad.noalias() += ev.jac_g(x).transpose() * w;
    }
    return grad;
  };

  // Gauss-Newton seed for the inverse-BFGS matrix: tau*I + rho*J^T J over the
  // equality rows and the active inequality rows. The penalty term dominates
  // the augmented-Lagrangian curvature once rho is large, so seeding with its
  // exact inverse keeps the inner loop fast at any penalty level; BFGS updates
  // then fill in the O(1) geometric curvature.
  auto gauss_newton_seed = [&](const Eigen::VectorXd& x) {
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n, n);
    if (problem.objective_hessian) B += problem.objective_hessian(x);
    Eigen::VectorXd we, wi;
    if (me > 0) {
      Eigen::MatrixXd Jc = ev.jac_c(x);
      B.noalias() += rho * (Jc.transpose() * Jc);
      we = lambda + rho * ev.c(x);
    }
    if (mi > 0) {
      Eigen::VectorXd gx = ev.g(x);
      Eigen::MatrixXd Jg = ev.jac_g(x);
      wi = Eigen::VectorXd::Zero(mi);
      for (int i = 0; i < mi; ++i) {
        double w = mu[i] + rho * gx[i];
        if (w > 0.0) {
          B.noalias() += rho * (Jg.row(i).transpose() * Jg.row(i));
          wi[i] = w;
        }
      }
    }
    if (problem.constraint_curvature) B += problem.constraint_curvature(x, we, wi);
    // With exact curvature available the seed is a damped Newton matrix and
    // only needs enough regularization to be positive definite; without it,
    // unit damping stands in for the unknown Lagrangian curvature.
    double tau = problem.constraint_curvature ? 1e-4 : 1.0;
    for (; tau <= 1e8; tau *= 100.0) {
      Eigen::LLT<Eigen::MatrixXd> llt(B + tau * Eigen::MatrixXd::Identity(n, n));
      if (llt.info() == Eigen::Success) {
#ifdef PERMON_NLP_TRACE
        std::fprintf(stderr, "    [seed] tau=%.0e rho=%.0e\n", tau, rho);
#endif
        return Eigen::MatrixXd(llt.solve(Eigen::MatrixXd::Identity(n, n)));
      }
    }
    return Eigen::MatrixXd(Eigen::MatrixXd::Identity(n, n));
  };

  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);

  // Inner BFGS minimization of phi to gradient tolerance omega. Secant updates
  // lose ground to the exact penalty curvature as the iterate travels, so the
  // seed is refreshed periodically; between refreshes BFGS fills in the
  // Lagrangian curvature the Gauss-Newton model misses.
  const int seed_interval = std::max(60, n / 2);
  auto minimize_phi = [&](Eigen::VectorXd& x, double omega, double& grad_norm_out) {
    std::vector<char> act_cur, act_next;
    Eigen::VectorXd grad = grad_phi(x, &act_cur);
    bool last_resort = false;
    int since_seed = 0;
    double f_cur = phi(x);
    // Trust radius on the step norm. The seed Hessian is nearly singular along
    // directions the constraints do not curve (notably the controls on fine
    // grids), and the raw Newton step along those can overshoot by orders of
    // magnitude; the cap adapts to what the line search actually accepts.
    double trust = 10.0 * std::max(1.0, x.norm());
    for (int it = 0; it < opts.max_inner; ++it) {
      grad_norm_out = grad.lpNorm<Eigen::Infinity>();
      if (grad_norm_out <= omega) return true;
      ++res.inner_iterations;
      if (++since_seed >= seed_interval) {
        H = gauss_newton_seed(x);
        since_seed = 0;
      }

      Eigen::VectorXd d = -(H * grad);
      double gd = grad.dot(d);
      if (!(gd < 0.0)) {  // not a descent direction: reseed
        H = gauss_newton_seed(x);
        since_seed = 0;
        d = -(H * grad);
        gd = grad.dot(d);
        if (!(gd < 0.0)) {
          d = -grad;
          gd = grad.dot(d);
        }
      }
      double dn = d.norm();
      if (dn > trust) {
        d *= trust / dn;
        gd *= trust / dn;
      }

      double step = 1.0;
      Eigen::VectorXd xn;
      double f_trial = 0.0;
      bool accepted = false;
      for (int ls = 0; ls < 60; ++ls) {
        xn = x + step * d;
        f_trial = phi(xn);
        if (f_trial <= f_cur + 1e-4 * step * gd) { accepted = true; break; }
        step *= 0.5;
      }
      if (!accepted) {
        if (!last_resort) {  // one reseed, then give up on this subproblem
          H = gauss_newton_seed(x);
          last_resort = true;
          continue;
        }
        return false;
      }
      last_resort = false;
      if (step >= 0.5)
        trust = std::min(trust * 1.7, 1e8);
      else if (step <= 1.0 / 64.0)
        trust = std::max(trust * 0.25, 1e-5 * std::max(1.0, x.norm()));
#ifdef PERMON_NLP_TRACE_INNER
      if (it % 25 == 0)
        std::fprintf(stderr, "      [inner] it=%d f=%.8e grad=%.2e step=%.1e trust=%.1e\n", it,
                     f_trial, grad_norm_out, step, trust);
#endif

      Eigen::VectorXd grad_n = grad_phi(xn, &act_next);
      Eigen::VectorXd s = xn - x;
      Eigen::VectorXd y = grad_n - grad;
      double sy = s.dot(y);
      // Update only within one smooth piece: a secant pair straddling an
      // inequality activity change mixes two curvature regimes and poisons H.
      if (act_cur == act_next && sy > 1e-12 * s.norm() * y.norm()) {
        Eigen::VectorXd Hy = H * y;
        double yHy = y.dot(Hy);
        H.noalias() += ((sy + yHy) / (sy * sy)) * (s * s.transpose());
        Eigen::MatrixXd cross = Hy * s.transpose();
        H.noalias() -= (cross + cross.transpose()) / sy;
      }
      x = xn;
      grad = grad_n;
      act_cur = act_next;
      f_cur = f_trial;
    }
    grad_norm_out = grad.lpNorm<Eigen::Infinity>();
    return grad_norm_out <= omega;
  };

  // Minimum-norm Gauss-Newton restoration: stacks the equality rows and any
  // violated inequality rows and steps x += J^T (J J^T + damping)^{-1} (-v).
  // Near a stationary iterate this drives the violation to round-off in a few
  // steps, which the first-order multiplier loop alone would need many more
  // outer iterations (and a much larger rho) to match.
  auto project_feasible = [&](Eigen::VectorXd& x) {
    for (int it = 0; it < 6; ++it) {
      Eigen::VectorXd cx = ev.c(x);
      Eigen::VectorXd gx = ev.g(x);
      std::vector<int> active;
      for (int i = 0; i < mi; ++i)
        if (gx[i] > 0.0) active.push_back(i);
      const int m = me + static_cast<int>(active.size());
      if (m == 0) return;
      Eigen::VectorXd v(m);
      double worst = 0.0;
      if (me > 0) v.head(me) = cx;
      for (std::size_t i = 0; i < active.size(); ++i) v[me + static_cast<int>(i)] = gx[active[i]];
      worst = v.lpNorm<Eigen::Infinity>();
      if (worst <= 0.25 * opts.feas_tol) return;
      Eigen::MatrixXd J(m, n);
      if (me > 0) J.topRows(me) = ev.jac_c(x);
      if (!active.empty()) {
        Eigen::MatrixXd Jg = ev.jac_g(x);
        for (std::size_t i = 0; i < active.size(); ++i)
          J.row(me + static_cast<int>(i)) = Jg.row(active[i]);
      }
      Eigen::MatrixXd JJt = J * J.transpose();
      double damping = 1e-12 * std::max(1.0, JJt.trace() / m);
      JJt.diagonal().array() += damping;
      x.noalias() += J.transpose() * JJt.llt().solve(-v);
    }
  };

  const double omega_start = std::max(1e-2, 10.0 * opts.kkt_tol);
  const double omega_min = 0.5 * opts.kkt_tol;
  double omega = omega_start;
  double viol_prev = std::numeric_limits<double>::infinity();
  int stalls = 0;
  H = gauss_newton_seed(z);

  for (int outer = 0; outer < opts.max_outer; ++outer) {
    res.outer_iterations = outer + 1;
    if (outer > 0) H = gauss_newton_seed(z);  // multipliers and activity moved
    double grad_norm = std::numeric_limits<double>::infinity();
    bool inner_ok = minimize_phi(z, omega, grad_norm);

    Eigen::VectorXd cz = ev.c(z);
    Eigen::VectorXd gz = ev.g(z);
    // First-order multiplier updates, taken at the subproblem minimizer
    // (projecting first would freeze them: c would already be ~0).
    Eigen::VectorXd lambda_hat = lambda + rho * cz;
    Eigen::VectorXd mu_hat(mi);
    for (int i = 0; i < mi; ++i) mu_hat[i] = std::max(0.0, mu[i] + rho * gz[i]);

    double viol = 0.0;
    if (me > 0) viol = cz.lpNorm<Eigen::Infinity>();
    for (int i = 0; i < mi; ++i) viol = std::max(viol, gz[i]);

    // Polish window: only when the iterate is already essentially stationary
    // and the violation is within a small factor of the target. Projecting
    // from sloppier iterates perturbs stationarity through the stiff
    // terminal-leg curvature and makes the outer loop thrash.
    if (grad_norm <= std::max(omega, opts.kkt_tol) && viol > opts.feas_tol
        && viol <= std::max(30.0 * opts.feas_tol, 1e-6)) {
      project_feasible(z);
      cz = ev.c(z);
      gz = ev.g(z);
      viol = 0.0;
      if (me > 0) viol = cz.lpNorm<Eigen::Infinity>();
      for (int i = 0; i < mi; ++i) viol = std::max(viol, gz[i]);
      // Stationarity at the polished point, with the multipliers held fixed.
      Eigen::VectorXd gl = ev.grad_f(z);
      ++res.gradient_evals;
      if (me > 0) gl.noalias() += ev.jac_c(z).transpose() * lambda_hat;
      if (mi > 0) gl.noalias() += ev.jac_g(z).transpose() * mu_hat;
      grad_norm = gl.lpNorm<Eigen::Infinity>();
    }

    double comp = 0.0;
    for (int i = 0; i < mi; ++i) comp = std::max(comp, std::abs(mu_hat[i] * gz[i]));

#ifdef PERMON_NLP_TRACE
    std::fprintf(stderr, "  [nlp] outer=%d inner_ok=%d omega=%.1e grad=%.2e viol=%.2e rho=%.1e\n",
                 outer + 1, inner_ok ? 1 : 0, omega, grad_norm, viol, rho);
#endif
    // At the inner optimum grad_phi equals the Lagrangian gradient with the
    // updated multipliers, so grad_norm doubles as the stationarity residual.
    res.stationarity = grad_norm;
    res.feasibility = viol;
    res.complementarity = comp;
    res.z = z;
    res.lambda = lambda_hat;
    res.mu = mu_hat;
    res.rho = rho;

    if (grad_norm <= opts.kkt_tol && viol <= opts.feas_tol && comp <= opts.kkt_tol) {
      res.status = NlpStatus::converged;
      break;
    }
    // Persistent inner stalls with no feasibility progress: give up rather than
    // loop to max_outer.
    stalls = (!inner_ok && viol >= 0.99 * viol_prev) ? stalls + 1 : 0;
    if (stalls >= 8) {
      res.status = NlpStatus::line_search_failure;
      break;
    }

    lambda = lambda_hat;
    mu = mu_hat;
    // Raise the penalty only after a sufficiently solved subproblem failed to
    // cut the violation; otherwise apparent stagnation is just an unfinished
    // inner minimization, and growing rho would only worsen its conditioning.
    if (inner_ok && viol > opts.feas_tol && viol > 0.3 * viol_prev)
      rho = std::min(rho * opts.rho_growth, opts.rho_max);
    viol_prev = viol;
    // Tighten the subproblem tolerance only at the pace the inner loop can
    // sustain; demanding an unreachable omega turns every outer iteration
    // into a full failed inner sweep.
    omega = inner_ok ? std::max(0.3 * omega, omega_min)
                     : std::min(3.0 * omega, omega_start);
  }

  res.objective = ev.f(res.z);
  return res;
}

// A one-parameter family of problems, for finite-difference sensitivity checks.
struct NlpFamily {
  std::function<NlpProblem(double)> problem;
  std::function<Eigen::VectorXd(double)> initial;
};

// Central-difference estimate of d(optimal value)/dp. The perturbed solves are
// warm-started from the base solution at p.
inline double fd_sensitivity(const NlpFamily& family, double p, double eta,
                             const NlpOptions& opts = {}) {
  if (!(eta > 0.0)) throw std::invalid_argument("fd_sensitivity: step must be positive");
  NlpProblem base = family.problem(p);
  NlpResult base_res = solve_nlp(base, family.initial(p), opts);
  NlpWarmStart warm{base_res.z, base_res.lambda, base_res.mu, base_res.rho};

  NlpProblem plus = family.problem(p + eta);
  NlpResult rp = solve_nlp(plus, family.initial(p + eta), opts, &warm);
  NlpProblem minus = family.problem(p - eta);
  NlpResult rm = solve_nlp(minus, family.initial(p - eta), opts, &warm);
  return (rp.objective - rm.objective) / (2.0 * eta);
}

}  // namespace permon
