#pragma once

// Local minimum-time draining problem for one visit: enter the sensing disk at a
// fixed rim point, drive the (relaxed) uncertainty to zero exactly when crossing
// the inner circle, then run straight to the requested departure point. The
// smooth relaxation drops the hybrid clamp; its optimum coincides with the
// hybrid one and the true trace is recovered by projection (see sim.hpp).
//
// Transcribed by direct multiple shooting on N explicit-Euler intervals with the
// horizon as a decision variable (h = t0/N), solved with the augmented
// Lagrangian solver from nlp.hpp.

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "permon/model.hpp"
#include "permon/nlp.hpp"
#include "permon/sim.hpp"
#include "permon/vec.hpp"

namespace permon {

struct DrainingProblem {
  TargetSpec target;
  Vec2 entrance{};               // s_phi, on the r-circle
  Vec2 departure{};              // s_psi, inside or on the sensing disk
  double arrival_uncertainty = 0.0;  // R at the entrance instant
  int nodes = 20;                // shooting intervals N
};

struct DrainingOptions {
  NlpOptions nlp;
  double t_min = 1e-3;           // lower bound on the inner horizon
  // Softening length for the terminal-leg norm: the reported T* always uses
  // the exact leg, but the solver minimizes sqrt(leg^2 + eps^2), whose
  // curvature near a coincident exit scales like 1/eps. Too small a value
  // stalls the quasi-Newton inner loop there.
  double norm_smoothing = 1e-4;
  DrainingOptions() {
    nlp.kkt_tol = 1e-6;
    nlp.feas_tol = 1e-8;
  }
};

// Decision vector layout: [s_0 R_0 ... s_N R_N | u_0 ... u_{N-1} | t0 | s0].
struct Transcription {
  NlpProblem nlp;
  Eigen::VectorXd initial_guess;
  int N = 0;
  int idx_t0 = 0, idx_s0 = 0;

  int idx_s(int j) const { return 3 * j; }
  int idx_R(int j) const { return 3 * j + 2; }
  int idx_u(int j) const { return 3 * (N + 1) + 2 * j; }
  // Equality row blocks.
  int row_sdef(int j) const { return 2 * j; }       // 2 rows per interval
  int row_Rdef(int j) const { return 2 * N + j; }   // 1 row per interval
  int row_entrance() const { return 3 * N; }        // 2 rows
  int row_R0() const { return 3 * N + 2; }
  int row_pin() const { return 3 * N + 3; }         // 2 rows: s_N = s0
  int row_circle() const { return 3 * N + 5; }
  // Inequality rows: 0..N-1 control bound, N drain, N+1 horizon.
  int row_ubound(int j) const { return j; }
  int row_drain() const { return N; }
  int row_tmin() const { return N + 1; }
};

inline void check_draining_problem(const DrainingProblem& p) {
  if (p.nodes < 2) throw std::invalid_argument("draining: need at least 2 shooting intervals");
  if (!(p.arrival_uncertainty >= 0.0))
    throw std::invalid_argument("draining: arrival uncertainty must be >= 0");
  double rim = std::abs(distance(p.entrance, p.target.position) - p.target.r);
  if (rim > 1e-6 * std::max(1.0, p.target.r))
    throw std::invalid_argument("draining: entrance point is not on the sensing rim");
  if (distance(p.departure, p.target.position) > p.target.r + 1e-6 * std::max(1.0, p.target.r))
    throw std::invalid_argument("draining: departure point is outside the sensing disk");
}

inline Transcription transcribe(const DrainingProblem& prob, const DrainingOptions& opts = {}) {
  check_draining_problem(prob);
  Transcription tr;
  const int N = prob.nodes;
  tr.N = N;
  tr.idx_t0 = 3 * (N + 1) + 2 * N;
  tr.idx_s0 = tr.idx_t0 + 1;

  const TargetSpec tgt = prob.target;
  const Vec2 x = tgt.position;
  const Vec2 s_phi = prob.entrance;
  const Vec2 s_psi = prob.departure;
  const double Rha = prob.arrival_uncertainty;
  const double delta = inner_radius(tgt);
  const double t_min = opts.t_min;
  const double eps2 = opts.norm_smoothing * opts.norm_smoothing;

  NlpProblem nlp;
  nlp.n = 5 * N + 6;
  nlp.num_equality = 3 * N + 6;
  nlp.num_inequality = N + 2;

  auto s_at = [tr](const Eigen::VectorXd& z, int j) {
    return Vec2{z[tr.idx_s(j)], z[tr.idx_s(j) + 1]};
  };
  auto u_at = [tr](const Eigen::VectorXd& z, int j) {
    return Vec2{z[tr.idx_u(j)], z[tr.idx_u(j) + 1]};
  };
  auto s0_at = [tr](const Eigen::VectorXd& z) { return Vec2{z[tr.idx_s0], z[tr.idx_s0 + 1]}; };

  nlp.objective = [=](const Eigen::VectorXd& z) {
    Vec2 gap = s_psi - s0_at(z);
    return z[tr.idx_t0] + std::sqrt(norm_sq(gap) + eps2);
  };
  nlp.gradient = [=](const Eigen::VectorXd& z) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(nlp.n);
    g[tr.idx_t0] = 1.0;
    Vec2 gap = s_psi - s0_at(z);
    double n = std::sqrt(norm_sq(gap) + eps2);
    g[tr.idx_s0] = -gap.x / n;
    g[tr.idx_s0 + 1] = -gap.y / n;
    return g;
  };
  // The terminal-leg curvature scales like 1/smoothing near departure/return
  // coincidence; handing the solver the exact 2x2 block keeps its seed honest.
  nlp.objective_hessian = [=](const Eigen::VectorXd& z) {
    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(nlp.n, nlp.n);
    Vec2 gap = s_psi - s0_at(z);
    double n2 = norm_sq(gap) + eps2;
    double n1 = std::sqrt(n2), n3 = n2 * n1;
    hess(tr.idx_s0, tr.idx_s0) = 1.0 / n1 - gap.x * gap.x / n3;
    hess(tr.idx_s0 + 1, tr.idx_s0 + 1) = 1.0 / n1 - gap.y * gap.y / n3;
    hess(tr.idx_s0, tr.idx_s0 + 1) = -gap.x * gap.y / n3;
    hess(tr.idx_s0 + 1, tr.idx_s0) = -gap.x * gap.y / n3;
    return hess;
  };

  nlp.equality = [=](const Eigen::VectorXd& z) {
    Eigen::VectorXd c(nlp.num_equality);
    double h = z[tr.idx_t0] / N;
    for (int j = 0; j < N; ++j) {
      Vec2 sj = s_at(z, j), sj1 = s_at(z, j + 1), uj = u_at(z, j);
      Vec2 sdef = sj1 - sj - h * uj;
      c[tr.row_sdef(j)] = sdef.x;
      c[tr.row_sdef(j) + 1] = sdef.y;
      c[tr.row_Rdef(j)] = z[tr.idx_R(j + 1)] - z[tr.idx_R(j)] - h * smooth_rate(tgt, sj);
    }
    Vec2 s0node = s_at(z, 0);
    c[tr.row_entrance()] = s0node.x - s_phi.x;
    c[tr.row_entrance() + 1] = s0node.y - s_phi.y;
    c[tr.row_R0()] = z[tr.idx_R(0)] - Rha;
    Vec2 sN = s_at(z, N), s0 = s0_at(z);
    c[tr.row_pin()] = sN.x - s0.x;
    c[tr.row_pin() + 1] = sN.y - s0.y;
    c[tr.row_circle()] = norm_sq(s0 - x) - delta * delta;
    return c;
  };
  nlp.equality_jacobian = [=](const Eigen::VectorXd& z) {
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(nlp.num_equality, nlp.n);
    double h = z[tr.idx_t0] / N;
    for (int j = 0; j < N; ++j) {
      Vec2 sj = s_at(z, j), uj = u_at(z, j);
      int r0 = tr.row_sdef(j);
      J(r0, tr.idx_s(j + 1)) = 1.0;
      J(r0 + 1, tr.idx_s(j + 1) + 1) = 1.0;
      J(r0, tr.idx_s(j)) = -1.0;
      J(r0 + 1, tr.idx_s(j) + 1) = -1.0;
      J(r0, tr.idx_u(j)) = -h;
      J(r0 + 1, tr.idx_u(j) + 1) = -h;
      J(r0, tr.idx_t0) = -uj.x / N;
      J(r0 + 1, tr.idx_t0) = -uj.y / N;

      int rR = tr.row_Rdef(j);
      J(rR, tr.idx_R(j + 1)) = 1.0;
      J(rR, tr.idx_R(j)) = -1.0;
      Vec2 rel = sj - x;
      if (norm_sq(rel) <= tgt.r * tgt.r) {  // inside the disk: sensing is active
        double k = -2.0 * h * tgt.B / (tgt.r * tgt.r);
        J(rR, tr.idx_s(j)) = k * rel.x;
        J(rR, tr.idx_s(j) + 1) = k * rel.y;
      }
      J(rR, tr.idx_t0) = -smooth_rate(tgt, sj) / N;
    }
    J(tr.row_entrance(), tr.idx_s(0)) = 1.0;
    J(tr.row_entrance() + 1, tr.idx_s(0) + 1) = 1.0;
    J(tr.row_R0(), tr.idx_R(0)) = 1.0;
    J(tr.row_pin(), tr.idx_s(N)) = 1.0;
    J(tr.row_pin() + 1, tr.idx_s(N) + 1) = 1.0;
    J(tr.row_pin(), tr.idx_s0) = -1.0;
    J(tr.row_pin() + 1, tr.idx_s0 + 1) = -1.0;
    Vec2 rel0 = s0_at(z) - x;
    J(tr.row_circle(), tr.idx_s0) = 2.0 * rel0.x;
    J(tr.row_circle(), tr.idx_s0 + 1) = 2.0 * rel0.y;
    return J;
  };

  // Exact weighted second derivatives of the constraint rows. The only
  // nonlinear pieces are the t0-u and t0-s couplings of the defects, the
  // in-disk sensing quadratic, the departure-circle quadratic, and the
  // control-norm bounds; everything else is affine.
  nlp.constraint_curvature = [=](const Eigen::VectorXd& z, const Eigen::VectorXd& we,
                                 const Eigen::VectorXd& wi) {
    Eigen::MatrixXd He = Eigen::MatrixXd::Zero(nlp.n, nlp.n);
    const int it0 = tr.idx_t0;
    const double t0v = z[it0];
    for (int j = 0; j < N; ++j) {
      const int r0 = tr.row_sdef(j);
      const int iu = tr.idx_u(j);
      He(it0, iu) += -we[r0] / N;
      He(iu, it0) += -we[r0] / N;
      He(it0, iu + 1) += -we[r0 + 1] / N;
      He(iu + 1, it0) += -we[r0 + 1] / N;

      const int is = tr.idx_s(j);
      Vec2 rel = s_at(z, j) - x;
      if (norm_sq(rel) <= tgt.r * tgt.r) {
        const double w = we[tr.row_Rdef(j)];
        const double k = 2.0 * tgt.B / (tgt.r * tgt.r);
        const double cts_x = -k * rel.x / N, cts_y = -k * rel.y / N;
        He(it0, is) += w * cts_x;
        He(is, it0) += w * cts_x;
        He(it0, is + 1) += w * cts_y;
        He(is + 1, it0) += w * cts_y;
        const double css = -(t0v / N) * k;
        He(is, is) += w * css;
        He(is + 1, is + 1) += w * css;
      }

      const double wu = wi[tr.row_ubound(j)];
      if (wu > 0.0) {
        He(iu, iu) += 2.0 * wu;
        He(iu + 1, iu + 1) += 2.0 * wu;
      }
    }
    const double wc = we[tr.row_circle()];
    He(tr.idx_s0, tr.idx_s0) += 2.0 * wc;
    He(tr.idx_s0 + 1, tr.idx_s0 + 1) += 2.0 * wc;
    return He;
  };

  nlp.inequality = [=](const Eigen::VectorXd& z) {
    Eigen::VectorXd g(nlp.num_inequality);
    for (int j = 0; j < N; ++j) g[tr.row_ubound(j)] = norm_sq(u_at(z, j)) - 1.0;
    g[tr.row_drain()] = z[tr.idx_R(N)];
    g[tr.row_tmin()] = t_min - z[tr.idx_t0];
    return g;
  };
  nlp.inequality_jacobian = [=](const Eigen::VectorXd& z) {
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(nlp.num_inequality, nlp.n);
    for (int j = 0; j < N; ++j) {
      Vec2 uj = u_at(z, j);
      J(tr.row_ubound(j), tr.idx_u(j)) = 2.0 * uj.x;
      J(tr.row_ubound(j), tr.idx_u(j) + 1) = 2.0 * uj.y;
    }
    J(tr.row_drain(), tr.idx_R(N)) = 1.0;
    J(tr.row_tmin(), tr.idx_t0) = -1.0;
    return J;
  };
  tr.nlp = nlp;

  // Cold start: constant-speed traversal of the polyline entrance -> center ->
  // inner-circle point nearest the departure, stretched to the dive-and-dwell
  // time estimate when the arrival level calls for a dwell.
  Vec2 exit_dir = unit(s_psi - x, -1.0 * unit(s_phi - x));
  Vec2 q = x + delta * exit_dir;
  double path_len = tgt.r + delta;
  double t0_init = path_len;
  double thresh = greedy_threshold(tgt);
  if (Rha > thresh)
    t0_init = std::max(t0_init, 2.0 * tgt.r + (Rha - thresh) / (tgt.B - tgt.A));

  Eigen::VectorXd z0 = Eigen::VectorXd::Zero(nlp.n);
  double h0 = t0_init / N;
  auto point_on_path = [&](double arc) {
    if (arc <= tgt.r) return s_phi + (arc / tgt.r) * (x - s_phi);
    double a2 = std::min(arc - tgt.r, delta);
    return x + a2 * exit_dir;
  };
  for (int j = 0; j <= N; ++j) {
    Vec2 p = point_on_path(path_len * j / static_cast<double>(N));
    z0[tr.idx_s(j)] = p.x;
    z0[tr.idx_s(j) + 1] = p.y;
  }
  z0[tr.idx_R(0)] = Rha;
  for (int j = 0; j < N; ++j) {
    Vec2 sj{z0[tr.idx_s(j)], z0[tr.idx_s(j) + 1]};
    Vec2 sj1{z0[tr.idx_s(j + 1)], z0[tr.idx_s(j + 1) + 1]};
    Vec2 u = (sj1 - sj) / h0;
    z0[tr.idx_u(j)] = u.x;
    z0[tr.idx_u(j) + 1] = u.y;
    z0[tr.idx_R(j + 1)] = z0[tr.idx_R(j)] + h0 * smooth_rate(tgt, sj);
  }
  z0[tr.idx_t0] = t0_init;
  z0[tr.idx_s0] = q.x;
  z0[tr.idx_s0 + 1] = q.y;
  tr.initial_guess = z0;
  return tr;
}

struct DrainingSolution {
  DrainingProblem problem;
  double total_time = 0.0;       // T* = t0 + |s_psi - s0|
  double inner_exit_time = 0.0;  // t0
  Vec2 inner_exit{};             // s0, on the inner circle
  std::vector<Vec2> node_positions;
  std::vector<double> node_uncertainty;  // relaxed levels at the nodes
  std::vector<Vec2> node_controls;

  // Sensitivities of T* (sign convention: gradients, not raw multipliers).
  Vec2 lambda_entrance{};   // dT*/d s_phi
  Vec2 lambda_departure{};  // dT*/d s_psi
  double lambda_drain = 0.0;   // dT*/d arrival uncertainty, >= 0
  double lambda_circle = 0.0;  // multiplier of the inner-circle membership row
  bool departure_coincident = false;  // terminal leg degenerated to a point

  NlpResult report;
  bool converged() const { return report.status == NlpStatus::converged; }
};

inline DrainingSolution extract_solution(const DrainingProblem& prob, const Transcription& tr,
                                         const NlpResult& res) {
  DrainingSolution sol;
  sol.problem = prob;
  sol.report = res;
  const int N = tr.N;
  const Eigen::VectorXd& z = res.z;
  sol.inner_exit_time = z[tr.idx_t0];
  sol.inner_exit = {z[tr.idx_s0], z[tr.idx_s0 + 1]};
  double leg = distance(prob.departure, sol.inner_exit);
  sol.total_time = sol.inner_exit_time + leg;
  sol.node_positions.resize(N + 1);
  sol.node_uncertainty.resize(N + 1);
  sol.node_controls.resize(N);
  for (int j = 0; j <= N; ++j) {
    sol.node_positions[j] = {z[tr.idx_s(j)], z[tr.idx_s(j) + 1]};
    sol.node_uncertainty[j] = z[tr.idx_R(j)];
  }
  for (int j = 0; j < N; ++j) sol.node_controls[j] = {z[tr.idx_u(j)], z[tr.idx_u(j) + 1]};

  sol.lambda_entrance = {-res.lambda[tr.row_entrance()], -res.lambda[tr.row_entrance() + 1]};
  sol.lambda_drain = res.mu[tr.row_drain()];
  sol.lambda_circle = res.lambda[tr.row_circle()];
  Vec2 lam_pin{res.lambda[tr.row_pin()], res.lambda[tr.row_pin() + 1]};
  // Terminal-cost gradient w.r.t. the departure point, read off the stationarity
  // condition for the free inner exit so it stays well defined when the leg
  // degenerates to a point.
  sol.lambda_departure =
      2.0 * sol.lambda_circle * (sol.inner_exit - prob.target.position) - lam_pin;
  sol.departure_coincident = leg <= 1e-6 * std::max(1.0, prob.target.r);
  return sol;
}

inline DrainingSolution solve_draining(const DrainingProblem& prob,
                                       const DrainingOptions& opts = {},
                                       const DrainingSolution* warm = nullptr) {
  Transcription tr = transcribe(prob, opts);

  if (warm && warm->report.z.size() == tr.nlp.n) {
    // Near-exact carried multipliers make a moderate penalty sufficient;
    // re-importing a large final rho only stiffens the first subproblems.
    NlpWarmStart ws{warm->report.z, warm->report.lambda, warm->report.mu,
                    std::min(warm->report.rho, 1e4)};
    // A useful warm start converges in well under this budget; past it, the
    // carried-over penalty state is doing harm, so fall back to a cold solve.
    NlpOptions quick = opts.nlp;
    quick.max_outer = std::min(quick.max_outer, 25);
    NlpResult res = solve_nlp(tr.nlp, tr.initial_guess, quick, &ws);
    if (res.status == NlpStatus::converged) return extract_solution(prob, tr, res);
  }

  NlpResult res = solve_nlp(tr.nlp, tr.initial_guess, opts.nlp);
  if (res.status != NlpStatus::converged) {
    NlpOptions retry = opts.nlp;
    retry.rho0 = 100.0;
    retry.max_inner = 2 * opts.nlp.max_inner;
    res = solve_nlp(tr.nlp, tr.initial_guess, retry);
  }
  if (res.status != NlpStatus::converged) {
    NlpOptions retry = opts.nlp;
    retry.rho0 = 1000.0;
    retry.max_inner = 2 * opts.nlp.max_inner;
    Eigen::VectorXd stretched = tr.initial_guess;
    stretched[tr.idx_t0] *= 1.5;
    res = solve_nlp(tr.nlp, stretched, retry);
  }
  return extract_solution(prob, tr, res);
}

// Control replay for the whole visit: the N shooting intervals followed by the
// straight terminal leg to the departure point.
inline ControlSchedule control_schedule(const DrainingSolution& sol) {
  ControlSchedule sched;
  double h = sol.inner_exit_time / static_cast<double>(sol.node_controls.size());
  for (const Vec2& u : sol.node_controls) sched.append(h, u);
  Vec2 gap = sol.problem.departure - sol.inner_exit;
  double leg = norm(gap);
  if (leg > 1e-12) sched.append(leg, gap / leg);
  return sched;
}

// Dive-to-center-and-dwell closed form: exact when the arrival level is at or
// above greedy_threshold; below it, the no-dwell travel bound 2r is returned.
struct GreedyVisit {
  double total_time = 0.0;   // entrance to the inner-circle exit on a radial path
  double dwell_time = 0.0;
  double inner_exit_time = 0.0;  // instant the level reaches zero on the way out
};

inline GreedyVisit greedy_closed_form(const TargetSpec& tgt, double arrival_uncertainty) {
  if (!(arrival_uncertainty >= 0.0))
    throw std::invalid_argument("greedy_closed_form: arrival uncertainty must be >= 0");
  GreedyVisit v;
  double thresh = greedy_threshold(tgt);
  v.dwell_time = arrival_uncertainty >= thresh
                     ? (arrival_uncertainty - thresh) / (tgt.B - tgt.A)
                     : 0.0;
  v.total_time = 2.0 * tgt.r + v.dwell_time;
  v.inner_exit_time = v.total_time - (tgt.r - inner_radius(tgt));
  return v;
}

struct VerifyReport {
  bool unique_crossing = false;    // one entry into the inner disk, exit at t0 with R ~ 0
  bool terminal_clear = false;     // straight leg stays outside the inner disk
  bool straight_when_drained = false;  // zero-uncertainty stretch implies a straight path
  bool replay_drains = false;      // hybrid replay reaches zero uncertainty
  bool replay_reaches = false;     // hybrid replay ends at the departure point
  double min_replay_uncertainty = 0.0;
  double replay_position_error = 0.0;
  bool ok() const {
    return unique_crossing && terminal_clear && straight_when_drained && replay_drains
           && replay_reaches;
  }
};

inline VerifyReport verify_solution(const DrainingSolution& sol, double dt = 1e-3) {
  VerifyReport rep;
  const TargetSpec& tgt = sol.problem.target;
  const Vec2 x = tgt.position;
  const double delta = inner_radius(tgt);
  const double scale = std::max(1.0, tgt.r);
  const int N = static_cast<int>(sol.node_controls.size());

  // (a) the node path enters the inner disk once and exits exactly at t0.
  const double band = 1e-7 * scale;
  int changes = 0;
  int prev_side = 0;  // +1 outside, -1 inside
  for (const Vec2& s : sol.node_positions) {
    double d = distance(s, x) - delta;
    int side = d > band ? 1 : (d < -band ? -1 : 0);
    if (side != 0) {
      if (prev_side != 0 && side != prev_side) ++changes;
      prev_side = side;
    }
  }
  double end_gap = std::abs(distance(sol.node_positions.back(), x) - delta);
  double RN = sol.node_uncertainty.back();
  rep.unique_crossing = changes <= 2 && end_gap <= 1e-6 * scale && RN <= 1e-6;

  // (b) terminal leg keeps distance >= delta.
  Vec2 a = sol.inner_exit, b = sol.problem.departure;
  double min_d;
  if (distance(a, b) < 1e-12) {
    min_d = distance(a, x);
  } else {
    Vec2 ab = b - a;
    double t = std::clamp(dot(x - a, ab) / norm_sq(ab), 0.0, 1.0);
    min_d = distance(a + t * ab, x);
  }
  rep.terminal_clear = min_d >= delta - 1e-6 * scale;

  // (c) a drained stretch longer than two intervals forces a straight path.
  int run = 0, max_run = 0;
  for (double R : sol.node_uncertainty) {
    run = R <= 1e-9 ? run + 1 : 0;
    max_run = std::max(max_run, run);
  }
  rep.straight_when_drained = true;
  if (max_run >= 4) {  // spans more than 2h of the horizon
    Vec2 p0 = sol.node_positions.front(), p1 = sol.node_positions.back();
    Vec2 dir = p1 - p0;
    double L = norm(dir);
    double worst = 0.0;
    for (const Vec2& s : sol.node_positions) {
      if (L < 1e-9) {
        worst = std::max(worst, distance(s, p0));
      } else {
        Vec2 rel = s - p0;
        worst = std::max(worst, std::abs(rel.x * dir.y - rel.y * dir.x) / L);
      }
    }
    rep.straight_when_drained = worst <= 1e-4;
  }

  // (d) hybrid replay of the full visit control.
  Scenario one;
  one.targets = {tgt};
  one.sequence = {tgt.id};
  one.initial_uncertainty = {sol.problem.arrival_uncertainty};
  HybridState st{0.0, sol.problem.entrance, {sol.problem.arrival_uncertainty}};
  std::vector<TrajectorySample> samples;
  integrate_hybrid(one, st, control_schedule(sol), dt, {}, &samples);
  double min_R = sol.problem.arrival_uncertainty;
  for (const TrajectorySample& smp : samples) min_R = std::min(min_R, smp.R[0]);
  min_R = std::min(min_R, st.R[0]);
  rep.min_replay_uncertainty = min_R;
  rep.replay_position_error = distance(st.s, sol.problem.departure);
  rep.replay_drains = min_R <= 1e-4 * std::max(sol.problem.arrival_uncertainty, 1.0);
  rep.replay_reaches = rep.replay_position_error <= 1e-3 * tgt.r;
  return rep;
}

}  // namespace permon
