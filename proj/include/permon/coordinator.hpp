#pragma once

// Bilevel coordinator: the outer problem optimizes one entrance angle and one
// (inner-circle) departure angle per visit; every cycle the inner draining
// problems are re-solved, their multipliers assemble the gradient of the cycle
// period with respect to the angles, and a diminishing step updates the angles.

#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include "permon/draining.hpp"
#include "permon/model.hpp"
#include "permon/sim.hpp"
#include "permon/vec.hpp"

namespace permon {

inline constexpr double two_pi = 6.283185307179586476925286766559;

struct BoundaryAngles {
  std::vector<double> phi;  // entrance angles, one per visit (rim circle)
  std::vector<double> psi;  // departure angles, one per visit (inner circle)
};

inline double wrap_angle(double a) {
  double w = std::fmod(a, two_pi);
  return w < 0.0 ? w + two_pi : w;
}

inline Vec2 entrance_point(const Scenario& sc, const BoundaryAngles& ang, int k) {
  const TargetSpec& t = sc.target_by_id(sc.sequence[static_cast<std::size_t>(k)]);
  return t.position + t.r * from_angle(ang.phi[static_cast<std::size_t>(k)]);
}

inline Vec2 departure_point(const Scenario& sc, const BoundaryAngles& ang, int k) {
  const TargetSpec& t = sc.target_by_id(sc.sequence[static_cast<std::size_t>(k)]);
  return t.position + inner_radius(t) * from_angle(ang.psi[static_cast<std::size_t>(k)]);
}

// Line-of-centers initialization: depart towards the next target, enter facing
// back towards the previous one.
inline BoundaryAngles initialize_angles(const Scenario& sc) {
  const int K = static_cast<int>(sc.sequence.size());
  if (K < 2) throw std::invalid_argument("initialize_angles: need at least two visits");
  BoundaryAngles ang;
  ang.phi.assign(K, 0.0);
  ang.psi.assign(K, 0.0);
  for (int k = 0; k < K; ++k) {
    int next = (k + 1) % K;
    Vec2 d = sc.target_by_id(sc.sequence[next]).position
             - sc.target_by_id(sc.sequence[k]).position;
    ang.psi[k] = wrap_angle(polar_angle(d));
    ang.phi[next] = wrap_angle(polar_angle(-1.0 * d));
  }
  return ang;
}

// Uncertainty accumulated on the straight departure leg between the inner
// circle (angle psi0) and the rim crossing (angle psi), starting from a fully
// drained level. When the chord first dips back through the inner disk the
// level stays clamped at zero there, and only the sub-chord from the second
// inner crossing onward accumulates; power-of-a-point gives that length as
// (r^2 - d^2)/chord. Either way the result is a cubic in the effective length.
inline double epsilon_annulus(const TargetSpec& tgt, double inner_angle, double outer_angle) {
  const double r = tgt.r, d = inner_radius(tgt);
  const double c1 = (tgt.A - tgt.B) + tgt.B * (r * r + d * d) / (2.0 * r * r);
  const double c3 = tgt.B / (6.0 * r * r);
  double cth = std::cos(outer_angle - inner_angle);
  double len_sq = r * r + d * d - 2.0 * r * d * cth;
  double len = std::sqrt(len_sq);
  double eff = len_sq <= r * r - d * d ? len : (r * r - d * d) / len;
  return c1 * eff - c3 * eff * eff * eff;
}

struct EpsilonPartials {
  double d_inner = 0.0;  // d(eps)/d(inner_angle)
  double d_outer = 0.0;  // d(eps)/d(outer_angle)
};

inline EpsilonPartials epsilon_partials(const TargetSpec& tgt, double inner_angle,
                                        double outer_angle) {
  const double r = tgt.r, d = inner_radius(tgt);
  const double c1 = (tgt.A - tgt.B) + tgt.B * (r * r + d * d) / (2.0 * r * r);
  const double c3 = tgt.B / (6.0 * r * r);
  double th = outer_angle - inner_angle;
  double len_sq = r * r + d * d - 2.0 * r * d * std::cos(th);
  double len = std::sqrt(len_sq);
  double dlen_dth = r * d * std::sin(th) / len;
  double eff, deff_dlen;
  if (len_sq <= r * r - d * d) {
    eff = len;
    deff_dlen = 1.0;
  } else {
    eff = (r * r - d * d) / len;
    deff_dlen = -(r * r - d * d) / len_sq;
  }
  double g1 = c1 - 3.0 * c3 * eff * eff;  // d(eps)/d(eff)
  double deps_dth = g1 * deff_dlen * dlen_dth;
  return {-deps_dth, deps_dth};
}

struct SwitchSegment {
  Vec2 from{}, to{};
  double length = 0.0;
  double d_length_d_psi = 0.0;       // w.r.t. the departing visit's psi
  double d_length_d_phi_next = 0.0;  // w.r.t. the next visit's phi
  bool zero_length = false;
  double outer_angle = 0.0;   // polar angle of the rim crossing, about the departed target
  double in_disk_length = 0.0;  // leg portion inside the departed target's disk
};

// Switching leg k: from the departure point of visit k straight to the entrance
// point of visit k+1 (cyclic).
inline SwitchSegment switch_segment(const Scenario& sc, const BoundaryAngles& ang, int k) {
  const int K = static_cast<int>(sc.sequence.size());
  const int next = (k + 1) % K;
  const TargetSpec& tgt = sc.target_by_id(sc.sequence[static_cast<std::size_t>(k)]);
  const TargetSpec& tgt_next = sc.target_by_id(sc.sequence[static_cast<std::size_t>(next)]);

  SwitchSegment seg;
  seg.from = departure_point(sc, ang, k);
  seg.to = entrance_point(sc, ang, next);
  seg.length = distance(seg.from, seg.to);
  if (seg.length <= 1e-12) {
    seg.zero_length = true;
    seg.outer_angle = wrap_angle(ang.psi[static_cast<std::size_t>(k)]);
    return seg;
  }
  Vec2 dir = (seg.to - seg.from) / seg.length;
  seg.d_length_d_psi =
      dot(-1.0 * dir, inner_radius(tgt) * angle_tangent(ang.psi[static_cast<std::size_t>(k)]));
  seg.d_length_d_phi_next =
      dot(dir, tgt_next.r * angle_tangent(ang.phi[static_cast<std::size_t>(next)]));

  // First rim crossing of the departed target (exists: the leg starts inside).
  Vec2 rel = seg.from - tgt.position;
  double b = dot(dir, rel);
  double disc = b * b - (norm_sq(rel) - tgt.r * tgt.r);
  double t_cross = -b + std::sqrt(std::max(0.0, disc));
  seg.in_disk_length = std::min(t_cross, seg.length);
  seg.outer_angle = polar_angle(rel + seg.in_disk_length * dir);
  return seg;
}

struct VisitRecord {
  int target_id = 0;
  double arrival_uncertainty = 0.0;  // measured R at the entrance instant
  double drain_time = 0.0;           // T_k* from the inner solve
  double leg_in_time = 0.0;          // duration of the switching leg into this visit
  Vec2 lambda_entrance{};
  Vec2 lambda_departure{};
  double lambda_drain = 0.0;
  bool departure_coincident = false;
  double solve_seconds = 0.0;
  int solver_outer = 0;
  int solver_inner = 0;
};

struct CycleRecord {
  int index = 0;  // 1-based
  std::vector<VisitRecord> visits;
  double period = 0.0;  // simulated wall time of the full cycle
  std::vector<double> grad_phi, grad_psi;
  double grad_norm = 0.0;  // infinity norm over all 2K components
  double uncertainty_residual = std::numeric_limits<double>::infinity();
  BoundaryAngles angles;  // angles in effect during this cycle
};

// Predicted arrival level for visit k of the given cycle: the annulus
// accumulation of the previous departure from the same target plus linear
// growth over the time spent outside its sensing disk.
inline double predicted_arrival_uncertainty(const Scenario& sc, const CycleRecord& rec, int k) {
  const int K = static_cast<int>(rec.visits.size());
  if (k < 0 || k >= K) throw std::out_of_range("predicted_arrival_uncertainty: bad visit index");
  const int id = sc.sequence[static_cast<std::size_t>(k)];
  const TargetSpec& tgt = sc.target_by_id(id);

  // Previous occurrence of the same target in the cyclic sequence.
  int prev = -1;
  for (int back = 1; back <= K; ++back) {
    int j = ((k - back) % K + K) % K;
    if (sc.sequence[static_cast<std::size_t>(j)] == id) { prev = j; break; }
  }
  if (prev < 0 || rec.visits[static_cast<std::size_t>(prev)].drain_time <= 0.0)
    throw std::invalid_argument("predicted_arrival_uncertainty: target has no drained visit");

  SwitchSegment dep = switch_segment(sc, rec.angles, prev);
  double span = 0.0;  // departure of `prev` up to the entrance of `k`
  for (int j = (prev + 1) % K;; j = (j + 1) % K) {
    span += rec.visits[static_cast<std::size_t>(j)].leg_in_time;
    if (j == k) break;
    span += rec.visits[static_cast<std::size_t>(j)].drain_time;
  }
  double eps = epsilon_annulus(tgt, rec.angles.psi[static_cast<std::size_t>(prev)],
                               dep.outer_angle);
  return eps + tgt.A * (span - dep.in_disk_length);
}

struct CycleGradient {
  std::vector<double> d_phi, d_psi;
  double norm_inf = 0.0;
};

namespace detail {

// Central differences of the departure-leg geometry (rim-crossing angle and
// in-disk length) w.r.t. one angle entry; used only by the coupled gradient.
template <typename F>
inline double fd_angle(const Scenario& sc, const BoundaryAngles& ang, int leg, int which,
                       int entry, F&& pick) {
  const double h = 1e-6;
  BoundaryAngles a = ang;
  auto& v = which == 0 ? a.phi : a.psi;
  v[static_cast<std::size_t>(entry)] += h;
  double up = pick(switch_segment(sc, a, leg));
  v[static_cast<std::size_t>(entry)] -= 2.0 * h;
  double dn = pick(switch_segment(sc, a, leg));
  return (up - dn) / (2.0 * h);
}

}  // namespace detail

// Gradient of the cycle period w.r.t. all boundary angles, assembled from the
// inner-problem multipliers and the switching-leg geometry. With the coupling
// flag the dependence of each arrival level on the angles is added through a
// one-step expansion (see README).
inline CycleGradient cycle_gradient(const Scenario& sc, const BoundaryAngles& ang,
                                    const std::vector<DrainingSolution>& sols,
                                    bool include_uncertainty_coupling = false) {
  const int K = static_cast<int>(sc.sequence.size());
  if (static_cast<int>(sols.size()) != K)
    throw std::invalid_argument("cycle_gradient: one draining solution per visit required");

  CycleGradient g;
  g.d_phi.assign(K, 0.0);
  g.d_psi.assign(K, 0.0);
  std::vector<SwitchSegment> segs(K);
  for (int k = 0; k < K; ++k) segs[k] = switch_segment(sc, ang, k);

  for (int k = 0; k < K; ++k) {
    const TargetSpec& tgt = sc.target_by_id(sc.sequence[static_cast<std::size_t>(k)]);
    int prev = (k - 1 + K) % K;
    g.d_phi[k] = dot(sols[k].lambda_entrance,
                     tgt.r * angle_tangent(ang.phi[static_cast<std::size_t>(k)]))
                 + segs[prev].d_length_d_phi_next;
    g.d_psi[k] = dot(sols[k].lambda_departure,
                     inner_radius(tgt) * angle_tangent(ang.psi[static_cast<std::size_t>(k)]))
                 + segs[k].d_length_d_psi;
  }

  if (include_uncertainty_coupling) {
    // One-step sensitivity of each measured arrival level: d(eps + A*(time
    // outside)) / d(angle), using the uncoupled period gradient for the total
    // and the duals for the per-visit drain times.
    std::vector<double> base_phi = g.d_phi, base_psi = g.d_psi;
    for (int k = 0; k < K; ++k) {
      const int id = sc.sequence[static_cast<std::size_t>(k)];
      const TargetSpec& tgt = sc.target_by_id(id);
      double lamR = sols[k].lambda_drain;
      if (lamR == 0.0) continue;
      int prev = -1;
      for (int back = 1; back <= K; ++back) {
        int j = ((k - back) % K + K) % K;
        if (sc.sequence[static_cast<std::size_t>(j)] == id) { prev = j; break; }
      }
      if (prev < 0) continue;
      int pn = (prev + 1) % K;  // leg `prev` runs towards visit pn
      EpsilonPartials ep = epsilon_partials(tgt, ang.psi[static_cast<std::size_t>(prev)],
                                            segs[prev].outer_angle);
      auto outer = [](const SwitchSegment& s) { return s.outer_angle; };
      auto indisk = [](const SwitchSegment& s) { return s.in_disk_length; };
      for (int which = 0; which < 2; ++which) {
        for (int e = 0; e < K; ++e) {
          double dT_dtheta = which == 0 ? base_phi[e] : base_psi[e];
          const TargetSpec& te = sc.target_by_id(sc.sequence[static_cast<std::size_t>(e)]);
          double dTk_dtheta = 0.0;  // dual-based d(drain time of visit k)/d(theta)
          if (e == k) {
            dTk_dtheta =
                which == 0
                    ? dot(sols[k].lambda_entrance,
                          te.r * angle_tangent(ang.phi[static_cast<std::size_t>(e)]))
                    : dot(sols[k].lambda_departure,
                          inner_radius(te) * angle_tangent(ang.psi[static_cast<std::size_t>(e)]));
          }
          double deps = 0.0, dexit = 0.0;
          if ((which == 1 && e == prev) || (which == 0 && e == pn)) {
            double douter = detail::fd_angle(sc, ang, prev, which, e, outer);
            double dindisk = detail::fd_angle(sc, ang, prev, which, e, indisk);
            deps = ep.d_outer * douter + (which == 1 && e == prev ? ep.d_inner : 0.0);
            dexit = dindisk;
          }
          double dR = deps + tgt.A * (dT_dtheta - dTk_dtheta - dexit);
          if (which == 0)
            g.d_phi[e] += lamR * dR;
          else
            g.d_psi[e] += lamR * dR;
        }
      }
    }
  }

  for (int k = 0; k < K; ++k)
    g.norm_inf = std::max({g.norm_inf, std::abs(g.d_phi[k]), std::abs(g.d_psi[k])});
  return g;
}

// Diminishing-step projected update; angles wrap to [0, 2pi).
inline BoundaryAngles update_angles(const BoundaryAngles& ang, const CycleGradient& grad,
                                    double alpha0, double decay, int n) {
  double alpha = alpha0 / (1.0 + decay * static_cast<double>(n));
  BoundaryAngles out = ang;
  for (std::size_t k = 0; k < out.phi.size(); ++k) {
    out.phi[k] = wrap_angle(out.phi[k] - alpha * grad.d_phi[k]);
    out.psi[k] = wrap_angle(out.psi[k] - alpha * grad.d_psi[k]);
  }
  return out;
}

struct BilevelOptions {
  int nodes = 20;
  double dt = 1e-3;
  double alpha0 = 0.1;
  double decay = 0.1;
  double tol_grad = 1e-3;
  double tol_uncertainty = 1e-4;
  int max_cycles = 200;
  bool include_uncertainty_coupling = false;
  bool record_trajectory = true;  // keep samples of the last executed cycle
  std::optional<BoundaryAngles> initial_angles;
  DrainingOptions draining;
};

struct BilevelResult {
  bool converged = false;
  bool solver_failure = false;
  int cycles = 0;
  BoundaryAngles final_angles;
  double final_period = 0.0;
  std::vector<CycleRecord> history;
  std::vector<DrainingSolution> final_solutions;  // one per visit, last cycle
  std::vector<TrajectorySample> trajectory;       // last executed cycle
  HybridState final_state;
};

inline BilevelResult run_bilevel(const Scenario& sc, const BilevelOptions& opts = {}) {
  {
    auto issues = validate_scenario(sc);
    if (!issues.empty())
      throw std::invalid_argument("run_bilevel: invalid scenario: " + issues.front().message);
  }
  const int K = static_cast<int>(sc.sequence.size());
  BilevelResult out;
  BoundaryAngles ang = opts.initial_angles ? *opts.initial_angles : initialize_angles(sc);
  if (static_cast<int>(ang.phi.size()) != K || static_cast<int>(ang.psi.size()) != K)
    throw std::invalid_argument("run_bilevel: angle vectors must have one entry per visit");

  DrainingOptions dopts = opts.draining;
  HybridState state{0.0, departure_point(sc, ang, K - 1), sc.initial_uncertainty};
  std::vector<std::optional<DrainingSolution>> warm(static_cast<std::size_t>(K));
  std::vector<double> prev_arrivals;

  for (int cycle = 1; cycle <= opts.max_cycles; ++cycle) {
    CycleRecord rec;
    rec.index = cycle;
    rec.angles = ang;
    rec.visits.resize(static_cast<std::size_t>(K));
    double cycle_start = state.t;
    std::vector<DrainingSolution> sols;
    sols.reserve(static_cast<std::size_t>(K));
    if (opts.record_trajectory) out.trajectory.clear();
    auto* record = opts.record_trajectory ? &out.trajectory : nullptr;

    for (int k = 0; k < K; ++k) {
      VisitRecord& vr = rec.visits[static_cast<std::size_t>(k)];
      const TargetSpec& tgt = sc.target_by_id(sc.sequence[static_cast<std::size_t>(k)]);
      vr.target_id = tgt.id;

      Vec2 goal = entrance_point(sc, ang, k);
      double leg = distance(state.s, goal);
      if (leg > 1e-12) {
        ControlSchedule sw;
        sw.append(leg, (goal - state.s) / leg);
        integrate_hybrid(sc, state, sw, opts.dt, {PhaseKind::switching, k + 1}, record);
      }
      vr.leg_in_time = leg;
      int idx = sc.index_of(tgt.id);
      vr.arrival_uncertainty = state.R[static_cast<std::size_t>(idx)];

      DrainingProblem dp;
      dp.target = tgt;
      dp.entrance = goal;
      dp.departure = departure_point(sc, ang, k);
      dp.arrival_uncertainty = vr.arrival_uncertainty;
      dp.nodes = opts.nodes;
      auto clock0 = std::chrono::steady_clock::now();
      DrainingSolution sol = solve_draining(
          dp, dopts, warm[static_cast<std::size_t>(k)] ? &*warm[static_cast<std::size_t>(k)]
                                                       : nullptr);
      vr.solve_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - clock0)
                             .count();
      if (!sol.converged()) {
        out.solver_failure = true;
        out.cycles = cycle;
        out.final_angles = ang;
        out.history.push_back(rec);
        return out;
      }
      warm[static_cast<std::size_t>(k)] = sol;
      vr.drain_time = sol.total_time;
      vr.lambda_entrance = sol.lambda_entrance;
      vr.lambda_departure = sol.lambda_departure;
      vr.lambda_drain = sol.lambda_drain;
      vr.departure_coincident = sol.departure_coincident;
      vr.solver_outer = sol.report.outer_iterations;
      vr.solver_inner = sol.report.inner_iterations;

      integrate_hybrid(sc, state, control_schedule(sol), opts.dt,
                       {PhaseKind::draining, k + 1}, record);
      sols.push_back(std::move(sol));
    }

    rec.period = state.t - cycle_start;
    if (!prev_arrivals.empty()) {
      double resid = 0.0;
      for (int k = 0; k < K; ++k)
        resid = std::max(resid, std::abs(rec.visits[static_cast<std::size_t>(k)]
                                             .arrival_uncertainty
                                         - prev_arrivals[static_cast<std::size_t>(k)]));
      rec.uncertainty_residual = resid;
    }
    prev_arrivals.clear();
    for (int k = 0; k < K; ++k)
      prev_arrivals.push_back(rec.visits[static_cast<std::size_t>(k)].arrival_uncertainty);

    CycleGradient grad = cycle_gradient(sc, ang, sols, opts.include_uncertainty_coupling);
    rec.grad_phi = grad.d_phi;
    rec.grad_psi = grad.d_psi;
    rec.grad_norm = grad.norm_inf;
    out.history.push_back(rec);
    out.cycles = cycle;
    out.final_period = rec.period;
    out.final_solutions = sols;
    out.final_angles = ang;

    if (grad.norm_inf <= opts.tol_grad
        && rec.uncertainty_residual <= opts.tol_uncertainty) {
      out.converged = true;
      break;
    }
    ang = update_angles(ang, grad, opts.alpha0, opts.decay, cycle - 1);
  }
  out.final_state = state;
  return out;
}

struct MultistartRun {
  int run = 0;
  BoundaryAngles initial;
  bool converged = false;
  int cycles = 0;
  double period = 0.0;
  std::vector<double> period_series;  // one entry per executed cycle
};

struct MultistartResult {
  std::vector<MultistartRun> runs;
};

// Repeated bilevel runs from uniformly random boundary angles. Deterministic
// for a fixed seed: the 2K angles per run are drawn run by run from one
// 64-bit generator, independent of platform distribution quirks.
inline MultistartResult run_multistart(const Scenario& sc, int count, std::uint64_t seed,
                                       const BilevelOptions& base = {}) {
  const int K = static_cast<int>(sc.sequence.size());
  std::mt19937_64 rng(seed);
  auto draw = [&rng]() {
    return two_pi * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
  };
  MultistartResult out;
  for (int i = 0; i < count; ++i) {
    BoundaryAngles ang;
    ang.phi.resize(static_cast<std::size_t>(K));
    ang.psi.resize(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) ang.phi[static_cast<std::size_t>(k)] = draw();
    for (int k = 0; k < K; ++k) ang.psi[static_cast<std::size_t>(k)] = draw();

    BilevelOptions opts = base;
    opts.initial_angles = ang;
    opts.record_trajectory = false;
    BilevelResult res = run_bilevel(sc, opts);

    MultistartRun run;
    run.run = i + 1;
    run.initial = ang;
    run.converged = res.converged;
    run.cycles = res.cycles;
    run.period = res.final_period;
    for (const CycleRecord& c : res.history) run.period_series.push_back(c.period);
    out.runs.push_back(std::move(run));
  }
  return out;
}

}  // namespace permon
