#pragma once

// Forward simulation of the hybrid uncertainty dynamics under piecewise-constant
// control schedules, plus the projection that recovers the true (clamped)
// uncertainty trace from a relaxed one.

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "permon/model.hpp"
#include "permon/vec.hpp"

namespace permon {

struct ControlPiece {
  double duration = 0.0;
  Vec2 u{};
};

struct ControlSchedule {
  std::vector<ControlPiece> pieces;

  double duration() const {
    double T = 0.0;
    for (const ControlPiece& p : pieces) T += p.duration;
    return T;
  }
  // Control in effect at time t (right-continuous; clamps to the last piece).
  Vec2 at(double t) const {
    double acc = 0.0;
    for (const ControlPiece& p : pieces) {
      acc += p.duration;
      if (t < acc) return p.u;
    }
    return pieces.empty() ? Vec2{} : pieces.back().u;
  }
  Vec2 displacement() const {
    Vec2 d{};
    for (const ControlPiece& p : pieces) d += p.duration * p.u;
    return d;
  }
  void append(double duration, Vec2 u) {
    if (duration > 0.0) pieces.push_back({duration, u});
  }
};

// Blend of two feasible schedules joining the same endpoints: the control of the
// trajectory-space interpolation with total time T_sigma = (1-sigma)T1 + sigma*T2.
// Speeds rescale with the time warp, so the unit bound is preserved and both
// endpoints are reproduced exactly.
inline ControlSchedule blend_schedules(const ControlSchedule& u1, const ControlSchedule& u2,
                                       double sigma) {
  double T1 = u1.duration();
  double T2 = u2.duration();
  if (!(T1 > 0.0) || !(T2 > 0.0))
    throw std::invalid_argument("blend_schedules: schedules must have positive duration");
  double Ts = (1.0 - sigma) * T1 + sigma * T2;

  // Breakpoints of each schedule mapped into blended time.
  std::vector<double> cuts{0.0, Ts};
  double acc = 0.0;
  for (const ControlPiece& p : u1.pieces) {
    acc += p.duration;
    cuts.push_back(acc * Ts / T1);
  }
  acc = 0.0;
  for (const ControlPiece& p : u2.pieces) {
    acc += p.duration;
    cuts.push_back(acc * Ts / T2);
  }
  std::sort(cuts.begin(), cuts.end());

  ControlSchedule out;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    double a = cuts[i], b = std::min(cuts[i + 1], Ts);
    if (b - a < 1e-15) continue;
    double mid = 0.5 * (a + b);
    Vec2 u = (1.0 - sigma) * (T1 / Ts) * u1.at(mid * T1 / Ts)
             + sigma * (T2 / Ts) * u2.at(mid * T2 / Ts);
    out.append(b - a, u);
  }
  return out;
}

enum class PhaseKind { switching, draining };

struct PhaseTag {
  PhaseKind kind = PhaseKind::switching;
  int visit = 0;  // 1-based visit index within the cycle
};

struct Phase {
  PhaseTag tag{};
  int target_id = 0;  // target being approached / drained
  ControlSchedule schedule;
};

struct CyclePlan {
  std::vector<Phase> phases;
};

struct TrajectorySample {
  double t = 0.0;
  Vec2 s{};
  Vec2 u{};
  PhaseTag phase{};
  std::vector<double> R;  // one level per target, scenario order
};

struct HybridState {
  double t = 0.0;
  Vec2 s{};
  std::vector<double> R;
};

// Explicit Euler with clamp-after-step, stepping exactly onto control-piece
// boundaries so the position integral of a piecewise-constant control is exact.
inline void integrate_hybrid(const Scenario& sc, HybridState& st, const ControlSchedule& schedule,
                             double dt, PhaseTag tag = {},
                             std::vector<TrajectorySample>* record = nullptr) {
  if (!(dt > 0.0)) throw std::invalid_argument("integrate_hybrid: dt must be positive");
  if (st.R.size() != sc.targets.size())
    throw std::invalid_argument("integrate_hybrid: state size does not match scenario");
  for (double R : st.R)
    if (R < 0.0) throw std::invalid_argument("integrate_hybrid: negative uncertainty level");

  for (const ControlPiece& piece : schedule.pieces) {
    double remaining = piece.duration;
    while (remaining > 1e-15) {
      if (record) record->push_back({st.t, st.s, piece.u, tag, st.R});
      double h = std::min(dt, remaining);
      for (std::size_t i = 0; i < sc.targets.size(); ++i) {
        double next = st.R[i] + h * smooth_rate(sc.targets[i], st.s);
        st.R[i] = next > 0.0 ? next : 0.0;
      }
      st.s += h * piece.u;
      st.t += h;
      remaining -= h;
    }
  }
  if (record && !schedule.pieces.empty())
    record->push_back({st.t, st.s, schedule.pieces.back().u, tag, st.R});
}

struct SimResult {
  HybridState final_state;
  std::vector<double> arrival_uncertainty;  // R of the visited target at each draining-phase start
  std::vector<double> phase_start_times;
  std::vector<TrajectorySample> samples;    // filled only when record = true
};

// Executes a full cycle plan phase by phase.
inline SimResult simulate_cycle(const Scenario& sc, const CyclePlan& plan, HybridState state,
                                double dt, bool record = false) {
  SimResult out;
  for (const Phase& phase : plan.phases) {
    out.phase_start_times.push_back(state.t);
    if (phase.tag.kind == PhaseKind::draining) {
      int idx = sc.index_of(phase.target_id);
      if (idx < 0) throw std::invalid_argument("simulate_cycle: unknown target in plan");
      out.arrival_uncertainty.push_back(state.R[static_cast<std::size_t>(idx)]);
    }
    integrate_hybrid(sc, state, phase.schedule, dt, phase.tag,
                     record ? &out.samples : nullptr);
  }
  out.final_state = std::move(state);
  return out;
}

struct UncertaintyTrace {
  std::vector<double> t;
  std::vector<double> R;
};

// Single-target unclamped (relaxed) uncertainty integral along a controlled path.
inline UncertaintyTrace relaxed_trace(const TargetSpec& tgt, Vec2 start, double R0,
                                      const ControlSchedule& schedule, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("relaxed_trace: dt must be positive");
  UncertaintyTrace tr;
  double t = 0.0, R = R0;
  Vec2 s = start;
  tr.t.push_back(t);
  tr.R.push_back(R);
  for (const ControlPiece& piece : schedule.pieces) {
    double remaining = piece.duration;
    while (remaining > 1e-15) {
      double h = std::min(dt, remaining);
      R += h * smooth_rate(tgt, s);
      s += h * piece.u;
      t += h;
      remaining -= h;
      tr.t.push_back(t);
      tr.R.push_back(R);
    }
  }
  return tr;
}

struct RecoveredTrace {
  UncertaintyTrace trace;
  bool reentry = false;  // tail dips below zero: path re-entered the inner disk after t0
};

// Projects a relaxed uncertainty trace back onto the hybrid dynamics: the
// negative dip is flattened to zero until the trace's slope turns nonnegative,
// and everything after the inner-exit time t0 is shifted up by -R(t0).
inline RecoveredTrace recover_true_uncertainty(const UncertaintyTrace& relaxed, double t0) {
  const std::size_t n = relaxed.t.size();
  if (n == 0 || relaxed.R.size() != n)
    throw std::invalid_argument("recover_true_uncertainty: malformed trace");
  if (t0 < relaxed.t.front() - 1e-12 || t0 > relaxed.t.back() + 1e-12)
    throw std::out_of_range("recover_true_uncertainty: t0 outside the trace domain");

  // Relaxed value at t0 (linear interpolation between grid points).
  double R_t0 = relaxed.R.back();
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (t0 <= relaxed.t[i + 1] + 1e-12) {
      double span = relaxed.t[i + 1] - relaxed.t[i];
      double w = span > 0.0 ? (t0 - relaxed.t[i]) / span : 0.0;
      w = std::clamp(w, 0.0, 1.0);
      R_t0 = (1.0 - w) * relaxed.R[i] + w * relaxed.R[i + 1];
      break;
    }
  }

  std::size_t i_neg = n;
  for (std::size_t i = 0; i < n; ++i)
    if (relaxed.R[i] < 0.0) { i_neg = i; break; }

  RecoveredTrace out;
  out.trace.t = relaxed.t;
  out.trace.R = relaxed.R;
  if (i_neg == n) return out;  // never went negative: already the true trace

  // End of the projected segment: slope turns nonnegative (at the latest at t0).
  std::size_t i_rise = i_neg;
  while (i_rise + 1 < n && relaxed.t[i_rise] < t0 - 1e-12
         && relaxed.R[i_rise + 1] < relaxed.R[i_rise])
    ++i_rise;

  for (std::size_t i = i_neg; i <= i_rise; ++i) out.trace.R[i] = 0.0;
  for (std::size_t i = i_rise + 1; i < n; ++i) {
    out.trace.R[i] = relaxed.R[i] - R_t0;
    if (out.trace.R[i] < -1e-9) out.reentry = true;
  }
  return out;
}

}  // namespace permon
