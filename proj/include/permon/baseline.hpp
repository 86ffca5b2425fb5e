#pragma once

// Greedy comparison policy: head straight for the current target's center,
// dwell there if its uncertainty is still positive, and turn towards the next
// target the instant the uncertainty reaches zero.

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "permon/coordinator.hpp"
#include "permon/model.hpp"
#include "permon/sim.hpp"
#include "permon/vec.hpp"

namespace permon {

struct BaselineOptions {
  double dt = 1e-3;
  int max_cycles = 500;
  double tol_uncertainty = 1e-4;  // arrival-level stabilization residual
  bool record_trajectory = true;  // keep samples of the last executed cycle
};

struct BaselineResult {
  bool stabilized = false;
  int cycles = 0;
  double period = 0.0;  // last executed cycle
  std::vector<CycleRecord> history;
  std::vector<TrajectorySample> trajectory;  // last executed cycle
  HybridState final_state;
};

inline BaselineResult run_greedy_baseline(const Scenario& sc, const BaselineOptions& opts = {}) {
  {
    auto issues = validate_scenario(sc);
    if (!issues.empty())
      throw std::invalid_argument("run_greedy_baseline: invalid scenario: "
                                  + issues.front().message);
  }
  const int K = static_cast<int>(sc.sequence.size());
  BaselineResult out;
  HybridState state{0.0, sc.target_by_id(sc.sequence[static_cast<std::size_t>(K - 1)]).position,
                    sc.initial_uncertainty};
  std::vector<double> prev_arrivals;

  // One Euler step shared with the cycle simulator: position advances with the
  // step-start control, every uncertainty by its step-start smooth rate,
  // clamped at zero afterwards.
  auto step = [&sc, &state, &out, &opts](double h, Vec2 u, PhaseTag tag) {
    if (opts.record_trajectory)
      out.trajectory.push_back({state.t, state.s, u, tag, state.R});
    std::vector<double> rates(sc.targets.size());
    for (std::size_t i = 0; i < sc.targets.size(); ++i)
      rates[i] = smooth_rate(sc.targets[i], state.s);
    state.s += h * u;
    for (std::size_t i = 0; i < sc.targets.size(); ++i)
      state.R[i] = std::max(0.0, state.R[i] + h * rates[i]);
    state.t += h;
  };

  for (int cycle = 1; cycle <= opts.max_cycles; ++cycle) {
    CycleRecord rec;
    rec.index = cycle;
    rec.visits.resize(static_cast<std::size_t>(K));
    double cycle_start = state.t;
    if (opts.record_trajectory) out.trajectory.clear();

    for (int k = 0; k < K; ++k) {
      VisitRecord& vr = rec.visits[static_cast<std::size_t>(k)];
      const TargetSpec& tgt = sc.target_by_id(sc.sequence[static_cast<std::size_t>(k)]);
      const std::size_t idx = static_cast<std::size_t>(sc.index_of(tgt.id));
      vr.target_id = tgt.id;
      const Vec2 center = tgt.position;
      double leg_start = state.t;
      double enter_t = leg_start;
      bool entered = false;

      while (true) {
        double d_rem = distance(state.s, center);
        if (!entered && d_rem <= tgt.r + 1e-12) {
          entered = true;
          enter_t = state.t;
          vr.leg_in_time = state.t - leg_start;
          vr.arrival_uncertainty = state.R[idx];
        }
        double rate = smooth_rate(tgt, state.s);
        if (entered && state.R[idx] <= 1e-12 && rate < 0.0) break;  // drained: turn now
        PhaseTag tag{entered ? PhaseKind::draining : PhaseKind::switching, k + 1};
        if (d_rem <= 1e-12) {
          // Dwell at the center; the drain rate A - B there is exact, so the
          // terminal partial step lands on zero.
          double h = std::min(opts.dt, state.R[idx] / (tgt.B - tgt.A));
          step(h, Vec2{0.0, 0.0}, tag);
          continue;
        }
        double h = std::min(opts.dt, d_rem);
        if (!entered && d_rem - tgt.r < h) h = d_rem - tgt.r;
        if (entered && state.R[idx] > 0.0 && rate < 0.0)
          h = std::min(h, state.R[idx] / -rate);
        step(h, (center - state.s) / d_rem, tag);
      }
      vr.drain_time = state.t - enter_t;
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

    out.history.push_back(rec);
    out.cycles = cycle;
    out.period = rec.period;
    if (rec.uncertainty_residual <= opts.tol_uncertainty) {
      out.stabilized = true;
      break;
    }
  }
  if (opts.record_trajectory)
    out.trajectory.push_back({state.t, state.s, Vec2{0.0, 0.0},
                              PhaseTag{PhaseKind::switching, 1}, state.R});
  out.final_state = state;
  return out;
}

}  // namespace permon
