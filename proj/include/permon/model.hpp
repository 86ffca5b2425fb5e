#pragma once

// Scenario description and per-target uncertainty model.
//
// Each static target i keeps an uncertainty level R_i >= 0 that grows at rate A_i
// while unobserved and is reduced at up to B_i - A_i while the agent senses it.
// Sensing quality decays quadratically with distance inside a disk of radius r_i
// and is zero outside.

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include "permon/vec.hpp"

namespace permon {

struct TargetSpec {
  int id = 0;
  Vec2 position{};
  double A = 1.0;   // uncertainty growth rate, A > 0
  double B = 2.0;   // peak sensing drain rate, B > A
  double r = 1.0;   // sensing disk radius
};

struct Scenario {
  std::vector<TargetSpec> targets;
  std::vector<int> sequence;                 // visiting order, entries are target ids
  std::vector<double> initial_uncertainty;   // one value per target, >= 0

  int index_of(int target_id) const {
    for (std::size_t i = 0; i < targets.size(); ++i)
      if (targets[i].id == target_id) return static_cast<int>(i);
    return -1;
  }
  const TargetSpec& target_by_id(int target_id) const {
    int i = index_of(target_id);
    if (i < 0) throw std::invalid_argument("unknown target id " + std::to_string(target_id));
    return targets[static_cast<std::size_t>(i)];
  }
};

// One structured finding from validate_scenario.
struct ValidationIssue {
  std::string code;
  std::string message;
};

// Sensing quality p_i(s) = max{0, 1 - |s - x_i|^2 / r_i^2}.
inline double sensing(const TargetSpec& tgt, Vec2 s) {
  double q = 1.0 - norm_sq(s - tgt.position) / (tgt.r * tgt.r);
  return q > 0.0 ? q : 0.0;
}

// Smooth (unclamped) uncertainty rate A - B*p(s); negative inside the inner disk.
inline double smooth_rate(const TargetSpec& tgt, Vec2 s) {
  return tgt.A - tgt.B * sensing(tgt, s);
}

// Hybrid uncertainty rate: the level is frozen at zero whenever it would go
// negative, otherwise it follows the smooth rate.
inline double uncertainty_rate(const TargetSpec& tgt, Vec2 s, double R) {
  if (R < 0.0) throw std::invalid_argument("uncertainty_rate: negative uncertainty level");
  double rate = smooth_rate(tgt, s);
  if (R == 0.0 && rate < 0.0) return 0.0;
  return rate;
}

// Radius delta < r at which the smooth rate crosses zero: the agent must be
// strictly inside this circle for the uncertainty to decrease.
inline double inner_radius(const TargetSpec& tgt) {
  return tgt.r * std::sqrt((tgt.B - tgt.A) / tgt.B);
}

// Arrival uncertainty above which the dive-to-center policy needs a dwell:
// the negative of the uncertainty accumulated over a radial dive from the rim
// to the center plus the radial climb from the center back out to delta.
inline double greedy_threshold(const TargetSpec& tgt) {
  double d = inner_radius(tgt);
  return -(tgt.A - 2.0 * tgt.B / 3.0) * tgt.r - d * (tgt.A - tgt.B)
         - tgt.B * d * d * d / (3.0 * tgt.r * tgt.r);
}

inline std::vector<ValidationIssue> validate_scenario(const Scenario& sc) {
  std::vector<ValidationIssue> issues;
  auto add = [&](const char* code, const std::string& msg) { issues.push_back({code, msg}); };

  if (sc.targets.empty()) add("targets.empty", "scenario has no targets");
  for (std::size_t i = 0; i < sc.targets.size(); ++i) {
    const TargetSpec& t = sc.targets[i];
    for (std::size_t j = i + 1; j < sc.targets.size(); ++j)
      if (sc.targets[j].id == t.id)
        add("target.duplicate-id", "duplicate target id " + std::to_string(t.id));
    if (!(t.r > 0.0))
      add("target.radius", "target " + std::to_string(t.id) + ": radius must be positive");
    if (!(t.A > 0.0) || !(t.B > t.A))
      add("target.rates", "target " + std::to_string(t.id) + ": rates must satisfy B > A > 0");
  }
  // Sensing disks must be strictly disjoint (no tolerance).
  for (std::size_t i = 0; i < sc.targets.size(); ++i)
    for (std::size_t j = i + 1; j < sc.targets.size(); ++j) {
      const TargetSpec& a = sc.targets[i];
      const TargetSpec& b = sc.targets[j];
      if (!(distance(a.position, b.position) > a.r + b.r))
        add("targets.overlap", "targets " + std::to_string(a.id) + " and " + std::to_string(b.id)
                                   + " have overlapping sensing disks");
    }

  if (sc.sequence.empty()) add("sequence.empty", "visiting sequence is empty");
  for (int id : sc.sequence)
    if (sc.index_of(id) < 0)
      add("sequence.unknown-target", "sequence references missing target id " + std::to_string(id));
  for (const TargetSpec& t : sc.targets) {
    bool seen = false;
    for (int id : sc.sequence) seen = seen || (id == t.id);
    if (!seen)
      add("sequence.missing-target",
          "target " + std::to_string(t.id) + " never appears in the visiting sequence");
  }

  if (sc.initial_uncertainty.size() != sc.targets.size())
    add("uncertainty.size", "initial_uncertainty must list exactly one value per target");
  for (std::size_t i = 0; i < sc.initial_uncertainty.size(); ++i)
    if (!(sc.initial_uncertainty[i] >= 0.0))
      add("uncertainty.negative", "initial_uncertainty[" + std::to_string(i) + "] must be >= 0");

  return issues;
}

}  // namespace permon
