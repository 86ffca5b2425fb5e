#pragma once

// Scenario files (JSON), solution/report JSON, and plot-ready CSV emitters.
// All numeric output is printed with 9 significant digits so repeated runs
// with the same configuration produce byte-identical files.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "permon/coordinator.hpp"
#include "permon/draining.hpp"
#include "permon/model.hpp"
#include "permon/sim.hpp"
#include "permon/vec.hpp"

namespace permon {

struct ScenarioFormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline const nlohmann::json& require_field(const nlohmann::json& j, const std::string& key,
                                           const std::string& where) {
  auto it = j.find(key);
  if (it == j.end())
    throw ScenarioFormatError(where + ": missing field '" + key + "'");
  return *it;
}

inline double number_field(const nlohmann::json& j, const std::string& key,
                           const std::string& where) {
  const nlohmann::json& v = require_field(j, key, where);
  if (!v.is_number())
    throw ScenarioFormatError(where + ": field '" + key + "' must be a number");
  return v.get<double>();
}

inline std::string fmt9(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

inline std::string fmt_residual(double v) {
  return std::isfinite(v) ? fmt9(v) : "nan";
}

}  // namespace detail

inline nlohmann::json scenario_to_json(const Scenario& sc) {
  nlohmann::json j;
  j["targets"] = nlohmann::json::array();
  for (const TargetSpec& t : sc.targets) {
    j["targets"].push_back({{"id", t.id},
                            {"x", t.position.x},
                            {"y", t.position.y},
                            {"A", t.A},
                            {"B", t.B},
                            {"r", t.r}});
  }
  j["sequence"] = sc.sequence;
  j["initial_uncertainty"] = sc.initial_uncertainty;
  return j;
}

inline Scenario scenario_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ScenarioFormatError("scenario: top level must be an object");
  Scenario sc;
  const nlohmann::json& targets = detail::require_field(j, "targets", "scenario");
  if (!targets.is_array()) throw ScenarioFormatError("scenario: 'targets' must be an array");
  int index = 0;
  for (const nlohmann::json& tj : targets) {
    std::string where = "targets[" + std::to_string(index) + "]";
    if (!tj.is_object()) throw ScenarioFormatError(where + ": must be an object");
    TargetSpec t;
    const nlohmann::json& id = detail::require_field(tj, "id", where);
    if (!id.is_number_integer())
      throw ScenarioFormatError(where + ": field 'id' must be an integer");
    t.id = id.get<int>();
    t.position.x = detail::number_field(tj, "x", where);
    t.position.y = detail::number_field(tj, "y", where);
    t.A = detail::number_field(tj, "A", where);
    t.B = detail::number_field(tj, "B", where);
    t.r = detail::number_field(tj, "r", where);
    sc.targets.push_back(t);
    ++index;
  }
  const nlohmann::json& seq = detail::require_field(j, "sequence", "scenario");
  if (!seq.is_array()) throw ScenarioFormatError("scenario: 'sequence' must be an array");
  for (const nlohmann::json& v : seq) {
    if (!v.is_number_integer())
      throw ScenarioFormatError("scenario: 'sequence' entries must be integers");
    sc.sequence.push_back(v.get<int>());
  }
  if (j.contains("initial_uncertainty")) {
    const nlohmann::json& r0 = j["initial_uncertainty"];
    if (!r0.is_array())
      throw ScenarioFormatError("scenario: 'initial_uncertainty' must be an array");
    for (const nlohmann::json& v : r0) {
      if (!v.is_number())
        throw ScenarioFormatError("scenario: 'initial_uncertainty' entries must be numbers");
      sc.initial_uncertainty.push_back(v.get<double>());
    }
  } else {
    sc.initial_uncertainty.assign(sc.targets.size(), 0.0);
  }
  return sc;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioFormatError("cannot open scenario file: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ScenarioFormatError(path + ": " + e.what());
  }
  return scenario_from_json(j);
}

inline void save_scenario(const Scenario& sc, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ScenarioFormatError("cannot write scenario file: " + path);
  out << scenario_to_json(sc).dump(2) << "\n";
}

inline nlohmann::json solution_to_json(const DrainingSolution& sol) {
  nlohmann::json j;
  j["converged"] = sol.converged();
  j["total_time"] = sol.total_time;
  j["inner_exit_time"] = sol.inner_exit_time;
  j["inner_exit"] = {sol.inner_exit.x, sol.inner_exit.y};
  j["lambda_entrance"] = {sol.lambda_entrance.x, sol.lambda_entrance.y};
  j["lambda_departure"] = {sol.lambda_departure.x, sol.lambda_departure.y};
  j["lambda_drain"] = sol.lambda_drain;
  j["departure_coincident"] = sol.departure_coincident;
  j["stationarity"] = sol.report.stationarity;
  j["feasibility"] = sol.report.feasibility;
  j["outer_iterations"] = sol.report.outer_iterations;
  j["inner_iterations"] = sol.report.inner_iterations;
  nlohmann::json nodes = nlohmann::json::array();
  for (std::size_t i = 0; i < sol.node_positions.size(); ++i) {
    nlohmann::json n;
    n["s"] = {sol.node_positions[i].x, sol.node_positions[i].y};
    n["R"] = sol.node_uncertainty[i];
    if (i < sol.node_controls.size())
      n["u"] = {sol.node_controls[i].x, sol.node_controls[i].y};
    nodes.push_back(n);
  }
  j["nodes"] = nodes;
  return j;
}

inline std::string phase_label(const PhaseTag& tag) {
  return (tag.kind == PhaseKind::switching ? "switching_" : "draining_")
         + std::to_string(tag.visit);
}

inline void write_trajectory_csv(std::ostream& out,
                                 const std::vector<TrajectorySample>& samples,
                                 std::size_t num_targets) {
  out << "t,s_x,s_y,u_x,u_y,phase";
  for (std::size_t i = 1; i <= num_targets; ++i) out << ",R_" << i;
  out << "\n";
  for (const TrajectorySample& s : samples) {
    out << detail::fmt9(s.t) << ',' << detail::fmt9(s.s.x) << ',' << detail::fmt9(s.s.y) << ','
        << detail::fmt9(s.u.x) << ',' << detail::fmt9(s.u.y) << ',' << phase_label(s.phase);
    for (std::size_t i = 0; i < num_targets; ++i)
      out << ',' << detail::fmt9(i < s.R.size() ? s.R[i] : 0.0);
    out << "\n";
  }
}

inline void write_trajectory_csv(const std::string& path,
                                 const std::vector<TrajectorySample>& samples,
                                 std::size_t num_targets) {
  std::ofstream out(path);
  if (!out) throw ScenarioFormatError("cannot write trajectory file: " + path);
  write_trajectory_csv(out, samples, num_targets);
}

// Coordinator per-cycle history. The first cycle has no predecessor, so its
// residual column prints nan.
inline void write_cycles_csv(std::ostream& out, const std::vector<CycleRecord>& history) {
  std::size_t K = history.empty() ? 0 : history.front().angles.phi.size();
  out << "cycle,T,grad_norm";
  for (std::size_t k = 1; k <= K; ++k) out << ",phi_" << k;
  for (std::size_t k = 1; k <= K; ++k) out << ",psi_" << k;
  out << ",R_resid\n";
  for (const CycleRecord& c : history) {
    out << c.index << ',' << detail::fmt9(c.period) << ',' << detail::fmt9(c.grad_norm);
    for (std::size_t k = 0; k < K; ++k) out << ',' << detail::fmt9(c.angles.phi[k]);
    for (std::size_t k = 0; k < K; ++k) out << ',' << detail::fmt9(c.angles.psi[k]);
    out << ',' << detail::fmt_residual(c.uncertainty_residual) << "\n";
  }
}

inline void write_cycles_csv(const std::string& path, const std::vector<CycleRecord>& history) {
  std::ofstream out(path);
  if (!out) throw ScenarioFormatError("cannot write cycle history file: " + path);
  write_cycles_csv(out, history);
}

// Baseline history has no angles or gradients; keep the schema minimal.
inline void write_baseline_cycles_csv(std::ostream& out,
                                      const std::vector<CycleRecord>& history) {
  out << "cycle,T,R_resid\n";
  for (const CycleRecord& c : history)
    out << c.index << ',' << detail::fmt9(c.period) << ','
        << detail::fmt_residual(c.uncertainty_residual) << "\n";
}

inline void write_baseline_cycles_csv(const std::string& path,
                                      const std::vector<CycleRecord>& history) {
  std::ofstream out(path);
  if (!out) throw ScenarioFormatError("cannot write cycle history file: " + path);
  write_baseline_cycles_csv(out, history);
}

}  // namespace permon
