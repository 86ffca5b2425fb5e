// Command-line front end: scenario validation, single draining solves, the
// bilevel optimizer, the greedy comparison, and multistart studies.
//
// Exit codes: 0 success, 2 input/validation error, 3 solver failure,
// 4 non-convergence within the cycle budget.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "permon/permon.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_input = 2;
constexpr int exit_solver = 3;
constexpr int exit_no_convergence = 4;

std::string f9(double v) { return permon::detail::fmt9(v); }

permon::Scenario load_and_validate(const std::string& path) {
  permon::Scenario sc = permon::load_scenario(path);
  auto issues = permon::validate_scenario(sc);
  if (!issues.empty()) {
    for (const auto& issue : issues)
      std::cerr << "invalid scenario [" << issue.code << "]: " << issue.message << "\n";
    throw permon::ScenarioFormatError("scenario failed validation");
  }
  return sc;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw permon::ScenarioFormatError("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

json angles_to_json(const permon::BoundaryAngles& ang) {
  return json{{"phi", ang.phi}, {"psi", ang.psi}};
}

int cmd_validate(const std::string& path) {
  permon::Scenario sc = permon::load_scenario(path);
  auto issues = permon::validate_scenario(sc);
  if (!issues.empty()) {
    for (const auto& issue : issues)
      std::cerr << "invalid scenario [" << issue.code << "]: " << issue.message << "\n";
    return exit_input;
  }
  std::cout << "scenario OK: " << sc.targets.size() << " target(s), "
            << sc.sequence.size() << " visit(s) per cycle\n";
  return exit_ok;
}

int cmd_solve_local(const std::string& path, const fs::path& out_dir, int target_id,
                    double phi, double psi, double rhat, const std::string& dep_radius,
                    int nodes, double dt) {
  permon::Scenario sc = load_and_validate(path);
  const permon::TargetSpec* tgt = nullptr;
  for (const auto& t : sc.targets)
    if (t.id == target_id) tgt = &t;
  if (!tgt) {
    std::cerr << "unknown target id " << target_id << "\n";
    return exit_input;
  }

  permon::DrainingProblem problem;
  problem.target = *tgt;
  problem.entrance = tgt->position + tgt->r * permon::from_angle(phi);
  double rho = dep_radius == "r" ? tgt->r : permon::inner_radius(*tgt);
  problem.departure = tgt->position + rho * permon::from_angle(psi);
  problem.arrival_uncertainty = rhat;
  problem.nodes = nodes;

  permon::DrainingSolution sol = permon::solve_draining(problem);
  fs::create_directories(out_dir);
  write_json(out_dir / "solution.json", permon::solution_to_json(sol));
  if (!sol.converged()) {
    std::cerr << "draining solve failed: stationarity " << f9(sol.report.stationarity)
              << ", feasibility " << f9(sol.report.feasibility) << "\n";
    return exit_solver;
  }

  permon::VerifyReport verify = permon::verify_solution(sol, dt);
  permon::Scenario mini;
  mini.targets = {*tgt};
  mini.sequence = {tgt->id};
  mini.initial_uncertainty = {rhat};
  permon::HybridState state{0.0, problem.entrance, {rhat}};
  std::vector<permon::TrajectorySample> samples;
  permon::integrate_hybrid(mini, state, permon::control_schedule(sol), dt,
                           {permon::PhaseKind::draining, 1}, &samples);
  permon::write_trajectory_csv((out_dir / "local_trajectory.csv").string(), samples, 1);

  std::cout << "T* = " << f9(sol.total_time) << "\n"
            << "inner exit time t0 = " << f9(sol.inner_exit_time) << "\n"
            << "lambda_entrance = (" << f9(sol.lambda_entrance.x) << ", "
            << f9(sol.lambda_entrance.y) << ")\n"
            << "lambda_departure = (" << f9(sol.lambda_departure.x) << ", "
            << f9(sol.lambda_departure.y) << ")\n"
            << "lambda_drain = " << f9(sol.lambda_drain) << "\n"
            << "verification: unique_crossing=" << verify.unique_crossing
            << " terminal_clear=" << verify.terminal_clear
            << " straight_when_drained=" << verify.straight_when_drained
            << " replay_drains=" << verify.replay_drains
            << " replay_reaches=" << verify.replay_reaches << "\n";
  return exit_ok;
}

permon::BilevelOptions bilevel_options(int nodes, double dt, double alpha0, double decay,
                                       double tol_grad, double tol_R, int max_cycles,
                                       bool coupling) {
  permon::BilevelOptions opts;
  opts.nodes = nodes;
  opts.dt = dt;
  opts.alpha0 = alpha0;
  opts.decay = decay;
  opts.tol_grad = tol_grad;
  opts.tol_uncertainty = tol_R;
  opts.max_cycles = max_cycles;
  opts.include_uncertainty_coupling = coupling;
  return opts;
}

int cmd_run(const std::string& path, const fs::path& out_dir,
            const permon::BilevelOptions& opts) {
  permon::Scenario sc = load_and_validate(path);
  permon::BilevelResult res = permon::run_bilevel(sc, opts);
  fs::create_directories(out_dir);
  permon::write_trajectory_csv((out_dir / "trajectory.csv").string(), res.trajectory,
                               sc.targets.size());
  permon::write_cycles_csv((out_dir / "cycles.csv").string(), res.history);

  json summary;
  summary["converged"] = res.converged;
  summary["solver_failure"] = res.solver_failure;
  summary["cycles"] = res.cycles;
  summary["final_period"] = res.final_period;
  summary["final_angles"] = angles_to_json(res.final_angles);
  if (!res.history.empty()) summary["final_grad_norm"] = res.history.back().grad_norm;
  write_json(out_dir / "summary.json", summary);

  if (res.solver_failure) {
    std::cerr << "inner draining solve failed during cycle " << res.cycles << "\n";
    return exit_solver;
  }
  std::cout << "cycles = " << res.cycles << "\n"
            << "period = " << f9(res.final_period) << "\n"
            << "grad_norm = " << f9(res.history.empty() ? 0.0 : res.history.back().grad_norm)
            << "\n"
            << (res.converged ? "converged" : "not converged within cycle budget") << "\n";
  return res.converged ? exit_ok : exit_no_convergence;
}

int cmd_compare(const std::string& path, const fs::path& out_dir,
                const permon::BilevelOptions& opts, double dt, int max_cycles) {
  permon::Scenario sc = load_and_validate(path);

  permon::BaselineOptions bopts;
  bopts.dt = dt;
  bopts.max_cycles = std::max(max_cycles, 500);
  permon::BaselineResult greedy = permon::run_greedy_baseline(sc, bopts);

  permon::BilevelResult optimized = permon::run_bilevel(sc, opts);

  fs::create_directories(out_dir);
  permon::write_trajectory_csv((out_dir / "greedy_trajectory.csv").string(),
                               greedy.trajectory, sc.targets.size());
  permon::write_baseline_cycles_csv((out_dir / "greedy_cycles.csv").string(), greedy.history);
  permon::write_trajectory_csv((out_dir / "optimized_trajectory.csv").string(),
                               optimized.trajectory, sc.targets.size());
  permon::write_cycles_csv((out_dir / "optimized_cycles.csv").string(), optimized.history);

  double improvement =
      greedy.period > 0.0 ? 100.0 * (greedy.period - optimized.final_period) / greedy.period
                          : 0.0;
  json summary;
  summary["greedy"] = {{"stabilized", greedy.stabilized},
                       {"cycles", greedy.cycles},
                       {"period", greedy.period}};
  summary["optimized"] = {{"converged", optimized.converged},
                          {"solver_failure", optimized.solver_failure},
                          {"cycles", optimized.cycles},
                          {"period", optimized.final_period},
                          {"final_angles", angles_to_json(optimized.final_angles)}};
  summary["improvement_percent"] = improvement;
  write_json(out_dir / "comparison.json", summary);

  std::cout << "greedy period = " << f9(greedy.period) << " (" << greedy.cycles
            << " cycles, " << (greedy.stabilized ? "stabilized" : "not stabilized") << ")\n"
            << "optimized period = " << f9(optimized.final_period) << " ("
            << optimized.cycles << " cycles, "
            << (optimized.converged ? "converged" : "not converged") << ")\n"
            << "improvement = " << f9(improvement) << "%\n";
  if (!optimized.history.empty()) {
    std::cout << "per-visit solve seconds (last cycle):";
    for (const auto& v : optimized.history.back().visits)
      std::cout << ' ' << f9(v.solve_seconds);
    std::cout << "\n";
  }

  if (optimized.solver_failure) return exit_solver;
  if (!optimized.converged || !greedy.stabilized) return exit_no_convergence;
  return exit_ok;
}

int cmd_multistart(const std::string& path, const fs::path& out_dir, int count,
                   std::uint64_t seed, const permon::BilevelOptions& opts) {
  permon::Scenario sc = load_and_validate(path);
  permon::MultistartResult res = permon::run_multistart(sc, count, seed, opts);
  fs::create_directories(out_dir);

  const std::size_t K = sc.sequence.size();
  {
    std::ofstream out(out_dir / "multistart_runs.csv");
    out << "run,converged,cycles,period";
    for (std::size_t k = 1; k <= K; ++k) out << ",phi0_" << k;
    for (std::size_t k = 1; k <= K; ++k) out << ",psi0_" << k;
    out << "\n";
    for (const auto& run : res.runs) {
      out << run.run << ',' << (run.converged ? 1 : 0) << ',' << run.cycles << ','
          << f9(run.period);
      for (std::size_t k = 0; k < K; ++k) out << ',' << f9(run.initial.phi[k]);
      for (std::size_t k = 0; k < K; ++k) out << ',' << f9(run.initial.psi[k]);
      out << "\n";
    }
  }
  {
    std::ofstream out(out_dir / "multistart_series.csv");
    out << "run,cycle,T\n";
    for (const auto& run : res.runs)
      for (std::size_t c = 0; c < run.period_series.size(); ++c)
        out << run.run << ',' << c + 1 << ',' << f9(run.period_series[c]) << "\n";
  }

  std::vector<double> periods;
  int failures = 0;
  for (const auto& run : res.runs) {
    if (run.converged)
      periods.push_back(run.period);
    else
      ++failures;
  }
  json summary;
  summary["count"] = count;
  summary["seed"] = seed;
  summary["failures"] = failures;
  if (!periods.empty()) {
    std::sort(periods.begin(), periods.end());
    double median = periods[periods.size() / 2];
    double spread = median > 0.0 ? 100.0 * (periods.back() - periods.front()) / median : 0.0;
    summary["min_period"] = periods.front();
    summary["median_period"] = median;
    summary["max_period"] = periods.back();
    summary["spread_percent"] = spread;
    std::cout << "runs = " << count << ", failures = " << failures << "\n"
              << "final period min/median/max = " << f9(periods.front()) << " / "
              << f9(median) << " / " << f9(periods.back()) << "\n"
              << "spread = " << f9(spread) << "% of median\n";
  } else {
    std::cout << "runs = " << count << ", all failed to converge\n";
  }
  write_json(out_dir / "multistart_summary.json", summary);
  return failures == 0 ? exit_ok : exit_no_convergence;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Persistent-monitoring trajectory optimizer"};
  app.require_subcommand(1);

  std::string scenario_path;
  std::string out_dir = "out";
  int nodes = 20, max_cycles = 200, count = 100;
  double dt = 1e-3, alpha0 = 0.1, decay = 0.1, tol_grad = 1e-3, tol_R = 1e-4;
  std::uint64_t seed = 1;
  bool coupling = false;
  int target_id = 0;
  double phi = 0.0, psi = 0.0, rhat = 0.0;
  std::string dep_radius = "delta";

  auto add_scenario = [&](CLI::App* cmd) {
    cmd->add_option("scenario", scenario_path, "scenario JSON file")->required();
  };
  auto add_shared = [&](CLI::App* cmd) {
    cmd->add_option("--out", out_dir, "output directory (default: out)");
    cmd->add_option("--nodes", nodes, "transcription nodes per drain (default: 20)");
    cmd->add_option("--dt", dt, "simulation step (default: 1e-3)");
  };
  auto add_bilevel = [&](CLI::App* cmd) {
    cmd->add_option("--alpha0", alpha0, "initial step size (default: 0.1)");
    cmd->add_option("--decay", decay, "step decay rate (default: 0.1)");
    cmd->add_option("--tol-grad", tol_grad, "gradient norm tolerance (default: 1e-3)");
    cmd->add_option("--tol-R", tol_R, "arrival-level residual tolerance (default: 1e-4)");
    cmd->add_option("--max-cycles", max_cycles, "cycle budget (default: 200)");
    cmd->add_option("--seed", seed, "random seed (default: 1)");
    cmd->add_flag("--coupling", coupling, "couple arrival levels into the gradient");
  };

  CLI::App* validate = app.add_subcommand("validate", "check a scenario file");
  add_scenario(validate);

  CLI::App* solve_local = app.add_subcommand("solve-local", "solve one draining problem");
  add_scenario(solve_local);
  add_shared(solve_local);
  solve_local->add_option("--target", target_id, "target id")->required();
  solve_local->add_option("--phi", phi, "entrance angle (radians)")->required();
  solve_local->add_option("--psi", psi, "departure angle (radians)")->required();
  solve_local->add_option("--Rhat", rhat, "arrival uncertainty")->required();
  solve_local->add_option("--departure-radius", dep_radius,
                          "departure circle: delta (inner) or r (rim)")
      ->check(CLI::IsMember({"delta", "r"}));

  CLI::App* run = app.add_subcommand("run", "run the bilevel optimizer");
  add_scenario(run);
  add_shared(run);
  add_bilevel(run);

  CLI::App* compare = app.add_subcommand("compare", "greedy baseline vs bilevel optimizer");
  add_scenario(compare);
  add_shared(compare);
  add_bilevel(compare);

  CLI::App* multistart = app.add_subcommand("multistart", "repeated runs from random angles");
  add_scenario(multistart);
  add_shared(multistart);
  add_bilevel(multistart);
  multistart->add_option("--count", count, "number of runs (default: 100)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(validate)) return cmd_validate(scenario_path);
    permon::BilevelOptions opts =
        bilevel_options(nodes, dt, alpha0, decay, tol_grad, tol_R, max_cycles, coupling);
    if (app.got_subcommand(solve_local))
      return cmd_solve_local(scenario_path, out_dir, target_id, phi, psi, rhat, dep_radius,
                             nodes, dt);
    if (app.got_subcommand(run)) return cmd_run(scenario_path, out_dir, opts);
    if (app.got_subcommand(compare))
      return cmd_compare(scenario_path, out_dir, opts, dt, max_cycles);
    if (app.got_subcommand(multistart))
      return cmd_multistart(scenario_path, out_dir, count, seed, opts);
  } catch (const permon::ScenarioFormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_input;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_input;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_solver;
  }
  return exit_ok;
}
