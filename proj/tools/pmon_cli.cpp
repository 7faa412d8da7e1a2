#include "pmon_cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "pmon/csv.hpp"
#include "pmon/errors.hpp"
#include "pmon/ipa.hpp"
#include "pmon/optimizer.hpp"
#include "pmon/policy.hpp"
#include "pmon/riccati.hpp"
#include "pmon/scenario_io.hpp"
#include "pmon/validate.hpp"

namespace pmon::cli {
namespace {

namespace fs = std::filesystem;

std::string sig(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

int exit_code_for(const std::exception_ptr& e) {
  try {
    std::rethrow_exception(e);
  } catch (const DescentFailure& f) {
    return f.cause() ? exit_code_for(f.cause()) : kFailure;
  } catch (const ValidationError&) {
    return kValidation;
  } catch (const UnobservedTargetError&) {
    return kValidation;
  } catch (const DomainError&) {
    return kValidation;
  } catch (const NonConvergenceError&) {
    return kNonConvergence;
  } catch (const DivergenceError&) {
    return kNonConvergence;
  } catch (const UniquenessError&) {
    return kNonConvergence;
  } catch (const TrialFailureError&) {
    return kNonConvergence;
  } catch (...) {
    return kFailure;
  }
}

struct Loaded {
  ScenarioFile file;
  bool projected = false;
};

bool is_constraint(ViolationKind k) {
  return k == ViolationKind::kNegativeDuration || k == ViolationKind::kDurationBudget || k == ViolationKind::kClosure;
}

// Loads and validates; schedule constraint violations are repaired by
// projection only when the caller allows it.
Loaded load_checked(const std::string& path, bool auto_project, std::ostream& out) {
  Loaded l{load_scenario(path), false};
  auto violations = validate_scenario(l.file.scenario);
  if (auto_project && !violations.empty()) {
    bool only_constraints = true;
    for (const auto& v : violations) only_constraints = only_constraints && is_constraint(v.kind);
    if (only_constraints) {
      for (std::size_t j = 0; j < l.file.scenario.agents.size(); ++j) {
        auto& a = l.file.scenario.agents[j];
        const AgentParams p = project(a);
        if (!(p == a)) {
          out << "note: agent " << j + 1 << " parameters projected onto the feasible set\n";
          l.projected = true;
        }
        a = p;
      }
      violations = validate_scenario(l.file.scenario);
    }
  }
  if (!violations.empty()) {
    std::ostringstream os;
    os << "scenario is invalid:";
    for (const auto& v : violations) os << "\n  " << to_string(v.kind) << ": " << v.message;
    throw ValidationError(os.str());
  }
  return l;
}

NumericsConfig numerics_of(const ScenarioFile& f) { return f.numerics.value_or(NumericsConfig{}); }

fs::path prepare_dir(const std::string& dir) {
  fs::path p(dir);
  fs::create_directories(p);
  return p;
}

int cmd_evaluate(const std::string& file, const std::string& out_dir, bool auto_project, std::ostream& out) {
  const auto l = load_checked(file, auto_project, out);
  EvaluateOptions opt;
  opt.numerics = numerics_of(l.file);
  const auto ev = evaluate(l.file.scenario, opt);
  const fs::path dir = prepare_dir(out_dir);
  for (const auto& c : ev.cycles) {
    write_file_atomic(dir / ("cycle_target" + std::to_string(c.target_index + 1) + ".csv"), cycle_csv(c));
  }
  write_file_atomic(dir / "positions.csv", positions_csv(l.file.scenario, *ev.grid));
  for (const auto& c : ev.cycles) {
    out << "target " << c.target_index + 1 << ": int tr(Omega) = "
        << sig(cycle_cost(c, l.file.scenario.targets[c.target_index], l.file.scenario.T), 9) << " (" << c.cycles()
        << " periods, residual " << sig(c.periodic_residual, 3) << ")\n";
  }
  out << "J = " << sig(ev.cost, 9) << "\n";
  return kOk;
}

int cmd_optimize(const std::string& file, const std::string& out_dir, bool auto_project, int max_iter,
                 std::ostream& out, std::ostream& err) {
  const auto l = load_checked(file, auto_project, out);
  DescentConfig cfg = l.file.descent.value_or(DescentConfig{});
  if (max_iter >= 0) cfg.max_iter = max_iter;
  const fs::path dir = prepare_dir(out_dir);
  try {
    const auto res = descend(l.file.scenario, cfg, numerics_of(l.file));
    write_file_atomic(dir / "history.csv", history_csv(res.history));
    ScenarioFile final_file = l.file;
    final_file.scenario = res.scenario;
    save_scenario(dir / "final.scenario", final_file);
    const auto& last = res.history.records.back();
    out << "final J = " << sig(last.J, 9) << " after " << last.iter << " iterations ("
        << (res.history.converged ? "converged" : "iteration limit") << ")\n";
    return kOk;
  } catch (const DescentFailure& f) {
    write_file_atomic(dir / "history.csv", history_csv(f.history()));
    err << "error: optimization stopped at " << f.what() << "\n";
    err << "partial history written to " << (dir / "history.csv").string() << "\n";
    return exit_code_for(std::current_exception());
  }
}

int cmd_gradcheck(const std::string& file, const std::string& out_dir, double h, double rel_tol, std::ostream& out) {
  const auto l = load_checked(file, false, out);
  FdOptions opt;
  opt.h = h;
  if (l.file.numerics) {
    opt.numerics.base_steps = std::max(opt.numerics.base_steps, l.file.numerics->base_steps);
  }
  const auto rep = gradcheck(l.file.scenario, opt, rel_tol);
  const fs::path dir = prepare_dir(out_dir);
  write_file_atomic(dir / "gradcheck.csv", gradcheck_csv(rep));
  out << std::left << std::setw(16) << "parameter" << std::setw(20) << "ipa" << std::setw(20) << "fd"
      << std::setw(12) << "rel_error" << "status\n";
  for (const auto& r : rep.rows) {
    out << std::left << std::setw(16) << r.id.name() << std::setw(20) << sig(r.ipa, 10) << std::setw(20)
        << sig(r.fd, 10) << std::setw(12) << sig(r.rel_error, 3) << to_string(r.status);
    if (!r.fd_info.error.empty()) out << " (" << r.fd_info.error << ")";
    out << "\n";
  }
  out << rep.count(GradcheckStatus::kPass) << " passed, " << rep.count(GradcheckStatus::kFail) << " failed, "
      << rep.count(GradcheckStatus::kKinkExcluded) << " kink-excluded, " << rep.count(GradcheckStatus::kBelowThreshold)
      << " below threshold, " << rep.count(GradcheckStatus::kError) << " errors\n";
  return rep.passed() ? kOk : kGradcheckFailed;
}

int cmd_simulate(const std::string& file, const std::string& out_dir, int trials, long long seed, double dt,
                 std::ostream& out) {
  const auto l = load_checked(file, false, out);
  McConfig cfg = l.file.monte_carlo.value_or(McConfig{});
  if (trials > 0) cfg.n_trials = static_cast<std::size_t>(trials);
  if (seed >= 0) cfg.rng_seed = static_cast<std::uint64_t>(seed);
  if (dt > 0.0) cfg.dt = dt;
  const auto rep = kalman_bucy_monte_carlo(l.file.scenario, cfg, numerics_of(l.file));
  const fs::path dir = prepare_dir(out_dir);
  write_file_atomic(dir / "mc_report.csv", mc_report_csv(rep));
  for (const auto& t : rep.targets) {
    out << "target " << t.target_index + 1 << ": empirical " << sig(t.empirical_mse, 6) << ", predicted "
        << sig(t.predicted, 6) << ", ratio " << sig(t.ratio(), 4) << "\n";
  }
  out << "total: empirical " << sig(rep.empirical_total, 6) << ", predicted " << sig(rep.predicted_total, 6)
      << ", ratio " << sig(rep.empirical_total / rep.predicted_total, 4) << " (" << rep.n_trials << " trials, seed "
      << rep.rng_seed << ", " << rep.rng_algorithm << ")\n";
  return kOk;
}

std::vector<SampledTrajectory> read_trajectories(const std::string& path, std::size_t agents) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open trajectory file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  const auto table = parse_numeric_csv(ss.str());
  if (table.header.size() != agents + 1 || table.header.front() != "q") {
    throw ValidationError("trajectory CSV needs columns q, agent1.." + std::to_string(agents));
  }
  const std::size_t n = table.rows.size();
  if (n < 2) throw ValidationError("trajectory CSV needs at least two samples");
  for (std::size_t k = 0; k < n; ++k) {
    const double expected = static_cast<double>(k) / static_cast<double>(n - 1);
    if (std::abs(table.rows[k][0] - expected) > 1e-9) {
      throw ValidationError("trajectory CSV must sample q uniformly from 0 to 1");
    }
  }
  std::vector<SampledTrajectory> out(agents);
  for (std::size_t j = 0; j < agents; ++j) {
    for (const auto& row : table.rows) out[j].positions.push_back(row[j + 1]);
  }
  return out;
}

int cmd_improve(const std::string& file, const std::string& trajectory, const std::string& out_file,
                std::ostream& out) {
  ScenarioFile f = load_scenario(file);
  const auto samples = read_trajectories(trajectory, f.scenario.agents.size());
  const auto improved = improve_policy(samples, f.scenario);
  for (std::size_t j = 0; j < improved.size(); ++j) {
    f.scenario.agents[j] = improved[j].params;
    out << "agent " << j + 1 << ": " << improved[j].params.moves() << " moves, " << improved[j].switches
        << " control switches\n";
  }
  const fs::path p(out_file);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  save_scenario(p, f);
  out << "wrote " << p.string() << "\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Periodic multi-agent monitoring: steady-state cost, gradients and descent", "pmon"};
  app.require_subcommand(1);

  std::string file, out_dir = ".", trajectory, out_file = "improved.scenario";
  bool auto_project = false;
  int max_iter = -1;
  double h = 1e-5, rel_tol = 1e-3, dt = 0.0;
  int trials = 0;
  long long seed = -1;

  auto* evaluate_cmd = app.add_subcommand("evaluate", "Limit cycles and steady-state cost J");
  evaluate_cmd->add_option("file", file, "Scenario file")->required();
  evaluate_cmd->add_option("--out-dir", out_dir, "Directory for the CSV output");
  evaluate_cmd->add_flag("--auto-project", auto_project, "Project infeasible schedules instead of failing");

  auto* optimize_cmd = app.add_subcommand("optimize", "Projected gradient descent on schedules and period");
  optimize_cmd->add_option("file", file, "Scenario file")->required();
  optimize_cmd->add_option("--out-dir", out_dir, "Directory for history.csv and final.scenario");
  optimize_cmd->add_flag("--auto-project", auto_project, "Project infeasible schedules instead of failing");
  optimize_cmd->add_option("--max-iter", max_iter, "Override descent.max_iter")->check(CLI::NonNegativeNumber);

  auto* gradcheck_cmd = app.add_subcommand("gradcheck", "Compare IPA gradients with finite differences");
  gradcheck_cmd->add_option("file", file, "Scenario file")->required();
  gradcheck_cmd->add_option("--step", h, "Finite-difference step h")->check(CLI::PositiveNumber);
  gradcheck_cmd->add_option("--rel-tol", rel_tol, "Relative tolerance")->check(CLI::PositiveNumber);
  gradcheck_cmd->add_option("--out-dir", out_dir, "Directory for gradcheck.csv");

  auto* simulate_cmd = app.add_subcommand("simulate", "Monte Carlo Kalman-Bucy check of the steady-state cost");
  simulate_cmd->add_option("file", file, "Scenario file")->required();
  simulate_cmd->add_option("--out-dir", out_dir, "Directory for mc_report.csv");
  simulate_cmd->add_option("--trials", trials, "Override monte_carlo.n_trials")->check(CLI::PositiveNumber);
  simulate_cmd->add_option("--seed", seed, "Override monte_carlo.seed")->check(CLI::NonNegativeNumber);
  simulate_cmd->add_option("--dt", dt, "Override monte_carlo.dt")->check(CLI::PositiveNumber);

  auto* improve_cmd = app.add_subcommand("improve", "Bang-dwell schedule that dominates a sampled trajectory");
  improve_cmd->add_option("file", file, "Scenario file")->required();
  improve_cmd->add_option("trajectory", trajectory, "CSV with columns q, agent1, ...")->required();
  improve_cmd->add_option("--out", out_file, "Output scenario file");

  std::vector<std::string> rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kValidation;
  }

  try {
    if (*evaluate_cmd) return cmd_evaluate(file, out_dir, auto_project, out);
    if (*optimize_cmd) return cmd_optimize(file, out_dir, auto_project, max_iter, out, err);
    if (*gradcheck_cmd) return cmd_gradcheck(file, out_dir, h, rel_tol, out);
    if (*simulate_cmd) return cmd_simulate(file, out_dir, trials, seed, dt, out);
    if (*improve_cmd) return cmd_improve(file, trajectory, out_file, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(std::current_exception());
  }
  return kFailure;
}

}  // namespace pmon::cli
