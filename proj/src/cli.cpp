#include "sipred/cli.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <ostream>

#include "CLI11.hpp"
#include "json_util.hpp"
#include "sipred/audit.hpp"
#include "sipred/examples.hpp"
#include "sipred/reduction.hpp"
#include "sipred/solution_io.hpp"

namespace sipred::cli {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

void report_load_error(const LoadError& e, std::ostream& err) {
  err << "error: " << e.what() << "\n";
  for (const Diagnostic& d : e.diagnostics()) err << "  " << d.code << ": " << d.message << "\n";
}

int exit_for(ReductionStatus s) {
  switch (s) {
    case ReductionStatus::Optimal: return kOk;
    case ReductionStatus::ScenarioBudgetExceeded:
    case ReductionStatus::IterationLimit:
    case ReductionStatus::Stalled: return kSuboptimal;
    case ReductionStatus::MasterInfeasible: return kMasterInfeasible;
    case ReductionStatus::AdversaryFailed: return kAdversaryFailed;
  }
  return kUsage;
}

bool prepare_out_dir(const Config& c, std::ostream& err) {
  std::error_code ec;
  fs::create_directories(c.out_dir, ec);
  if (ec || !fs::is_directory(c.out_dir)) {
    err << "error: BAD_FLAG: cannot create output directory " << c.out_dir << "\n";
    return false;
  }
  return true;
}

std::string out_path(const Config& c, const char* name) { return (fs::path(c.out_dir) / name).string(); }

ReductionOptions reduction_options(const Config& c) {
  ReductionOptions o;
  o.rng_seed = c.seed;
  o.max_scenarios = c.max_scenarios;
  o.tol_viol = c.tol_viol;
  o.tol_inner = std::min(o.tol_inner, 0.1 * c.tol_viol);
  o.adversary_restarts = c.restarts;
  o.nlp.max_inner_iter = c.max_inner_iter;
  return o;
}

std::string trajectories_csv(const SipProblem& p, const AuditReport& a) {
  const ObstacleParams op = obstacle_params(*p.example);
  std::string out = "sample,step,x1,x2,x3\n";
  char buf[160];
  for (std::size_t k = 0; k < a.trajectories.size(); ++k) {
    const auto& zp = a.trajectories[k];
    if (zp.empty()) continue;
    std::snprintf(buf, sizeof buf, "%zu,0,%.17g,%.17g,%.17g\n", k, op.x0[0], op.x0[1], op.x0[2]);
    out += buf;
    for (std::size_t step = 1; 3 * step <= zp.size(); ++step) {
      const double* x = &zp[3 * (step - 1)];
      std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g,%.17g,%.17g\n", k, step, x[0], x[1], x[2]);
      out += buf;
    }
  }
  return out;
}

}  // namespace

int cmd_solve(const std::string& problem, const Config& c, std::ostream& out, std::ostream& err) {
  SipProblem p;
  try {
    p = load_problem(problem);
  } catch (const LoadError& e) {
    report_load_error(e, err);
    return kUsage;
  }
  const ReductionOptions opts = reduction_options(c);
  try {
    opts.check();
  } catch (const std::invalid_argument& e) {
    err << "error: BAD_FLAG: " << e.what() << "\n";
    return kUsage;
  }
  if (!prepare_out_dir(c, err)) return kUsage;

  const auto t0 = std::chrono::steady_clock::now();
  const ReductionReport rep = run(p, opts);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  detail::write_text(out_path(c, "solution.json"), solution_to_json(solution_of(rep)));
  detail::write_text(out_path(c, "iterations.jsonl"), iteration_log_jsonl(rep));
  detail::write_text(out_path(c, "scenarios.json"), scenarios_to_json(rep.scenario_set));

  out << "status=" << to_string(rep.status) << " gamma=" << fmt(rep.gamma)
      << " scenarios=" << rep.scenario_set.size() << " iterations=" << rep.iterations.size()
      << " wall=" << fmt(secs) << "s\n";
  for (const ReductionEvent& e : rep.events) err << "event " << e.kind << " at " << e.iteration << ": " << e.detail << "\n";
  return exit_for(rep.status);
}

int cmd_validate(const std::string& problem, const std::string& solution, const Config& c, std::ostream& out,
                 std::ostream& err) {
  if (c.samples == 0) {
    err << "error: BAD_FLAG: --samples must be at least 1\n";
    return kUsage;
  }
  SipProblem p;
  SolutionFile s;
  try {
    p = load_problem(problem);
    s = load_solution(solution);
  } catch (const LoadError& e) {
    report_load_error(e, err);
    return kUsage;
  }
  if (const auto diags = check_solution(p, s); !diags.empty()) {
    err << "error: BAD_SOLUTION: solution does not fit the problem\n";
    for (const Diagnostic& d : diags) err << "  " << d.code << ": " << d.message << "\n";
    return kUsage;
  }
  if (!prepare_out_dir(c, err)) return kUsage;

  AuditOptions ao;
  ao.tol_viol = c.tol_viol;
  ao.keep_records = c.sample_csv;
  const bool trajectories = c.emit_trajectories > 0 && p.example && p.example->kind == "obstacle";
  if (c.emit_trajectories > 0 && !trajectories) err << "note: trajectory output is only available for the obstacle example\n";
  if (trajectories) ao.keep_trajectories = c.emit_trajectories;

  const AuditReport a = monte_carlo(p, s.theta, s.gamma, c.samples, c.seed, ao);
  detail::write_text(out_path(c, "audit.json"), audit_to_json(a));
  if (c.sample_csv) detail::write_text(out_path(c, "samples.csv"), audit_records_csv(a));
  if (trajectories) detail::write_text(out_path(c, "trajectories.csv"), trajectories_csv(p, a));

  out << "violations=" << a.violations << " worst_cost=" << fmt(a.worst_cost) << " gamma=" << fmt(a.gamma)
      << " margin=" << fmt(a.margin) << " infeasible_samples=" << a.infeasible_samples << "\n";
  return a.violations == 0 && a.margin >= -1e-6 ? kOk : kViolations;
}

int cmd_example(const std::string& name, const std::string& path, std::ostream& out, std::ostream& err) {
  SipProblem p;
  try {
    p = build_example(name);
  } catch (const std::invalid_argument& e) {
    err << "error: UNKNOWN_EXAMPLE: " << e.what() << "\n";
    return kUsage;
  }
  try {
    save_problem(p, path);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
  out << "wrote " << name << " to " << path << "\n";
  return kOk;
}

int cmd_oracle(const std::string& name, const Config& c, std::ostream& out, std::ostream& err) {
  if (name == "saturation") {
    const int gw = c.grid_w > 0 ? c.grid_w : 2000;
    if (c.grid_b < 100 || gw < 100) {
      err << "error: BAD_FLAG: saturation grids need at least 100 points\n";
      return kUsage;
    }
    const SaturationOracle o = oracle_saturation({}, c.grid_b, gw);
    out << "b*=" << fmt(o.b) << " value*=" << fmt(o.value) << " lattice_b=" << fmt(o.lattice_b)
        << " lattice_value=" << fmt(o.lattice_value) << "\n";
    return kOk;
  }
  if (name == "estimation") {
    const int gw = c.grid_w > 0 ? c.grid_w : 5;
    if (gw < 1) {
      err << "error: BAD_FLAG: --grid-w must be positive\n";
      return kUsage;
    }
    const auto o = oracle_estimation({}, gw);
    if (!o) {
      out << "no lattice point is consistent with the data\n";
      return kOk;
    }
    out << "m_lo*=" << fmt(o->m_lo) << " m_hi*=" << fmt(o->m_hi) << " consistent_points=" << o->consistent_points
        << "\n";
    return kOk;
  }
  if (name == "obstacle") {
    // the disturbance-free plan: one zero scenario, solved directly
    const SipProblem p = build_obstacle();
    ScenarioSet set;
    set.add(std::vector<double>(p.dims.w, 0.0), Scenario::Origin::Initial, -1, 0.0);
    const MasterProblem mp = build_master(p, set);
    SolverOptions so;
    so.rng_seed = c.seed;
    so.restarts = c.restarts;
    const std::vector<std::vector<double>> extra{mp.start};
    const NlpSolution sol = multistart(mp.nlp, so, extra);
    out << "nominal_cost=" << fmt(sol.objective_value) << " status=" << to_string(sol.status) << "\n";
    return sol.feasible(so.tol_feas) ? kOk : kMasterInfeasible;
  }
  err << "error: UNKNOWN_EXAMPLE: unknown example '" << name << "'\n";
  return kUsage;
}

int main(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Robust min-max programs by local reduction"};
  app.require_subcommand(1);
  Config c;
  std::string problem, solution, name, path;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", c.seed, "Seed for every random choice");
    sub->add_option("--out-dir", c.out_dir, "Directory for output files");
    sub->add_option("--tol-viol", c.tol_viol, "Violation threshold")->check(CLI::PositiveNumber);
  };

  CLI::App* solve = app.add_subcommand("solve", "Run the reduction and write solution, log and scenarios");
  solve->add_option("problem", problem, "Problem file")->required();
  add_common(solve);
  solve->add_option("--max-scenarios", c.max_scenarios, "Scenario budget")->check(CLI::PositiveNumber);
  solve->add_option("--restarts", c.restarts, "Random restarts per adversary")->check(CLI::NonNegativeNumber);
  solve->add_option("--max-inner-iter", c.max_inner_iter, "Inner iterations per subproblem")->check(CLI::PositiveNumber);

  CLI::App* validate = app.add_subcommand("validate", "Monte-Carlo audit of a solution");
  validate->add_option("problem", problem, "Problem file")->required();
  validate->add_option("solution", solution, "Solution file")->required();
  add_common(validate);
  validate->add_option("--samples", c.samples, "Number of sampled noises");
  validate->add_option("--emit-trajectories", c.emit_trajectories, "Trajectories to write (obstacle only)");
  validate->add_flag("--sample-csv", c.sample_csv, "Write per-sample costs and violations");

  CLI::App* example = app.add_subcommand("example", "Write a built-in problem file");
  example->add_option("name", name, "obstacle, saturation or estimation")->required();
  example->add_option("output", path, "Output path")->required();

  CLI::App* oracle = app.add_subcommand("oracle", "Print brute-force reference values");
  oracle->add_option("name", name, "obstacle, saturation or estimation")->required();
  oracle->add_option("--grid-b", c.grid_b, "Saturation gain lattice size");
  oracle->add_option("--grid-w", c.grid_w, "Noise lattice size");
  oracle->add_option("--seed", c.seed, "Seed for the nominal obstacle solve");
  oracle->add_option("--restarts", c.restarts, "Restarts for the nominal obstacle solve")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: BAD_FLAG: " << e.what() << "\n";
    return kUsage;
  }

  if (solve->parsed()) return cmd_solve(problem, c, out, err);
  if (validate->parsed()) return cmd_validate(problem, solution, c, out, err);
  if (example->parsed()) return cmd_example(name, path, out, err);
  return cmd_oracle(name, c, out, err);
}

}  // namespace sipred::cli
