#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sipred/tape.hpp"

namespace sipred {

struct SolverOptions {
  double tol_feas = 1e-7;
  double tol_opt = 1e-6;
  int max_outer_iter = 50;
  int max_inner_iter = 500;
  int restarts = 10;
  std::uint64_t rng_seed = 0;
  double initial_penalty = 10.0;
  /// Penalty beyond which an infeasible run is declared Diverged.
  double penalty_cap = 1e12;
  /// Curvature pairs kept by the inner quasi-Newton solver.
  int lbfgs_memory = 15;

  void check() const;  // throws std::invalid_argument
};

/// min objective(x)  s.t.  eq(x) = 0, ineq(x) <= 0, lower <= x <= upper.
struct NlpProblem {
  std::size_t n = 0;
  std::vector<double> lower;
  std::vector<double> upper;
  Tape objective;
  std::vector<Tape> eq;
  std::vector<Tape> ineq;
  /// Diagnostic label per variable, e.g. "zp[3]@2" for scenario copy 2.
  std::vector<std::string> names;

  void check() const;  // throws std::invalid_argument
};

enum class NlpStatus { Converged, IterationLimit, Diverged };

std::string_view to_string(NlpStatus s);

struct NlpSolution {
  std::vector<double> x;
  double objective_value = 0.0;
  double max_eq_violation = 0.0;
  double max_ineq_violation = 0.0;
  double stationarity = 0.0;
  NlpStatus status = NlpStatus::IterationLimit;
  int outer_iterations = 0;
  int inner_iterations = 0;
  /// Index of the start that produced this point (multistart only).
  std::size_t start_index = 0;

  double max_violation() const { return std::max(max_eq_violation, max_ineq_violation); }
  bool feasible(double tol) const { return max_violation() <= tol; }
};

/// Sum of the objective plus violation measures at an arbitrary point.
struct PointReport {
  double objective = 0.0;
  double max_eq_violation = 0.0;
  double max_ineq_violation = 0.0;
};

PointReport evaluate_point(const NlpProblem& p, std::span<const double> x);

/// Local augmented-Lagrangian solve from `warm_start` (clipped into bounds)
/// or, if absent, from the box-projected origin.
NlpSolution solve(const NlpProblem& p, const SolverOptions& opts,
                  std::optional<std::span<const double>> warm_start = std::nullopt);

/// Uniform random starts inside the bounds; unbounded coordinates are drawn
/// from [-10, 10]. The i-th start depends only on (seed, i).
std::vector<std::vector<double>> random_starts(const NlpProblem& p, int count,
                                               std::uint64_t seed);

/// Solves from each start in order and keeps the best by the multistart rule.
/// Precondition: at least one start.
NlpSolution solve_from_starts(const NlpProblem& p, const SolverOptions& opts,
                              std::span<const std::vector<double>> starts);

/// Solves from every extra start and then from opts.restarts random starts.
/// Returns the feasible solution with the best objective (earliest start on
/// ties), otherwise the least infeasible one.
NlpSolution multistart(const NlpProblem& p, const SolverOptions& opts,
                       std::span<const std::vector<double>> extra_starts = {});

}  // namespace sipred
