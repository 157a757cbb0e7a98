#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sipred/model.hpp"
#include "sipred/nlp.hpp"

namespace sipred {

/// Scenarios only ever grow. Two scenarios closer than dedup_radius in the
/// infinity norm count as the same one.
struct ScenarioSet {
  std::vector<Scenario> scenarios;
  /// Adversary witnesses used to start the master for new scenarios,
  /// aligned with `scenarios` (empty witness means none).
  std::vector<Witness> hints;
  double dedup_radius = 1e-6;

  std::size_t size() const { return scenarios.size(); }
  bool contains_near(std::span<const double> w) const;
  /// Appends and returns the new scenario; ids are consecutive from 0.
  const Scenario& add(std::vector<double> w, Scenario::Origin origin, int g_index, double violation,
                      Witness hint = {});
};

enum class AddPolicy { WorstOnly, AllViolating };

struct ReductionOptions {
  double tol_viol = 1e-6;
  double tol_inner = 1e-7;
  int max_scenarios = 100;
  int max_outer = 50;
  int adversary_restarts = 10;
  /// Random restarts of the master on top of the warm start.
  int master_restarts = 1;
  /// Inner s-set size per constraint adversary call.
  int inner_budget = 50;
  AddPolicy add_policy = AddPolicy::AllViolating;
  double dedup_radius = 1e-6;
  /// Bracket for the adversary epigraph variable.
  double sigma_bound = 1e6;
  SolverOptions nlp;
  std::uint64_t rng_seed = 0;

  void check() const;  // throws std::invalid_argument
};

/// Slot arithmetic for theta ++ gamma ++ per-scenario (zp, zm, s).
struct MasterLayout {
  Dims dims;
  std::size_t scenarios = 0;

  std::size_t gamma_slot() const { return dims.theta; }
  std::size_t block() const { return dims.zp + dims.zm + dims.s; }
  std::size_t block_start(std::size_t i) const { return dims.theta + 1 + i * block(); }
  std::size_t size() const { return dims.theta + 1 + scenarios * block(); }

  std::vector<double> pack(const SolutionBundle& b) const;
  SolutionBundle unpack(std::span<const double> x) const;
};

struct MasterProblem {
  NlpProblem nlp;
  MasterLayout layout;
  std::vector<double> start;
};

/// Finite-scenario master: min gamma over theta, gamma and one witness per
/// scenario. `s_start` seeds s for scenarios without a prior witness.
MasterProblem build_master(const SipProblem& p, const ScenarioSet& set,
                           const std::optional<SolutionBundle>& warm = std::nullopt,
                           std::span<const double> s_start = {});

struct InnerCertificate {
  std::vector<std::vector<double>> inner_set;
  double sigma = 0.0;
  /// sigma minus the independent inner minimum of g_i at the returned point.
  double inner_gap = 0.0;
  bool budget_exceeded = false;
};

struct AdversaryResult {
  int g_index = -1;  // -1 for the objective adversary
  bool failed = false;
  std::vector<double> w;
  double violation = 0.0;
  std::vector<double> witness_zp;
  std::vector<double> witness_zm;
  std::optional<InnerCertificate> certificate;
  NlpStatus status = NlpStatus::IterationLimit;
};

/// Starting points an adversary should try besides its random ones.
struct AdversaryHints {
  std::vector<std::vector<double>> w;
};

/// Max over w and trajectories (d = 0, e <= 0) of f - gamma.
AdversaryResult adversary_f(const SipProblem& p, std::span<const double> theta, double gamma,
                            const ReductionOptions& opts, const AdversaryHints& hints = {});

/// Max over w and trajectories of min over feasible s of g_i, solved by an
/// inner reduction over s.
AdversaryResult adversary_g(const SipProblem& p, std::span<const double> theta, std::size_t i,
                            const ReductionOptions& opts, const AdversaryHints& hints = {});

/// Min over s of g_i at fixed (theta, w, zp), subject to q = 0, r <= 0 and
/// the s box. Without s the value is g_i itself. nullopt if no start reaches
/// q/r feasibility.
struct InnerMin {
  std::vector<double> s;
  double value = 0.0;
};
std::optional<InnerMin> inner_min(const SipProblem& p, std::size_t i, std::span<const double> theta,
                                  std::span<const double> w, std::span<const double> zp,
                                  const SolverOptions& opts);

/// Completes a trajectory (zp, zm) for fixed (theta, w); nullopt if d/e
/// feasibility is not reached.
std::optional<Witness> resolve_trajectory(const SipProblem& p, std::span<const double> theta,
                                          std::span<const double> w, const SolverOptions& opts,
                                          const Witness* start = nullptr);

/// The s-box center projected onto {q = 0, r <= 0}; empty without s.
std::vector<double> feasible_s_center(const SipProblem& p, const SolverOptions& opts);

enum class ReductionStatus {
  Optimal,
  ScenarioBudgetExceeded,
  MasterInfeasible,
  AdversaryFailed,
  IterationLimit,
  Stalled,
};

std::string_view to_string(ReductionStatus s);

struct IterationRecord {
  int iteration = 0;
  double gamma = 0.0;
  std::size_t n_scenarios = 0;  // master size this iteration
  int scenarios_added = 0;
  double worst_violation = 0.0;
  NlpStatus master_status = NlpStatus::IterationLimit;
  double wall_ms = 0.0;
};

struct ReductionEvent {
  int iteration = 0;
  std::string kind;  // e.g. LOCAL_DIP
  std::string detail;
};

struct ReductionReport {
  std::vector<double> theta;
  double gamma = 0.0;
  ScenarioSet scenario_set;
  SolutionBundle bundle;
  std::vector<IterationRecord> iterations;
  std::vector<AdversaryResult> last_pass;
  std::vector<ReductionEvent> events;
  ReductionStatus status = ReductionStatus::IterationLimit;
};

/// Alternates master solves and adversary passes until no scenario violates
/// by more than tol_viol. Solver failures are reported as statuses.
ReductionReport run(const SipProblem& p, const ReductionOptions& opts);

/// Seed for stream `k` of a run seeded with `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t k);

}  // namespace sipred
