#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sipred/model.hpp"
#include "sipred/reduction.hpp"

namespace sipred {

struct AuditOptions {
  /// An inner minimum of a g row above this counts as a violation.
  double tol_viol = 1e-6;
  /// Restarts for per-sample trajectory and inner-min solves without a shortcut.
  int resolve_restarts = 3;
  SolverOptions nlp;
  bool keep_records = false;
  /// zp of the first this-many samples, for trajectory plots.
  std::size_t keep_trajectories = 0;
};

struct SampleRecord {
  std::size_t index = 0;
  bool resolved = false;
  double cost = 0.0;
  double max_g = 0.0;  // largest inner minimum over g rows, -inf without g
};

struct AuditReport {
  std::size_t samples = 0;
  std::size_t violations = 0;
  std::size_t infeasible_samples = 0;
  double worst_cost = 0.0;  // -inf if no sample resolved
  std::vector<double> worst_w;
  double worst_g = 0.0;
  double gamma = 0.0;
  double margin = 0.0;  // gamma - worst_cost
  std::uint64_t seed = 0;
  std::vector<SampleRecord> records;
  std::vector<std::vector<double>> trajectories;
};

/// Evaluates the candidate at the given noises, in order.
AuditReport audit_samples(const SipProblem& p, std::span<const double> theta, double gamma,
                          const std::vector<std::vector<double>>& ws, const AuditOptions& opts = {});

/// n uniform draws from the w box from one stream seeded with `seed`, so a
/// shorter run sees a prefix of a longer one.
AuditReport monte_carlo(const SipProblem& p, std::span<const double> theta, double gamma, std::size_t n,
                        std::uint64_t seed, const AuditOptions& opts = {});

/// Re-runs every adversary at the reported (theta, gamma) with opts.rng_seed
/// and returns the largest violation; +inf if an adversary found no
/// admissible trajectory.
double certify(const SipProblem& p, const ReductionReport& report, const ReductionOptions& opts);

std::string audit_to_json(const AuditReport& a);
/// sample,resolved,cost,max_g
std::string audit_records_csv(const AuditReport& a);

}  // namespace sipred
