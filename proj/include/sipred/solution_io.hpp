#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "sipred/model.hpp"
#include "sipred/reduction.hpp"

namespace sipred {

/// What a solution file holds. `iterations` is the number of outer
/// iterations the run took.
struct SolutionFile {
  std::vector<double> theta;
  double gamma = 0.0;
  std::vector<Scenario> scenarios;
  std::vector<Witness> witnesses;
  std::string status;
  int iterations = 0;
};

SolutionFile solution_of(const ReductionReport& r);

/// Canonical JSON text: theta, gamma, scenarios, witnesses, status, iterations.
std::string solution_to_json(const SolutionFile& s);
/// Throws LoadError (PARSE_ERROR, MISSING_KEY, BAD_TYPE).
SolutionFile solution_from_json(const std::string& text);
/// Throws LoadError, MISSING_FILE when the file cannot be read.
SolutionFile load_solution(const std::filesystem::path& path);

/// BAD_SOLUTION diagnostics for lengths that do not match the problem.
std::vector<Diagnostic> check_solution(const SipProblem& p, const SolutionFile& s);

/// One JSON object per line: iter, gamma, n_scenarios, worst_violation, wall_ms.
std::string iteration_log_jsonl(const ReductionReport& r);

/// The scenario list alone, as {id, w, origin, violation} records.
std::string scenarios_to_json(const ScenarioSet& set);

}  // namespace sipred
