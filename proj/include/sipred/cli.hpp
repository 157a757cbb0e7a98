#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

namespace sipred::cli {

enum Exit : int {
  kOk = 0,
  kUsage = 1,  // load failure, bad flag, missing file, unknown name
  kSuboptimal = 2,
  kMasterInfeasible = 3,
  kAdversaryFailed = 4,
  kViolations = 5,
};

struct Config {
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  int max_scenarios = 100;
  double tol_viol = 1e-6;
  int restarts = 10;
  int max_inner_iter = 500;
  std::size_t samples = 100000;
  std::size_t emit_trajectories = 0;
  bool sample_csv = false;
  int grid_b = 2000;
  int grid_w = 0;  // 0 picks the oracle's own default
};

int cmd_solve(const std::string& problem, const Config& c, std::ostream& out, std::ostream& err);
int cmd_validate(const std::string& problem, const std::string& solution, const Config& c, std::ostream& out,
                 std::ostream& err);
int cmd_example(const std::string& name, const std::string& path, std::ostream& out, std::ostream& err);
int cmd_oracle(const std::string& name, const Config& c, std::ostream& out, std::ostream& err);

/// Parses argv and dispatches; returns the process exit code.
int main(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace sipred::cli
