#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sipred/expr.hpp"

namespace sipred {

struct Dims {
  std::size_t theta = 0;
  std::size_t w = 0;
  std::size_t zp = 0;
  std::size_t zm = 0;
  std::size_t s = 0;

  /// Declared size of a group; Gamma is 1, Aux is 0 for user problems.
  std::size_t of(Group g) const;
  friend bool operator==(const Dims&, const Dims&) = default;
};

/// Which built-in constructor produced a problem and with what parameters.
/// Scalars are stored as length-1 vectors.
struct ExampleMeta {
  std::string kind;
  std::map<std::string, std::vector<double>> params;
  friend bool operator==(const ExampleMeta&, const ExampleMeta&) = default;
};

/// min_theta max_w f  s.t. for every w, with (zp, zm) solving d = 0, e <= 0,
/// some s with q(s) = 0, r(s) <= 0 satisfies g <= 0.
struct SipProblem {
  std::string name;
  Dims dims;
  std::vector<double> theta_lo, theta_hi;
  std::vector<double> w_lo, w_hi;
  std::vector<double> s_lo, s_hi;
  double gamma_lo = -1e6;
  double gamma_hi = 1e6;

  Expr f;
  std::vector<Expr> g;  // over theta, w, zp, s; target <= 0
  std::vector<Expr> d;  // over theta, w, zp, zm; target = 0
  std::vector<Expr> e;  // over theta, w, zp, zm; target <= 0
  std::vector<Expr> q;  // over s; target = 0
  std::vector<Expr> r;  // over s; target <= 0

  std::optional<ExampleMeta> example;

  friend bool operator==(const SipProblem&, const SipProblem&) = default;
};

struct Diagnostic {
  std::string code;
  std::string message;
};

/// One diagnostic per broken invariant; empty means valid. Never throws.
std::vector<Diagnostic> validate(const SipProblem& p);

class LoadError : public std::runtime_error {
 public:
  LoadError(std::string code, const std::string& message, std::vector<Diagnostic> diagnostics = {})
      : std::runtime_error(code + ": " + message),
        code_(std::move(code)),
        diagnostics_(std::move(diagnostics)) {}
  const std::string& code() const { return code_; }
  const std::vector<Diagnostic>& diagnostics() const { return diagnostics_; }

 private:
  std::string code_;
  std::vector<Diagnostic> diagnostics_;
};

/// Canonical JSON text (fixed key order, trailing newline).
std::string problem_to_json(const SipProblem& p);
/// Parses and validates; throws LoadError.
SipProblem problem_from_json(const std::string& text);

SipProblem load_problem(const std::filesystem::path& path);
void save_problem(const SipProblem& p, const std::filesystem::path& path);

struct Scenario {
  enum class Origin { Initial, FObjective, GConstraint };

  std::vector<double> w;
  int id = 0;
  Origin origin = Origin::Initial;
  int g_index = -1;  // row of g for GConstraint
  double violation_at_creation = 0.0;
};

/// "initial", "f", or "g[i]".
std::string origin_label(const Scenario& s);

struct Witness {
  std::vector<double> zp;
  std::vector<double> zm;
  std::vector<double> s;
};

/// Master solution: design, epigraph level, and one witness per scenario.
struct SolutionBundle {
  std::vector<double> theta;
  double gamma = 0.0;
  std::vector<Witness> witnesses;
};

/// Values of every group at one scenario, ready for eval.
Bindings make_bindings(std::span<const double> theta, std::span<const double> w,
              const Witness& z, double gamma = 0.0);

}  // namespace sipred
