#pragma once

#include <functional>
#include <span>
#include <vector>

namespace sipred::detail {

/// Writes the gradient into grad (overwriting) and returns the value.
using SmoothFn = std::function<double(std::span<const double> x, std::span<double> grad)>;

struct BoxLbfgsOptions {
  int max_iter = 500;
  double tol_pg = 1e-6;
  int memory = 8;
};

struct BoxLbfgsResult {
  double value = 0.0;
  double pg_norm = 0.0;  // infinity norm of the projected gradient
  int iterations = 0;
  bool converged = false;
};

/// Projected gradient P(x - g) - x in the infinity norm.
double projected_gradient_norm(std::span<const double> x, std::span<const double> g,
                               std::span<const double> lo, std::span<const double> hi);

/// Projected L-BFGS with an active-set mask and Armijo backtracking along the
/// projected path. x is projected into [lo, hi] first and updated in place.
BoxLbfgsResult minimize_box(const SmoothFn& fn, std::vector<double>& x,
                            std::span<const double> lo, std::span<const double> hi,
                            const BoxLbfgsOptions& opts);

}  // namespace sipred::detail
