#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "sipred/model.hpp"

namespace sipred {

struct ObstacleParams {
  int n_steps = 5;
  std::array<double, 3> x0{-2.0, 0.0, 0.0};
  std::array<double, 3> xref{2.0, 0.0, 0.0};
  std::array<double, 3> q_diag{1.0, 1.0, 1.0};
  std::array<double, 3> r_diag{0.05, 0.05, 0.05};
  double u_bound = 1.0;
  double w_bound = 0.1;
};

struct SaturationParams {
  int n_steps = 5;
  double a = 1.3;
  double w_bound = 0.2;
  double x0 = 1.0;
  double u_lo = -1.0;
  double u_hi = 1.0;
  double b_lo = 0.0;
  double b_hi = 3.0;
};

struct EstimationParams {
  int n_steps = 5;
  std::vector<double> y{-0.1, 0.0, 0.9, 3.0, 6.1, 10.2};
  std::vector<double> u{1.0, 1.0, 1.0, 1.0, 1.0};
  double dt = 1.0;
  double w_bound = 0.2;
  double x20 = 0.0;
  double m_lo = 1e-3;
  double m_hi = 1e3;
};

/// Throw std::invalid_argument on inconsistent parameters.
SipProblem build_obstacle(const ObstacleParams& p = {});
SipProblem build_saturation(const SaturationParams& p = {});
SipProblem build_estimation(const EstimationParams& p = {});

/// Builds one of "obstacle", "saturation", "estimation" with defaults.
/// Throws std::invalid_argument for other names.
SipProblem build_example(const std::string& name);

/// Recovers typed parameters from a problem's example metadata.
ObstacleParams obstacle_params(const ExampleMeta& m);
SaturationParams saturation_params(const ExampleMeta& m);
EstimationParams estimation_params(const ExampleMeta& m);

inline double sat(double lo, double hi, double v) { return v < lo ? lo : (v > hi ? hi : v); }

/// x_n of the exactly saturated closed loop x+ = (a + w) x + sat(-b x).
double simulate_saturation(const SaturationParams& p, double b, double w);

struct SaturationOracle {
  double b = 0.0;      // refined minimiser
  double value = 0.0;  // max over the w lattice of x_n^2 at b
  double lattice_b = 0.0;
  double lattice_value = 0.0;
};

/// Exhaustive min over a b lattice of the max over a w lattice of x_n^2,
/// followed by golden-section refinement of b inside the best lattice cell.
SaturationOracle oracle_saturation(const SaturationParams& p, int grid_b, int grid_w);

struct EstimationOracle {
  double m_lo = 0.0;
  double m_hi = 0.0;
  std::size_t consistent_points = 0;
};

/// Lattice with grid_w points per noise component; each point is projected
/// onto the affine set of noises consistent with the dynamics, x2_0 and a
/// constant mass, and kept if it stays in the box. nullopt if none survive.
std::optional<EstimationOracle> oracle_estimation(const EstimationParams& p, int grid_w);

}  // namespace sipred
