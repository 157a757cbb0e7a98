#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "sipred/examples.hpp"

namespace sipred {

namespace {

std::vector<double> linspace(double lo, double hi, int count) {
  if (count == 1) return {0.5 * (lo + hi)};
  std::vector<double> v(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) v[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (count - 1);
  return v;
}

double worst_over(const SaturationParams& p, double b, const std::vector<double>& ws) {
  double worst = -std::numeric_limits<double>::infinity();
  for (double w : ws) {
    const double xn = simulate_saturation(p, b, w);
    worst = std::max(worst, xn * xn);
  }
  return worst;
}

}  // namespace

double simulate_saturation(const SaturationParams& p, double b, double w) {
  double x = p.x0;
  for (int k = 0; k < p.n_steps; ++k) x = (p.a + w) * x + sat(p.u_lo, p.u_hi, -b * x);
  return x;
}

SaturationOracle oracle_saturation(const SaturationParams& p, int grid_b, int grid_w) {
  if (grid_b < 1 || grid_w < 1) throw std::invalid_argument("oracle grids must be positive");
  const auto bs = linspace(p.b_lo, p.b_hi, grid_b);
  const auto ws = p.w_bound > 0.0 ? linspace(-p.w_bound, p.w_bound, grid_w) : std::vector<double>{0.0};

  SaturationOracle out;
  out.lattice_value = std::numeric_limits<double>::infinity();
  std::size_t best = 0;
  for (std::size_t i = 0; i < bs.size(); ++i) {
    const double v = worst_over(p, bs[i], ws);
    if (v < out.lattice_value) {
      out.lattice_value = v;
      best = i;
    }
  }
  out.lattice_b = bs[best];
  out.b = out.lattice_b;
  out.value = out.lattice_value;
  if (bs.size() < 2) return out;

  // golden section inside the neighbouring lattice cells
  double lo = bs[best == 0 ? 0 : best - 1];
  double hi = bs[std::min(best + 1, bs.size() - 1)];
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = hi - invphi * (hi - lo), d = lo + invphi * (hi - lo);
  double fc = worst_over(p, c, ws), fd = worst_over(p, d, ws);
  for (int it = 0; it < 200 && hi - lo > 1e-14; ++it) {
    if (fc <= fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - invphi * (hi - lo);
      fc = worst_over(p, c, ws);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + invphi * (hi - lo);
      fd = worst_over(p, d, ws);
    }
  }
  const double b = 0.5 * (lo + hi);
  const double v = worst_over(p, b, ws);
  if (v < out.value) {
    out.b = b;
    out.value = v;
  }
  return out;
}

std::optional<EstimationOracle> oracle_estimation(const EstimationParams& p, int grid_w) {
  const int n = p.n_steps;
  if (grid_w < 1) throw std::invalid_argument("oracle grid must be positive");
  if (n < 2) return std::nullopt;  // a single increment leaves the mass unconstrained
  const int m = n + 1;

  // velocity v_k = (dy_k - (w_{k+1} - w_k)) / dt as an affine function of w
  const auto velocity = [&](int k) {
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(m);
    row(k + 1) = -1.0 / p.dt;
    row(k) = 1.0 / p.dt;
    return std::make_pair(row, (p.y[k + 1] - p.y[k]) / p.dt);
  };
  const int rows = 1 + (n - 2);
  Eigen::MatrixXd A(rows, m);
  Eigen::VectorXd c(rows);
  const auto [v0, a0] = velocity(0);
  A.row(0) = v0;
  c(0) = p.x20 - a0;
  const auto [v1, a1] = velocity(1);
  for (int k = 1; k <= n - 2; ++k) {
    const auto [vk, ak] = velocity(k);
    const auto [vk1, ak1] = velocity(k + 1);
    // u_0 (v_{k+1} - v_k) = u_k (v_1 - v_0)
    A.row(k) = p.u[0] * (vk1 - vk) - p.u[k] * (v1 - v0);
    c(k) = -(p.u[0] * (ak1 - ak) - p.u[k] * (a1 - a0));
  }
  const Eigen::MatrixXd gram_inv = (A * A.transpose()).inverse();

  const auto grid = p.w_bound > 0.0 ? linspace(-p.w_bound, p.w_bound, grid_w) : std::vector<double>{0.0};
  const std::size_t g = grid.size();
  std::size_t total = 1;
  for (int i = 0; i < m; ++i) total *= g;

  EstimationOracle out;
  out.m_lo = std::numeric_limits<double>::infinity();
  out.m_hi = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd w(m);
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::size_t rest = idx;
    for (int i = 0; i < m; ++i) {
      w(i) = grid[rest % g];
      rest /= g;
    }
    const Eigen::VectorXd proj = w - A.transpose() * (gram_inv * (A * w - c));
    if (proj.cwiseAbs().maxCoeff() > p.w_bound + 1e-12) continue;
    const double dv = v1.dot(proj) + a1 - (v0.dot(proj) + a0);
    const double mass = p.dt * p.u[0] / dv;
    if (!(mass > 0.0) || !std::isfinite(mass)) continue;
    ++out.consistent_points;
    out.m_lo = std::min(out.m_lo, mass);
    out.m_hi = std::max(out.m_hi, mass);
  }
  if (out.consistent_points == 0) return std::nullopt;
  return out;
}

}  // namespace sipred
