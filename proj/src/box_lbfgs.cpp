#include "box_lbfgs.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace sipred::detail {

namespace {

struct Pair {
  std::vector<double> s;
  std::vector<double> y;
  double rho;
};

double masked_dot(const std::vector<double>& a, const std::vector<double>& b,
                  const std::vector<char>& free) {
  double r = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (free[i]) r += a[i] * b[i];
  }
  return r;
}

}  // namespace

double projected_gradient_norm(std::span<const double> x, std::span<const double> g,
                               std::span<const double> lo, std::span<const double> hi) {
  double r = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double p = std::clamp(x[i] - g[i], lo[i], hi[i]) - x[i];
    r = std::max(r, std::abs(p));
  }
  return r;
}

BoxLbfgsResult minimize_box(const SmoothFn& fn, std::vector<double>& x,
                            std::span<const double> lo, std::span<const double> hi,
                            const BoxLbfgsOptions& opts) {
  const std::size_t n = x.size();
  for (std::size_t i = 0; i < n; ++i) x[i] = std::clamp(x[i], lo[i], hi[i]);

  std::vector<double> g(n), gn(n), xn(n), d(n), q(n);
  std::vector<char> free(n);
  std::deque<Pair> mem;
  std::vector<double> alpha_hist;

  BoxLbfgsResult res;
  double f = fn(x, g);
  if (!std::isfinite(f)) {
    res.value = f;
    res.pg_norm = std::numeric_limits<double>::infinity();
    return res;
  }

  constexpr double kArmijo = 1e-4;
  int stall = 0;
  for (int it = 0; it < opts.max_iter; ++it) {
    res.pg_norm = projected_gradient_norm(x, g, lo, hi);
    if (res.pg_norm <= opts.tol_pg) {
      res.converged = true;
      break;
    }
    for (std::size_t i = 0; i < n; ++i) {
      const bool at_lo = x[i] <= lo[i] && g[i] > 0.0;
      const bool at_hi = x[i] >= hi[i] && g[i] < 0.0;
      free[i] = !(at_lo || at_hi);
    }

    // two-loop recursion restricted to the free variables
    for (std::size_t i = 0; i < n; ++i) q[i] = free[i] ? g[i] : 0.0;
    alpha_hist.assign(mem.size(), 0.0);
    for (std::size_t j = mem.size(); j-- > 0;) {
      alpha_hist[j] = mem[j].rho * masked_dot(mem[j].s, q, free);
      for (std::size_t i = 0; i < n; ++i) {
        if (free[i]) q[i] -= alpha_hist[j] * mem[j].y[i];
      }
    }
    double scale = 1.0;
    if (!mem.empty()) {
      const Pair& last = mem.back();
      double yy = 0.0;
      for (double v : last.y) yy += v * v;
      scale = yy > 0.0 ? 1.0 / (last.rho * yy) : 1.0;
    }
    for (std::size_t i = 0; i < n; ++i) q[i] *= scale;
    for (std::size_t j = 0; j < mem.size(); ++j) {
      const double beta = mem[j].rho * masked_dot(mem[j].y, q, free);
      for (std::size_t i = 0; i < n; ++i) {
        if (free[i]) q[i] += mem[j].s[i] * (alpha_hist[j] - beta);
      }
    }
    double gd = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d[i] = free[i] ? -q[i] : 0.0;
      gd += g[i] * d[i];
    }
    if (!(gd < 0.0)) {
      // the quasi-Newton model went bad: fall back to steepest descent
      mem.clear();
      gd = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        d[i] = free[i] ? -g[i] : 0.0;
        gd += g[i] * d[i];
      }
    }

    double step = 1.0;
    if (mem.empty()) {
      double dmax = 0.0;
      for (double v : d) dmax = std::max(dmax, std::abs(v));
      if (dmax > 1.0) step = 1.0 / dmax;
    }

    bool accepted = false;
    double fn_val = f;
    for (int ls = 0; ls < 60; ++ls) {
      double moved = 0.0;
      double decrease = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        xn[i] = std::clamp(x[i] + step * d[i], lo[i], hi[i]);
        moved = std::max(moved, std::abs(xn[i] - x[i]));
        decrease += g[i] * (xn[i] - x[i]);
      }
      if (moved == 0.0) break;
      fn_val = fn(xn, gn);
      if (std::isfinite(fn_val) && fn_val <= f + kArmijo * decrease) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    ++res.iterations;
    if (!accepted) {
      if (mem.empty()) break;  // steepest descent cannot make progress either
      mem.clear();
      continue;
    }

    Pair p{std::vector<double>(n), std::vector<double>(n), 0.0};
    double sy = 0.0, yy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      p.s[i] = xn[i] - x[i];
      p.y[i] = gn[i] - g[i];
      sy += p.s[i] * p.y[i];
      yy += p.y[i] * p.y[i];
    }
    if (sy > 1e-12 * yy && sy > 0.0) {
      p.rho = 1.0 / sy;
      mem.push_back(std::move(p));
      if (static_cast<int>(mem.size()) > opts.memory) mem.pop_front();
    }

    const double df = f - fn_val;
    x.swap(xn);
    g.swap(gn);
    f = fn_val;
    stall = df <= 1e-16 * std::max(1.0, std::abs(f)) ? stall + 1 : 0;
    if (stall >= 5) break;
  }
  res.value = f;
  res.pg_norm = projected_gradient_norm(x, g, lo, hi);
  res.converged = res.pg_norm <= opts.tol_pg;
  return res;
}

}  // namespace sipred::detail
