#include "sipred/examples.hpp"

#include <stdexcept>

namespace sipred {

using namespace vars;

namespace {

std::vector<double> filled(std::size_t n, double v) { return std::vector<double>(n, v); }

std::vector<double> vec(const std::array<double, 3>& a) { return {a.begin(), a.end()}; }

const std::vector<double>& param(const ExampleMeta& m, const char* key) {
  const auto it = m.params.find(key);
  if (it == m.params.end()) throw std::invalid_argument(std::string("example parameter missing: ") + key);
  return it->second;
}

double scalar(const ExampleMeta& m, const char* key) {
  const auto& v = param(m, key);
  if (v.size() != 1) throw std::invalid_argument(std::string("example parameter not scalar: ") + key);
  return v[0];
}

std::array<double, 3> triple(const ExampleMeta& m, const char* key) {
  const auto& v = param(m, key);
  if (v.size() != 3) throw std::invalid_argument(std::string("example parameter needs 3 values: ") + key);
  return {v[0], v[1], v[2]};
}

}  // namespace

SipProblem build_obstacle(const ObstacleParams& p) {
  if (p.n_steps < 1 || !(p.u_bound > 0.0) || !(p.w_bound > 0.0)) {
    throw std::invalid_argument("obstacle: need n_steps >= 1 and positive bounds");
  }
  const std::size_t n = static_cast<std::size_t>(p.n_steps);
  SipProblem sp;
  sp.name = "obstacle";
  sp.dims = {3 * n, 3 * n, 3 * n, 0, 3 * n};
  sp.theta_lo = filled(3 * n, -p.u_bound);
  sp.theta_hi = filled(3 * n, p.u_bound);
  sp.w_lo = filled(3 * n, -p.w_bound);
  sp.w_hi = filled(3 * n, p.w_bound);
  sp.s_lo = filled(3 * n, 0.0);
  sp.s_hi = filled(3 * n, 1.0);

  // zp[3k + i] is coordinate i after step k; the initial state is a constant.
  const auto state = [&](std::size_t k, std::size_t i) -> Expr {
    return k == 0 ? Expr(p.x0[i]) : zp(3 * (k - 1) + i);
  };
  Expr f = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < 3; ++i) {
      const std::size_t j = 3 * k + i;
      f = f + p.r_diag[i] * pow(theta(j), 2);
      sp.d.push_back(zp(j) - (state(k, i) + theta(j) + w(j)));
    }
  }
  for (std::size_t i = 0; i < 3; ++i) f = f + p.q_diag[i] * pow(state(n, i) - p.xref[i], 2);
  sp.f = f;

  for (std::size_t k = 1; k <= n; ++k) {
    const std::size_t b = 3 * (k - 1);
    const Expr x1 = state(k, 0), x2 = state(k, 1), x3 = state(k, 2);
    sp.g.push_back(s(b) * (1.0 - pow(x1, 2) - pow(x2, 2)) + s(b + 1) * (1.0 - x3) +
                   s(b + 2) * (x3 + 1.0));
    sp.q.push_back(s(b) + s(b + 1) + s(b + 2) - 1.0);
  }
  for (std::size_t j = 0; j < 3 * n; ++j) sp.r.push_back(-s(j));

  sp.example = ExampleMeta{"obstacle",
                           {{"n_steps", {double(p.n_steps)}},
                            {"x0", vec(p.x0)},
                            {"xref", vec(p.xref)},
                            {"q_diag", vec(p.q_diag)},
                            {"r_diag", vec(p.r_diag)},
                            {"u_bound", {p.u_bound}},
                            {"w_bound", {p.w_bound}}}};
  return sp;
}

SipProblem build_saturation(const SaturationParams& p) {
  if (p.n_steps < 1 || !(p.a > 1.0) || !(p.u_lo < p.u_hi) || !(p.w_bound >= 0.0) ||
      !(p.b_lo <= p.b_hi)) {
    throw std::invalid_argument("saturation: need n_steps >= 1, a > 1, u_lo < u_hi");
  }
  const std::size_t n = static_cast<std::size_t>(p.n_steps);
  SipProblem sp;
  sp.name = "saturation";
  sp.dims = {1, 1, 2 * n, 7 * n, 0};
  sp.theta_lo = {p.b_lo};
  sp.theta_hi = {p.b_hi};
  sp.w_lo = {-p.w_bound};
  sp.w_hi = {p.w_bound};

  // zp[k - 1] = x_k for k = 1..n, zp[n + k] = u_k for k = 0..n-1
  const auto x = [&](std::size_t k) -> Expr { return k == 0 ? Expr(p.x0) : zp(k - 1); };
  const auto u = [&](std::size_t k) { return zp(n + k); };
  const Expr b = theta(0);
  for (std::size_t k = 0; k < n; ++k) sp.d.push_back(x(k + 1) - ((p.a + w(0)) * x(k) + u(k)));
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t z = 7 * k;
    sp.d.push_back(zm(z) + zm(z + 1) - 1.0);
    sp.d.push_back(zm(z + 2) + zm(z + 3) - 1.0);
    sp.d.push_back(zm(z + 4) + zm(z + 5) + zm(z + 6) - 1.0);
  }
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t z = 7 * k;
    const Expr bx = b * x(k);
    sp.e.push_back(zm(z) * (-bx - p.u_hi) + zm(z + 1) * pow(u(k) - p.u_hi, 2));
    sp.e.push_back(zm(z + 2) * (bx + p.u_lo) + zm(z + 3) * pow(u(k) - p.u_lo, 2));
    sp.e.push_back(zm(z + 4) * (bx + p.u_hi) + zm(z + 5) * (-bx - p.u_lo) +
                   zm(z + 6) * pow(u(k) + bx, 2));
  }
  for (std::size_t j = 0; j < 7 * n; ++j) sp.e.push_back(-zm(j));
  sp.f = pow(x(n), 2);

  sp.example = ExampleMeta{"saturation",
                           {{"n_steps", {double(p.n_steps)}},
                            {"a", {p.a}},
                            {"w_bound", {p.w_bound}},
                            {"x0", {p.x0}},
                            {"u_lo", {p.u_lo}},
                            {"u_hi", {p.u_hi}},
                            {"b_lo", {p.b_lo}},
                            {"b_hi", {p.b_hi}}}};
  return sp;
}

SipProblem build_estimation(const EstimationParams& p) {
  const std::size_t n = static_cast<std::size_t>(std::max(p.n_steps, 0));
  if (p.n_steps < 1 || p.y.size() != n + 1 || p.u.size() != n) {
    throw std::invalid_argument("estimation: need |y| = n_steps + 1 and |u| = n_steps");
  }
  for (double uk : p.u) {
    if (uk == 0.0) throw std::invalid_argument("estimation: inputs must be nonzero");
  }
  if (!(p.dt > 0.0) || !(p.m_lo > 0.0) || !(p.m_lo < p.m_hi) || !(p.w_bound >= 0.0)) {
    throw std::invalid_argument("estimation: need dt > 0 and 0 < m_lo < m_hi");
  }
  SipProblem sp;
  sp.name = "estimation";
  sp.dims = {2, n + 1, 2 * (n + 1), 0, 0};
  sp.theta_lo = {p.m_lo, p.m_lo};
  sp.theta_hi = {p.m_hi, p.m_hi};
  sp.w_lo = filled(n + 1, -p.w_bound);
  sp.w_hi = filled(n + 1, p.w_bound);

  const auto x1 = [](std::size_t k) { return zp(k); };
  const auto x2 = [&](std::size_t k) { return zp(n + 1 + k); };
  for (std::size_t k = 0; k <= n; ++k) sp.d.push_back(x1(k) + w(k) - p.y[k]);
  for (std::size_t k = 0; k < n; ++k) sp.d.push_back(x1(k + 1) - x1(k) - p.dt * x2(k));
  sp.d.push_back(x2(0) - p.x20);
  // one mass for the whole record: every velocity increment scales with its input
  for (std::size_t k = 1; k < n; ++k) {
    sp.d.push_back(p.u[0] * (x2(k + 1) - x2(k)) - p.u[k] * (x2(1) - x2(0)));
  }

  const Expr m_lo = theta(0), m_hi = theta(1);
  for (std::size_t k = 0; k < n; ++k) {
    const double sign = p.u[k] > 0.0 ? 1.0 : -1.0;
    const Expr dv = x2(k + 1) - x2(k);
    sp.g.push_back(sign * (p.dt * p.u[k] - m_hi * dv));
    sp.g.push_back(sign * (m_lo * dv - p.dt * p.u[k]));
  }
  sp.f = m_hi - m_lo;

  sp.example = ExampleMeta{"estimation",
                           {{"n_steps", {double(p.n_steps)}},
                            {"y", p.y},
                            {"u", p.u},
                            {"dt", {p.dt}},
                            {"w_bound", {p.w_bound}},
                            {"x20", {p.x20}},
                            {"m_lo", {p.m_lo}},
                            {"m_hi", {p.m_hi}}}};
  return sp;
}

SipProblem build_example(const std::string& name) {
  if (name == "obstacle") return build_obstacle();
  if (name == "saturation") return build_saturation();
  if (name == "estimation") return build_estimation();
  throw std::invalid_argument("unknown example '" + name + "'");
}

ObstacleParams obstacle_params(const ExampleMeta& m) {
  ObstacleParams p;
  p.n_steps = static_cast<int>(scalar(m, "n_steps"));
  p.x0 = triple(m, "x0");
  p.xref = triple(m, "xref");
  p.q_diag = triple(m, "q_diag");
  p.r_diag = triple(m, "r_diag");
  p.u_bound = scalar(m, "u_bound");
  p.w_bound = scalar(m, "w_bound");
  return p;
}

SaturationParams saturation_params(const ExampleMeta& m) {
  SaturationParams p;
  p.n_steps = static_cast<int>(scalar(m, "n_steps"));
  p.a = scalar(m, "a");
  p.w_bound = scalar(m, "w_bound");
  p.x0 = scalar(m, "x0");
  p.u_lo = scalar(m, "u_lo");
  p.u_hi = scalar(m, "u_hi");
  p.b_lo = scalar(m, "b_lo");
  p.b_hi = scalar(m, "b_hi");
  return p;
}

EstimationParams estimation_params(const ExampleMeta& m) {
  EstimationParams p;
  p.n_steps = static_cast<int>(scalar(m, "n_steps"));
  p.y = param(m, "y");
  p.u = param(m, "u");
  p.dt = scalar(m, "dt");
  p.w_bound = scalar(m, "w_bound");
  p.x20 = scalar(m, "x20");
  p.m_lo = scalar(m, "m_lo");
  p.m_hi = scalar(m, "m_hi");
  return p;
}

}  // namespace sipred
