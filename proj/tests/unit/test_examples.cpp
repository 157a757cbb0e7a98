#include <cmath>
#include <random>

#include "doctest.h"
#include "sipred/examples.hpp"
#include "sipred/reduction.hpp"

using namespace sipred;

namespace {

double eval_at(const Expr& e, std::vector<double> theta, std::vector<double> w, std::vector<double> zp,
               std::vector<double> zm = {}, std::vector<double> s = {}) {
  return eval(e, make_bindings(theta, w, Witness{std::move(zp), std::move(zm), std::move(s)}));
}

// zp and zm of the exactly saturated loop, multipliers on the active branch
Witness saturation_witness(const SaturationParams& sp, double b, double w) {
  const std::size_t n = static_cast<std::size_t>(sp.n_steps);
  Witness z;
  z.zp.assign(2 * n, 0.0);
  z.zm.assign(7 * n, 0.0);
  double x = sp.x0;
  for (std::size_t k = 0; k < n; ++k) {
    const double v = -b * x, u = sat(sp.u_lo, sp.u_hi, v);
    double* m = &z.zm[7 * k];
    m[v <= sp.u_hi ? 0 : 1] = 1.0;
    m[v >= sp.u_lo ? 2 : 3] = 1.0;
    m[v >= sp.u_hi ? 4 : (v <= sp.u_lo ? 5 : 6)] = 1.0;
    z.zp[n + k] = u;
    x = (sp.a + w) * x + u;
    z.zp[k] = x;
  }
  return z;
}

}  // namespace

TEST_CASE("dimensions") {
  CHECK(build_obstacle().dims == Dims{15, 15, 15, 0, 15});
  CHECK(build_saturation().dims == Dims{1, 1, 10, 35, 0});
  CHECK(build_estimation().dims == Dims{2, 6, 12, 0, 0});
  CHECK(build_obstacle().g.size() == 5);
  CHECK(build_obstacle().d.size() == 15);
  CHECK(build_saturation().g.empty());
  CHECK_THROWS_AS(build_example("unknown"), std::invalid_argument);
}

TEST_CASE("obstacle: a path through the cylinder violates at the middle step for every s") {
  const SipProblem p = build_obstacle();
  // u = 0.8 along x1 each step: x1 = -2 + 0.8 k, so step 2 sits at (-0.4, 0, 0) and step 3 at (0.4, 0, 0)
  std::vector<double> theta(15, 0.0), zp(15, 0.0);
  for (int k = 0; k < 5; ++k) {
    theta[3 * k] = 0.8;
    zp[3 * k] = -2.0 + 0.8 * (k + 1);
  }
  std::mt19937_64 rng(2);
  std::gamma_distribution<double> g1(1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> s(15, 0.0);
    const double a = g1(rng), b = g1(rng), c = g1(rng);
    s[6] = a / (a + b + c);
    s[7] = b / (a + b + c);
    s[8] = c / (a + b + c);
    CHECK(eval_at(p.g[2], theta, std::vector<double>(15, 0.0), zp, {}, s) > 0.0);
  }
}

TEST_CASE("obstacle: nominal optimal cost is below the reported robust cost") {
  const SipProblem p = build_obstacle();
  ScenarioSet set;
  set.add(std::vector<double>(15, 0.0), Scenario::Origin::Initial, -1, 0.0);
  const MasterProblem mp = build_master(p, set);
  SolverOptions o;
  o.restarts = 5;
  const std::vector<std::vector<double>> extra{mp.start};
  const NlpSolution s = multistart(mp.nlp, o, extra);
  REQUIRE(s.feasible(o.tol_feas));
  CHECK(s.objective_value < 0.714);
}

TEST_CASE("saturation: the unsaturated pattern is feasible at b = 0, w = 0") {
  const SaturationParams sp;
  const SipProblem p = build_saturation(sp);
  const Witness z = saturation_witness(sp, 0.0, 0.0);
  for (int k = 0; k < 5; ++k) {
    CHECK(z.zp[static_cast<std::size_t>(k)] == doctest::Approx(std::pow(1.3, k + 1)));
    const std::vector<double> pattern(z.zm.begin() + 7 * k, z.zm.begin() + 7 * k + 7);
    CHECK(pattern == std::vector<double>{1, 0, 1, 0, 0, 0, 1});
  }
  for (const Expr& d : p.d) CHECK(std::abs(eval(d, make_bindings(std::vector<double>{0.0}, std::vector<double>{0.0}, z))) <= 1e-12);
  for (const Expr& e : p.e) CHECK(eval(e, make_bindings(std::vector<double>{0.0}, std::vector<double>{0.0}, z)) <= 1e-12);
}

TEST_CASE("saturation: exact closed loop satisfies the smoothed model on random inputs") {
  const SaturationParams sp;
  const SipProblem p = build_saturation(sp);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> ub(0.0, 3.0), uw(-0.2, 0.2);
  for (int trial = 0; trial < 500; ++trial) {
    const double b = ub(rng), w = uw(rng);
    const Witness z = saturation_witness(sp, b, w);
    const Bindings bind = make_bindings(std::vector<double>{b}, std::vector<double>{w}, z);
    double worst = 0.0;
    for (const Expr& d : p.d) worst = std::max(worst, std::abs(eval(d, bind)));
    for (const Expr& e : p.e) worst = std::max(worst, eval(e, bind));
    CHECK(worst <= 1e-9);
    CHECK(eval(p.f, bind) == doctest::Approx(std::pow(simulate_saturation(sp, b, w), 2)));
  }
}

TEST_CASE("estimation: noise-free steps imply the masses of the second differences") {
  const EstimationParams ep;
  const SipProblem p = build_estimation(ep);
  // x1 = y, x2_k = y_{k+1} - y_k; the second differences are 0.8, 1.2, 1.0, 1.0
  std::vector<double> zp(12, 0.0);
  for (std::size_t k = 0; k <= 5; ++k) zp[k] = ep.y[k];
  for (std::size_t k = 0; k < 5; ++k) zp[6 + k] = ep.y[k + 1] - ep.y[k];
  zp[11] = zp[10] + 1.0;
  const std::vector<double> secdiff{0.8, 1.2, 1.0, 1.0};
  for (std::size_t k = 1; k < 5; ++k) {
    CHECK(zp[6 + k] - zp[5 + k] == doctest::Approx(secdiff[k - 1]));
    // rows 2(k-1) and 2(k-1)+1 bound the increment x2_k - x2_{k-1}
    const double m = ep.dt * ep.dt * ep.u[k - 1] / secdiff[k - 1];
    const std::vector<double> theta{m, m};
    CHECK(eval_at(p.g[2 * (k - 1)], theta, std::vector<double>(6, 0.0), zp) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(eval_at(p.g[2 * (k - 1) + 1], theta, std::vector<double>(6, 0.0), zp) == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("estimation rejects zero inputs") {
  EstimationParams ep;
  ep.u[2] = 0.0;
  CHECK_THROWS_AS(build_estimation(ep), std::invalid_argument);
}

TEST_CASE("example metadata rebuilds the problem") {
  const SipProblem o = build_obstacle();
  CHECK(build_obstacle(obstacle_params(*o.example)) == o);
  const SipProblem s = build_saturation();
  CHECK(build_saturation(saturation_params(*s.example)) == s);
  const SipProblem e = build_estimation();
  CHECK(build_estimation(estimation_params(*e.example)) == e);
}

TEST_CASE("saturation oracle without noise places the pole at a") {
  SaturationParams sp;
  sp.w_bound = 0.0;
  const SaturationOracle o = oracle_saturation(sp, 300, 100);
  CHECK(o.b == doctest::Approx(1.3).epsilon(1e-2));
  CHECK(o.value <= 1e-8);
}

TEST_CASE("saturation oracle defaults") {
  // reference values from an independent exact-saturation minimax computation
  const SaturationOracle o = oracle_saturation({}, 2000, 2000);
  CHECK(o.b == doctest::Approx(1.3397018).epsilon(1e-5));
  CHECK(o.value == doctest::Approx(1.0898579e-7).epsilon(1e-3));
  CHECK(o.lattice_value >= o.value);
  // both noise extremes bind at the minimiser
  const double plus = std::pow(simulate_saturation({}, o.b, 0.2), 2);
  const double minus = std::pow(simulate_saturation({}, o.b, -0.2), 2);
  CHECK(plus == doctest::Approx(minus).epsilon(1e-2));
}

TEST_CASE("estimation oracle") {
  const auto o = oracle_estimation({}, 5);
  REQUIRE(o);
  CHECK(o->m_lo == doctest::Approx(0.944070).epsilon(1e-5));
  CHECK(o->m_hi == doctest::Approx(1.009330).epsilon(1e-5));
  // one lattice point projects to the least-norm consistent noise (independent least-squares value)
  const auto one = oracle_estimation({}, 1);
  REQUIRE(one);
  CHECK(one->consistent_points == 1);
  CHECK(one->m_lo == doctest::Approx(0.97341513).epsilon(1e-6));
  CHECK(one->m_lo >= o->m_lo);
  CHECK(one->m_hi <= o->m_hi);
  // without noise the data contradict a zero initial velocity
  EstimationParams exact;
  exact.w_bound = 0.0;
  CHECK_FALSE(oracle_estimation(exact, 5));
}
