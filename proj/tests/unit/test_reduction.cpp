#include <array>
#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "sipred/examples.hpp"
#include "sipred/reduction.hpp"

using namespace sipred;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

ScenarioSet zero_set(const SipProblem& p) {
  ScenarioSet set;
  set.add(std::vector<double>(p.dims.w, 0.0), Scenario::Origin::Initial, -1, 0.0);
  return set;
}

NlpSolution solve_master(const MasterProblem& mp, std::uint64_t seed = 0, int restarts = 5) {
  SolverOptions o;
  o.restarts = restarts;
  o.rng_seed = seed;
  const std::vector<std::vector<double>> extra{mp.start};
  return multistart(mp.nlp, o, extra);
}

// Closed-form obstacle trajectory and the smallest of the three obstacle
// terms per step.
struct ObstaclePath {
  std::array<std::array<double, 3>, 6> x;
  double cost = 0.0;
  double worst_g = -kInf;
};

ObstaclePath simulate_obstacle(std::span<const double> u, std::span<const double> w) {
  const ObstacleParams op;
  ObstaclePath path;
  path.x[0] = op.x0;
  for (std::size_t k = 0; k < 5; ++k) {
    for (std::size_t i = 0; i < 3; ++i) {
      path.x[k + 1][i] = path.x[k][i] + u[3 * k + i] + w[3 * k + i];
      path.cost += op.r_diag[i] * u[3 * k + i] * u[3 * k + i];
    }
    const auto& y = path.x[k + 1];
    const double g = std::min({1.0 - y[0] * y[0] - y[1] * y[1], 1.0 - y[2], y[2] + 1.0});
    path.worst_g = std::max(path.worst_g, g);
  }
  for (std::size_t i = 0; i < 3; ++i) path.cost += op.q_diag[i] * std::pow(path.x[5][i] - op.xref[i], 2);
  return path;
}

const SipProblem& tiny() {
  static const SipProblem p = [] {
    SipProblem t;
    t.name = "tiny";
    t.dims = {1, 1, 1, 0, 0};
    t.theta_lo = {-1};
    t.theta_hi = {1};
    t.w_lo = {-1};
    t.w_hi = {1};
    t.f = pow(vars::zp(0), 2);
    t.d = {vars::zp(0) - vars::theta(0) - vars::w(0)};
    t.g = {Expr(-1.0)};
    return t;
  }();
  return p;
}

}  // namespace

TEST_CASE("scenario set ids and dedup") {
  ScenarioSet set;
  set.add({0.0, 0.0}, Scenario::Origin::Initial, -1, 0.0);
  CHECK(set.add({0.1, 0.0}, Scenario::Origin::FObjective, -1, 0.5).id == 1);
  CHECK(set.contains_near(std::vector<double>{0.1 + 1e-7, 0.0}));
  CHECK_FALSE(set.contains_near(std::vector<double>{0.1 + 1e-5, 0.0}));
  CHECK(set.size() == 2);
}

TEST_CASE("options validation") {
  ReductionOptions o;
  o.tol_inner = o.tol_viol;
  CHECK_THROWS_AS(o.check(), std::invalid_argument);
  o = {};
  o.max_scenarios = 0;
  CHECK_THROWS_AS(o.check(), std::invalid_argument);
}

TEST_CASE("saturation master size with one scenario") {
  const SipProblem p = build_saturation();
  const MasterProblem mp = build_master(p, zero_set(p));
  // b, gamma, 10 trajectory values, 35 smoothing multipliers
  CHECK(mp.nlp.n == 47);
  CHECK(mp.nlp.names.size() == 47);
}

TEST_CASE("master equality count scales with scenarios") {
  const SipProblem p = build_obstacle();
  ScenarioSet set = zero_set(p);
  for (int k = 1; k <= 3; ++k) {
    const MasterProblem mp = build_master(p, set);
    CHECK(mp.nlp.eq.size() == set.size() * (p.d.size() + p.q.size()));
    std::vector<double> w(15, 0.01 * k);
    set.add(w, Scenario::Origin::FObjective, -1, 0.0);
  }
}

TEST_CASE("obstacle master with the zero scenario equals the nominal optimum") {
  const SipProblem p = build_obstacle();
  const NlpSolution master = solve_master(build_master(p, zero_set(p)));
  REQUIRE(master.feasible(1e-7));

  // nominal problem in controls and smoothing weights only, states eliminated
  SipProblem nominal = p;
  Expr cost = 0.0;
  std::vector<Expr> rows;
  {
    const ObstacleParams op;
    std::array<Expr, 3> x{Expr(op.x0[0]), Expr(op.x0[1]), Expr(op.x0[2])};
    for (std::size_t k = 0; k < 5; ++k) {
      for (std::size_t i = 0; i < 3; ++i) {
        x[i] = x[i] + vars::theta(3 * k + i);
        cost = cost + op.r_diag[i] * pow(vars::theta(3 * k + i), 2);
      }
      const std::size_t b = 3 * k;
      rows.push_back(vars::s(b) * (1.0 - pow(x[0], 2) - pow(x[1], 2)) + vars::s(b + 1) * (1.0 - x[2]) +
                     vars::s(b + 2) * (x[2] + 1.0));
    }
    for (std::size_t i = 0; i < 3; ++i) cost = cost + op.q_diag[i] * pow(x[i] - op.xref[i], 2);
  }
  NlpProblem nlp;
  nlp.n = 30;
  nlp.lower = p.theta_lo;
  nlp.upper = p.theta_hi;
  nlp.lower.insert(nlp.lower.end(), p.s_lo.begin(), p.s_lo.end());
  nlp.upper.insert(nlp.upper.end(), p.s_hi.begin(), p.s_hi.end());
  const Resolver at = [](const VarRef& r) {
    return r.group == Group::Theta ? Operand::at(r.index) : Operand::at(15 + r.index);
  };
  nlp.objective = Tape::compile(cost, at);
  for (const Expr& r : rows) nlp.ineq.push_back(Tape::compile(r, at));
  for (const Expr& q : p.q) nlp.eq.push_back(Tape::compile(q, at));
  SolverOptions o;
  o.restarts = 10;
  const NlpSolution direct = multistart(nlp, o);
  REQUIRE(direct.feasible(1e-7));
  CHECK(master.objective_value == doctest::Approx(direct.objective_value).epsilon(1e-4));
}

TEST_CASE("objective adversary at the gamma ceiling finds nothing") {
  const SipProblem p = build_saturation();
  ReductionOptions o;
  o.adversary_restarts = 2;
  const AdversaryResult r = adversary_f(p, std::vector<double>{1.3}, 1e6, o);
  CHECK_FALSE(r.failed);
  CHECK(r.violation < 0.0);
}

TEST_CASE("constant constraint: sigma is the constant after one certification") {
  ReductionOptions o;
  o.adversary_restarts = 2;
  const AdversaryResult r = adversary_g(tiny(), std::vector<double>{0.5}, 0, o);
  CHECK_FALSE(r.failed);
  CHECK(r.violation == doctest::Approx(-1.0).epsilon(1e-6));
  REQUIRE(r.certificate);
  CHECK(r.certificate->inner_set.size() <= 1);
  CHECK(std::abs(r.certificate->inner_gap) <= o.tol_inner);
}

TEST_CASE("obstacle adversaries against the nominal plan") {
  const SipProblem p = build_obstacle();
  const NlpSolution master = solve_master(build_master(p, zero_set(p)));
  REQUIRE(master.feasible(1e-7));
  const SolutionBundle b = MasterLayout{p.dims, 1}.unpack(master.x);

  // random search over the noise box confirms a costlier disturbance exists
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> uw(-0.1, 0.1);
  double worst = -kInf;
  std::vector<double> w(15);
  for (int k = 0; k < 10000; ++k) {
    for (double& v : w) v = uw(rng);
    worst = std::max(worst, simulate_obstacle(b.theta, w).cost);
  }
  CHECK(worst > b.gamma);
  ReductionOptions o;
  const AdversaryResult f = adversary_f(p, b.theta, b.gamma, o);
  CHECK(f.violation > 0.0);
  CHECK(f.violation >= worst - b.gamma - 1e-6);

  // lattice {-0.1, 0, 0.1}^15: the nominal plan grazes the cylinder under some disturbance
  double lattice_worst = -kInf;
  for (long idx = 0; idx < 14348907; ++idx) {
    long rest = idx;
    for (std::size_t j = 0; j < 15; ++j) {
      w[j] = 0.1 * static_cast<double>(rest % 3 - 1);
      rest /= 3;
    }
    lattice_worst = std::max(lattice_worst, simulate_obstacle(b.theta, w).worst_g);
  }
  CHECK(lattice_worst > 0.0);
  double g_worst = -kInf;
  for (std::size_t i = 0; i < p.g.size(); ++i) g_worst = std::max(g_worst, adversary_g(p, b.theta, i, o).violation);
  CHECK(g_worst > 0.0);
}

TEST_CASE("inner minimum over the simplex is the smallest obstacle term") {
  const SipProblem p = build_obstacle();
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> ux(-1.5, 1.5);
  SolverOptions o;
  o.restarts = 3;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> zp(15);
    for (double& v : zp) v = ux(rng);
    const std::size_t k = static_cast<std::size_t>(trial % 5);
    const auto m = inner_min(p, k, std::vector<double>(15, 0.0), std::vector<double>(15, 0.0), zp, o);
    REQUIRE(m);
    const double* y = &zp[3 * k];
    const double want = std::min({1.0 - y[0] * y[0] - y[1] * y[1], 1.0 - y[2], y[2] + 1.0});
    CHECK(m->value == doctest::Approx(want).epsilon(1e-5));
  }
}

TEST_CASE("resolved trajectories satisfy the model") {
  const SipProblem p = build_saturation();
  const std::vector<double> theta{1.2}, w{0.1};
  const auto z = resolve_trajectory(p, theta, w, {});
  REQUIRE(z);
  const Bindings b = make_bindings(theta, w, *z);
  for (const Expr& d : p.d) CHECK(std::abs(eval(d, b)) <= 1e-6);
  for (const Expr& e : p.e) CHECK(eval(e, b) <= 1e-6);
}

TEST_CASE("estimation run: two added scenarios, witnesses can be dropped") {
  const SipProblem p = build_estimation();
  ReductionOptions o;
  const ReductionReport r = run(p, o);
  CHECK(r.status == ReductionStatus::Optimal);
  CHECK(r.scenario_set.size() == 3);
  CHECK(r.scenario_set.scenarios[0].origin == Scenario::Origin::Initial);
  CHECK(r.theta[0] == doctest::Approx(0.9433962).epsilon(1e-4));
  CHECK(r.theta[1] == doctest::Approx(1.0101010).epsilon(1e-4));
  for (const auto& a : r.last_pass) CHECK(a.violation <= o.tol_viol);

  // every witness satisfies its scenario's model rows
  for (std::size_t i = 0; i < r.scenario_set.size(); ++i) {
    const Bindings b = make_bindings(r.theta, r.scenario_set.scenarios[i].w, r.bundle.witnesses[i]);
    for (const Expr& d : p.d) CHECK(std::abs(eval(d, b)) <= 1e-6);
  }

  // re-solve from scratch at the final scenarios
  ScenarioSet bare;
  for (const Scenario& s : r.scenario_set.scenarios) bare.add(s.w, s.origin, s.g_index, s.violation_at_creation);
  int agree = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const NlpSolution s = solve_master(build_master(p, bare), seed, 2);
    if (s.feasible(1e-7) && std::abs(s.objective_value - r.gamma) <= 1e-4 * std::abs(r.gamma)) ++agree;
  }
  CHECK(agree >= 9);
}
