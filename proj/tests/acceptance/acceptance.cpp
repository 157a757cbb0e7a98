// Acceptance checks. `acceptance c1 c4` runs the named criteria, no argument
// runs all of them. One PASS/FAIL line per criterion; exit 1 on any FAIL.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "sipred/audit.hpp"
#include "sipred/cli.hpp"
#include "sipred/examples.hpp"
#include "sipred/reduction.hpp"

using namespace sipred;
namespace fs = std::filesystem;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    if (!detail.empty()) detail += "; ";
    detail += (ok ? "" : "!") + what;
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// --- c1 -----------------------------------------------------------------

// One saturation step with theta and w frozen, compiled over zp ++ zm.
struct OneStep {
  std::vector<Tape> eq, ineq;
};

OneStep one_step(const SipProblem& p, double b) {
  const Resolver at = [&](const VarRef& r) {
    switch (r.group) {
      case Group::Theta: return Operand::constant(b);
      case Group::W: return Operand::constant(0.0);
      case Group::Zp: return Operand::at(r.index);
      default: return Operand::at(p.dims.zp + r.index);
    }
  };
  OneStep s;
  for (const Expr& d : p.d) s.eq.push_back(Tape::compile(d, at));
  for (const Expr& e : p.e) s.ineq.push_back(Tape::compile(e, at));
  return s;
}

// For fixed u every smoothed row is linear in its own simplex block, so the
// step is feasible iff some vertex pattern satisfies all rows.
bool feasible_at(const OneStep& s, double x1, double u, double tau) {
  static const int patterns[12][3] = {{0, 2, 4}, {0, 2, 5}, {0, 2, 6}, {0, 3, 4}, {0, 3, 5}, {0, 3, 6},
                                      {1, 2, 4}, {1, 2, 5}, {1, 2, 6}, {1, 3, 4}, {1, 3, 5}, {1, 3, 6}};
  std::vector<double> x(9, 0.0);
  x[0] = x1;
  x[1] = u;
  for (const auto& pat : patterns) {
    std::fill(x.begin() + 2, x.end(), 0.0);
    for (int j : pat) x[2 + static_cast<std::size_t>(j)] = 1.0;
    bool ok = true;
    for (const Tape& t : s.eq) ok = ok && std::abs(t.value(x)) <= tau;
    for (const Tape& t : s.ineq) ok = ok && t.value(x) <= tau;
    if (ok) return true;
  }
  return false;
}

Outcome c1() {
  Outcome out;
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> ux(-3.0, 3.0), ub(0.0, 3.0);
  const double tau = 1e-12;
  int sat_rejected = 0, far_accepted = 0;
  double widest = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    SaturationParams sp;
    sp.n_steps = 1;
    sp.x0 = ux(rng);
    const double b = ub(rng);
    const SipProblem p = build_saturation(sp);
    const OneStep step = one_step(p, b);
    const double want = sat(sp.u_lo, sp.u_hi, -b * sp.x0);
    const auto x1 = [&](double u) { return sp.a * sp.x0 + u; };
    if (!feasible_at(step, x1(want), want, tau)) ++sat_rejected;
    std::vector<double> us;
    for (int k = 0; k <= 1000; ++k) us.push_back(-2.0 + 4.0 * k / 1000);
    for (double c : {want, sp.u_lo, sp.u_hi, -b * sp.x0}) {
      for (double d : {1e-7, 5e-7, 9e-7, 1.1e-6, 2e-6, 1e-5, 1e-3}) {
        us.push_back(c - d);
        us.push_back(c + d);
      }
    }
    for (double u : us) {
      if (!feasible_at(step, x1(u), u, tau)) continue;
      widest = std::max(widest, std::abs(u - want));
      if (std::abs(u - want) > 1e-6) ++far_accepted;
    }
  }
  out.require(sat_rejected == 0, "exact sat infeasible in " + std::to_string(sat_rejected) + "/1000");
  out.require(far_accepted == 0, std::to_string(far_accepted) + " feasible u off sat by > 1e-6, widest " +
                                     fmt("%.3g", widest));

  const SipProblem obstacle = build_obstacle();
  std::uniform_real_distribution<double> uy(-1.5, 1.5);
  std::gamma_distribution<double> g1(1.0);
  double vertex_err = 0.0, hull_err = 0.0;
  int disagree = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> zp(15);
    for (double& v : zp) v = uy(rng);
    const std::size_t k = static_cast<std::size_t>(trial % 5);
    const double* y = &zp[3 * k];
    const double t[3] = {1.0 - y[0] * y[0] - y[1] * y[1], 1.0 - y[2], y[2] + 1.0};
    const double tmin = std::min({t[0], t[1], t[2]});
    const std::vector<double> theta(15, 0.0), w(15, 0.0);
    double simplex_min = kInf;
    for (int v = 0; v < 3; ++v) {
      Witness z{zp, {}, std::vector<double>(15, 0.0)};
      z.s[3 * k + static_cast<std::size_t>(v)] = 1.0;
      const double gv = eval(obstacle.g[k], make_bindings(theta, w, z));
      vertex_err = std::max(vertex_err, std::abs(gv - t[v]));
      simplex_min = std::min(simplex_min, gv);
    }
    for (int j = 0; j < 100; ++j) {
      const double a = g1(rng), b = g1(rng), c = g1(rng);
      Witness z{zp, {}, std::vector<double>(15, 0.0)};
      z.s[3 * k] = a / (a + b + c);
      z.s[3 * k + 1] = b / (a + b + c);
      z.s[3 * k + 2] = c / (a + b + c);
      const double gv = eval(obstacle.g[k], make_bindings(theta, w, z));
      hull_err = std::max(hull_err, tmin - gv);
      simplex_min = std::min(simplex_min, gv);
    }
    if ((simplex_min <= 0.0) != (tmin <= 0.0)) ++disagree;
  }
  out.require(vertex_err <= 1e-9, "vertex error " + fmt("%.3g", vertex_err));
  out.require(hull_err <= 1e-9, "below-min " + fmt("%.3g", hull_err));
  out.require(disagree == 0, "disjunction mismatches " + std::to_string(disagree));
  return out;
}

// --- c2 -----------------------------------------------------------------

Bindings random_point(const SipProblem& p, std::mt19937_64& rng) {
  const auto box = [&](const std::vector<double>& lo, const std::vector<double>& hi) {
    std::vector<double> v(lo.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double a = std::isfinite(lo[i]) ? lo[i] : -3.0, b = std::isfinite(hi[i]) ? hi[i] : 3.0;
      v[i] = std::uniform_real_distribution<double>(a, b)(rng);
    }
    return v;
  };
  Witness z;
  z.zp = box(std::vector<double>(p.dims.zp, -3.0), std::vector<double>(p.dims.zp, 3.0));
  z.zm = box(std::vector<double>(p.dims.zm, 0.0), std::vector<double>(p.dims.zm, 1.0));
  z.s = box(p.s_lo, p.s_hi);
  const double gamma = std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
  return make_bindings(box(p.theta_lo, p.theta_hi), box(p.w_lo, p.w_hi), z, gamma);
}

Outcome c2() {
  Outcome out;
  std::mt19937_64 rng(202);
  std::size_t checked = 0, bad = 0;
  double worst = 0.0;
  for (const char* name : {"obstacle", "saturation", "estimation"}) {
    const SipProblem p = build_example(name);
    std::vector<Expr> all{p.f};
    for (const auto* rows : {&p.g, &p.d, &p.e, &p.q, &p.r}) all.insert(all.end(), rows->begin(), rows->end());
    for (const Expr& e : all) {
      for (int trial = 0; trial < 20; ++trial) {
        const Bindings b = random_point(p, rng);
        for (Group g : {Group::Theta, Group::W, Group::Zp, Group::Zm, Group::S, Group::Gamma}) {
          const auto grad = gradient(e, b, g);
          for (std::size_t i = 0; i < grad.size(); ++i) {
            const double h = 1e-6 * std::max(1.0, std::abs(b[g][i]));
            Bindings bp = b, bm = b;
            bp[g][i] += h;
            bm[g][i] -= h;
            const double fd = (eval(e, bp) - eval(e, bm)) / (2 * h);
            const double rel = std::abs(grad[i] - fd) / std::max(1.0, std::abs(fd));
            worst = std::max(worst, rel);
            ++checked;
            if (rel > 1e-5) ++bad;
          }
        }
      }
    }
  }
  out.require(bad == 0, std::to_string(bad) + "/" + std::to_string(checked) + " partials off, worst rel " +
                            fmt("%.3g", worst));
  return out;
}

// --- example runs -------------------------------------------------------

ReductionOptions run_options(const std::string& name) {
  ReductionOptions o;
  if (name == "saturation") {
    // the optimum's margin is O(1e-7), below the default violation tolerance
    o.tol_viol = 1e-9;
    o.tol_inner = 1e-10;
    o.nlp.max_inner_iter = 5000;
  }
  return o;
}

const ReductionReport& solved(const std::string& name) {
  static std::map<std::string, ReductionReport> cache;
  auto it = cache.find(name);
  if (it == cache.end()) it = cache.emplace(name, run(build_example(name), run_options(name))).first;
  return it->second;
}

std::string summary(const ReductionReport& r) {
  return std::string(to_string(r.status)) + ", gamma " + fmt("%.6g", r.gamma) + ", " +
         std::to_string(r.scenario_set.size()) + " scenarios";
}

Outcome c3() {
  Outcome out;
  const ReductionReport& r = solved("saturation");
  const SaturationOracle orc = oracle_saturation({}, 2000, 2000);
  out.detail = summary(r) + ", b " + fmt("%.7g", r.theta[0]) + " vs oracle " + fmt("%.7g", orc.b) + "/" +
               fmt("%.7g", orc.value);
  out.require(std::abs(r.theta[0] - orc.b) <= 1e-2, "b within 1e-2");
  const double rel = std::abs(r.gamma - orc.value) / std::abs(orc.value);
  out.require(rel <= 1e-3, "gamma rel err " + fmt("%.3g", rel));
  double near = kInf;
  for (const Scenario& s : r.scenario_set.scenarios) near = std::min(near, std::abs(s.w[0] - 0.2));
  out.require(near <= 1e-3, "nearest scenario to w=+0.2 at " + fmt("%.3g", near));
  return out;
}

Outcome c4() {
  Outcome out;
  const ReductionReport& r = solved("obstacle");
  out.detail = summary(r);
  out.require(r.status == ReductionStatus::Optimal, "optimal");
  out.require(r.scenario_set.size() <= 100, "within 100 scenarios");
  const AuditReport a = monte_carlo(build_obstacle(), r.theta, r.gamma, 100000, 0);
  out.require(a.violations == 0, std::to_string(a.violations) + " obstacle violations in 1e5");
  out.require(a.worst_cost <= r.gamma + 1e-6, "worst cost " + fmt("%.6g", a.worst_cost));
  out.require(r.gamma >= 0.6 && r.gamma <= 0.8, "gamma in [0.6, 0.8]");
  return out;
}

Outcome c5() {
  Outcome out;
  const ReductionReport& r = solved("estimation");
  const auto orc = oracle_estimation({}, 5);
  out.detail = summary(r) + ", [" + fmt("%.7g", r.theta[0]) + ", " + fmt("%.7g", r.theta[1]) + "]";
  out.require(r.status == ReductionStatus::Optimal, "optimal");
  if (!orc) {
    out.require(false, "oracle empty");
    return out;
  }
  out.require(r.theta[0] <= orc->m_lo && r.theta[1] >= orc->m_hi,
              "contains oracle [" + fmt("%.7g", orc->m_lo) + ", " + fmt("%.7g", orc->m_hi) + "]");
  out.require(std::abs(r.theta[0] - orc->m_lo) <= 0.02 * orc->m_lo, "lower within 2%");
  out.require(std::abs(r.theta[1] - orc->m_hi) <= 0.02 * orc->m_hi, "upper within 2%");
  const double width = r.theta[1] - r.theta[0];
  out.require(std::abs(width - 0.067) <= 0.1 * 0.067, "width " + fmt("%.4g", width));
  std::size_t added = 0;
  bool demanded = true;
  for (const Scenario& s : r.scenario_set.scenarios) {
    if (s.origin == Scenario::Origin::Initial) continue;
    ++added;
    demanded = demanded && s.violation_at_creation > run_options("estimation").tol_viol;
  }
  out.require(added >= 2, std::to_string(added) + " added");
  out.require(demanded, "each addition violated");
  return out;
}

Outcome c6() {
  Outcome out;
  int optimal = 0;
  for (const char* name : {"saturation", "obstacle", "estimation"}) {
    const ReductionReport& r = solved(name);
    if (r.status != ReductionStatus::Optimal) {
      out.require(true, std::string(name) + " skipped (" + std::string(to_string(r.status)) + ")");
      continue;
    }
    ++optimal;
    const SipProblem p = build_example(name);
    ReductionOptions o = run_options(name);
    int clean = 0;
    double worst = -kInf;
    for (std::uint64_t seed = 1000; seed < 1010; ++seed) {
      o.rng_seed = seed;
      const double v = certify(p, r, o);
      worst = std::max(worst, v);
      if (v <= 1e-6) ++clean;
    }
    out.require(clean >= 9, std::string(name) + " certified " + std::to_string(clean) + "/10, worst " +
                                fmt("%.3g", worst));
    AuditOptions ao;
    ao.tol_viol = o.tol_viol;
    const AuditReport a = monte_carlo(p, r.theta, r.gamma, 1000000, 77, ao);
    const bool counterexample = a.violations > 0 || a.worst_cost > r.gamma + o.tol_viol;
    out.require(!counterexample, std::string(name) + " 1e6 samples: " + std::to_string(a.violations) +
                                     " violations, margin " + fmt("%.3g", a.margin) + ", " +
                                     std::to_string(a.infeasible_samples) + " unresolved");
  }
  out.require(optimal > 0, std::to_string(optimal) + " optimal runs");
  return out;
}

// --- c7 -----------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

Outcome c7() {
  Outcome out;
  const fs::path root = fs::temp_directory_path() / "sipred_acceptance_c7";
  fs::remove_all(root);
  fs::create_directories(root);
  for (const char* name : {"estimation", "saturation", "obstacle"}) {
    std::ostringstream sink;
    const fs::path prob = root / (std::string(name) + ".json");
    cli::cmd_example(name, prob.string(), sink, sink);
    std::vector<std::string> files[2];
    for (int rep = 0; rep < 2; ++rep) {
      cli::Config c;
      c.seed = 11;
      c.out_dir = (root / (std::string(name) + std::to_string(rep))).string();
      cli::cmd_solve(prob.string(), c, sink, sink);
      const fs::path dir = c.out_dir;
      cli::cmd_validate(prob.string(), (dir / "solution.json").string(), c, sink, sink);
      for (const char* f : {"solution.json", "scenarios.json", "audit.json"}) files[rep].push_back(slurp(dir / f));
    }
    bool same = files[0] == files[1];
    for (const auto& f : files[0]) same = same && !f.empty();
    out.require(same, std::string(name) + " identical");
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> all = {
      {"c1", c1}, {"c2", c2}, {"c3", c3}, {"c4", c4}, {"c5", c5}, {"c6", c6}, {"c7", c7}};
  std::vector<std::string> want(argv + 1, argv + argc);
  if (want.empty()) {
    for (const auto& [id, _] : all) want.push_back(id);
  }
  bool ok = true;
  for (const std::string& id : want) {
    const auto it = std::find_if(all.begin(), all.end(), [&](const auto& c) { return c.first == id; });
    if (it == all.end()) {
      std::printf("FAIL %s unknown criterion\n", id.c_str());
      ok = false;
      continue;
    }
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = it->second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %s %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", id.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
    ok = ok && o.pass;
  }
  return ok ? 0 : 1;
}
