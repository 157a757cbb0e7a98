#include "sipred/reduction.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace sipred {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Where each group lives while compiling one program: a slot offset into the
// decision vector, or frozen values.
struct SlotMap {
  std::array<std::optional<std::size_t>, kGroupCount> offset;
  std::array<std::vector<double>, kGroupCount> frozen;

  void place(Group g, std::size_t at) { offset[static_cast<std::size_t>(g)] = at; }
  void freeze(Group g, std::span<const double> v) {
    frozen[static_cast<std::size_t>(g)].assign(v.begin(), v.end());
  }

  Tape compile(const Expr& e) const {
    return Tape::compile(e, [this](const VarRef& r) {
      const auto g = static_cast<std::size_t>(r.group);
      if (offset[g]) return Operand::at(*offset[g] + r.index);
      return Operand::constant(frozen[g].at(r.index));
    });
  }
};

std::vector<double> clipped_zero(const std::vector<double>& lo, const std::vector<double>& hi) {
  std::vector<double> x(lo.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(0.0, lo[i], hi[i]);
  return x;
}

// Midpoint of finite boxes, clipped zero otherwise. Used as the first parameter
// guess: box edges of the examples are often degenerate points of the smoothing.
std::vector<double> box_middle(const std::vector<double>& lo, const std::vector<double>& hi) {
  std::vector<double> x = clipped_zero(lo, hi);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (std::isfinite(lo[i]) && std::isfinite(hi[i])) x[i] = 0.5 * (lo[i] + hi[i]);
  }
  return x;
}

std::vector<double> uniform_in(const std::vector<double>& lo, const std::vector<double>& hi,
                               std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> x(lo.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = lo[i] + (hi[i] - lo[i]) * unit(rng);
  return x;
}

bool depends_on(const Expr& e, Group g) {
  for (const VarRef& v : variables(e)) {
    if (v.group == g) return true;
  }
  return false;
}

double linf(std::span<const double> a, std::span<const double> b) {
  double r = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) r = std::max(r, std::abs(a[i] - b[i]));
  return r;
}

std::vector<std::string> repeat_names(const char* group, std::size_t n, const std::string& suffix = "") {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(std::string(group) + "[" + std::to_string(i) + "]" + suffix);
  return out;
}

// Trajectory-space program shared by both adversaries: w | zp | zm [| sigma].
struct AdversarySpace {
  const SipProblem& p;
  std::size_t nw, nzp, nzm;
  bool with_sigma;

  std::size_t zp_at() const { return nw; }
  std::size_t zm_at() const { return nw + nzp; }
  std::size_t sigma_at() const { return nw + nzp + nzm; }
  std::size_t size() const { return sigma_at() + (with_sigma ? 1 : 0); }

  SlotMap slots(std::span<const double> theta, double gamma) const {
    SlotMap m;
    m.freeze(Group::Theta, theta);
    const double g[] = {gamma};
    m.freeze(Group::Gamma, g);
    m.place(Group::W, 0);
    m.place(Group::Zp, zp_at());
    m.place(Group::Zm, zm_at());
    if (with_sigma) m.place(Group::Aux, sigma_at());
    return m;
  }

  NlpProblem base(const SlotMap& m, double sigma_bound) const {
    NlpProblem nlp;
    nlp.n = size();
    nlp.lower.assign(nlp.n, -kInf);
    nlp.upper.assign(nlp.n, kInf);
    std::copy(p.w_lo.begin(), p.w_lo.end(), nlp.lower.begin());
    std::copy(p.w_hi.begin(), p.w_hi.end(), nlp.upper.begin());
    if (with_sigma) {
      nlp.lower[sigma_at()] = -sigma_bound;
      nlp.upper[sigma_at()] = sigma_bound;
    }
    for (const Expr& e : p.d) nlp.eq.push_back(m.compile(e));
    for (const Expr& e : p.e) nlp.ineq.push_back(m.compile(e));
    nlp.names = repeat_names("w", nw);
    for (auto& s : repeat_names("zp", nzp)) nlp.names.push_back(s);
    for (auto& s : repeat_names("zm", nzm)) nlp.names.push_back(s);
    if (with_sigma) nlp.names.push_back("sigma");
    return nlp;
  }

  // Random (and hinted) noises, each completed to a trajectory when possible.
  std::vector<std::vector<double>> starts(std::span<const double> theta, const AdversaryHints& hints,
                                          const ReductionOptions& opts) const {
    std::vector<std::vector<double>> ws = hints.w;
    for (int r = 0; r < opts.adversary_restarts; ++r) {
      ws.push_back(uniform_in(p.w_lo, p.w_hi, derive_seed(opts.rng_seed, 7919 + r)));
    }
    SolverOptions inner = opts.nlp;
    inner.restarts = 2;
    std::vector<std::vector<double>> out;
    for (const auto& w : ws) {
      std::vector<double> x(size(), 0.0);
      for (std::size_t i = 0; i < nw; ++i) x[i] = std::clamp(w[i], p.w_lo[i], p.w_hi[i]);
      if (const auto traj = resolve_trajectory(p, theta, std::span(x).first(nw), inner)) {
        std::copy(traj->zp.begin(), traj->zp.end(), x.begin() + zp_at());
        std::copy(traj->zm.begin(), traj->zm.end(), x.begin() + zm_at());
      }
      out.push_back(std::move(x));
    }
    return out;
  }
};

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t k) {
  const auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(seed ^ mix(k));
}

bool ScenarioSet::contains_near(std::span<const double> w) const {
  for (const Scenario& s : scenarios) {
    if (linf(s.w, w) < dedup_radius) return true;
  }
  return false;
}

const Scenario& ScenarioSet::add(std::vector<double> w, Scenario::Origin origin, int g_index,
                                 double violation, Witness hint) {
  Scenario s;
  s.w = std::move(w);
  s.id = static_cast<int>(scenarios.size());
  s.origin = origin;
  s.g_index = g_index;
  s.violation_at_creation = violation;
  scenarios.push_back(std::move(s));
  hints.push_back(std::move(hint));
  return scenarios.back();
}

void ReductionOptions::check() const {
  nlp.check();
  if (!(tol_viol > 0.0) || !(tol_inner > 0.0) || !(tol_inner < tol_viol)) {
    throw std::invalid_argument("need 0 < tol_inner < tol_viol");
  }
  if (max_scenarios < 1) throw std::invalid_argument("max_scenarios must be at least 1");
  if (max_outer < 1 || adversary_restarts < 1 || master_restarts < 1 || inner_budget < 1) {
    throw std::invalid_argument("iteration and restart counts must be positive");
  }
  if (!(dedup_radius >= 0.0) || !(sigma_bound > 0.0)) throw std::invalid_argument("bad radius or sigma bound");
}

std::vector<double> MasterLayout::pack(const SolutionBundle& b) const {
  std::vector<double> x(size(), 0.0);
  std::copy(b.theta.begin(), b.theta.end(), x.begin());
  x[gamma_slot()] = b.gamma;
  for (std::size_t i = 0; i < scenarios && i < b.witnesses.size(); ++i) {
    const Witness& w = b.witnesses[i];
    auto at = x.begin() + static_cast<std::ptrdiff_t>(block_start(i));
    at = std::copy(w.zp.begin(), w.zp.end(), at);
    at = std::copy(w.zm.begin(), w.zm.end(), at);
    std::copy(w.s.begin(), w.s.end(), at);
  }
  return x;
}

SolutionBundle MasterLayout::unpack(std::span<const double> x) const {
  SolutionBundle b;
  b.theta.assign(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(dims.theta));
  b.gamma = x[gamma_slot()];
  for (std::size_t i = 0; i < scenarios; ++i) {
    const auto at = x.subspan(block_start(i));
    Witness w;
    w.zp.assign(at.begin(), at.begin() + static_cast<std::ptrdiff_t>(dims.zp));
    w.zm.assign(at.begin() + static_cast<std::ptrdiff_t>(dims.zp),
                at.begin() + static_cast<std::ptrdiff_t>(dims.zp + dims.zm));
    w.s.assign(at.begin() + static_cast<std::ptrdiff_t>(dims.zp + dims.zm),
               at.begin() + static_cast<std::ptrdiff_t>(block()));
    b.witnesses.push_back(std::move(w));
  }
  return b;
}

MasterProblem build_master(const SipProblem& p, const ScenarioSet& set,
                           const std::optional<SolutionBundle>& warm, std::span<const double> s_start) {
  if (set.size() == 0) throw std::invalid_argument("master needs at least one scenario");
  MasterProblem mp;
  mp.layout = {p.dims, set.size()};
  const MasterLayout& L = mp.layout;
  NlpProblem& nlp = mp.nlp;
  nlp.n = L.size();
  nlp.lower.assign(nlp.n, -kInf);
  nlp.upper.assign(nlp.n, kInf);
  std::copy(p.theta_lo.begin(), p.theta_lo.end(), nlp.lower.begin());
  std::copy(p.theta_hi.begin(), p.theta_hi.end(), nlp.upper.begin());
  nlp.lower[L.gamma_slot()] = p.gamma_lo;
  nlp.upper[L.gamma_slot()] = p.gamma_hi;
  nlp.names = repeat_names("theta", p.dims.theta);
  nlp.names.push_back("gamma");

  SlotMap top;
  top.place(Group::Theta, 0);
  top.place(Group::Gamma, L.gamma_slot());
  nlp.objective = top.compile(vars::gamma());

  for (std::size_t i = 0; i < set.size(); ++i) {
    const std::size_t at = L.block_start(i);
    const std::size_t s_at = at + p.dims.zp + p.dims.zm;
    for (std::size_t j = 0; j < p.dims.s; ++j) {
      nlp.lower[s_at + j] = p.s_lo[j];
      nlp.upper[s_at + j] = p.s_hi[j];
    }
    const std::string tag = "@" + std::to_string(i);
    for (auto& s : repeat_names("zp", p.dims.zp, tag)) nlp.names.push_back(s);
    for (auto& s : repeat_names("zm", p.dims.zm, tag)) nlp.names.push_back(s);
    for (auto& s : repeat_names("s", p.dims.s, tag)) nlp.names.push_back(s);

    SlotMap m = top;
    m.freeze(Group::W, set.scenarios[i].w);
    m.place(Group::Zp, at);
    m.place(Group::Zm, at + p.dims.zp);
    m.place(Group::S, s_at);
    for (const Expr& e : p.g) nlp.ineq.push_back(m.compile(e));
    nlp.ineq.push_back(m.compile(p.f - vars::gamma()));
    for (const Expr& e : p.d) nlp.eq.push_back(m.compile(e));
    for (const Expr& e : p.e) nlp.ineq.push_back(m.compile(e));
    for (const Expr& e : p.q) nlp.eq.push_back(m.compile(e));
    for (const Expr& e : p.r) nlp.ineq.push_back(m.compile(e));
  }

  // start: prior witnesses where they exist, adversary hints for new scenarios
  SolutionBundle start;
  start.theta = warm ? warm->theta : box_middle(p.theta_lo, p.theta_hi);
  std::vector<double> s0(s_start.begin(), s_start.end());
  if (s0.size() != p.dims.s) {
    s0.assign(p.dims.s, 0.0);
    for (std::size_t j = 0; j < p.dims.s; ++j) s0[j] = 0.5 * (p.s_lo[j] + p.s_hi[j]);
  }
  double gamma = warm ? warm->gamma : -kInf;
  for (std::size_t i = 0; i < set.size(); ++i) {
    Witness w;
    if (warm && i < warm->witnesses.size()) {
      w = warm->witnesses[i];
    } else {
      if (i < set.hints.size()) w = set.hints[i];
      w.zp.resize(p.dims.zp, 0.0);
      w.zm.resize(p.dims.zm, 0.0);
      if (w.s.size() != p.dims.s) w.s = s0;
    }
    const double fi = eval(p.f, make_bindings(start.theta, set.scenarios[i].w, w));
    if (std::isfinite(fi)) gamma = std::max(gamma, fi);
    start.witnesses.push_back(std::move(w));
  }
  start.gamma = std::clamp(std::isfinite(gamma) ? gamma : 0.0, p.gamma_lo, p.gamma_hi);
  mp.start = L.pack(start);
  return mp;
}

std::optional<Witness> resolve_trajectory(const SipProblem& p, std::span<const double> theta,
                                          std::span<const double> w, const SolverOptions& opts,
                                          const Witness* start) {
  const std::size_t n = p.dims.zp + p.dims.zm;
  SlotMap m;
  m.freeze(Group::Theta, theta);
  m.freeze(Group::W, w);
  m.place(Group::Zp, 0);
  m.place(Group::Zm, p.dims.zp);
  if (n == 0) {
    // nothing to solve for; d and e are constants
    for (const Expr& e : p.d) {
      if (std::abs(m.compile(e).value({})) > opts.tol_feas) return std::nullopt;
    }
    for (const Expr& e : p.e) {
      if (m.compile(e).value({}) > opts.tol_feas) return std::nullopt;
    }
    return Witness{};
  }
  NlpProblem nlp;
  nlp.n = n;
  nlp.lower.assign(n, -kInf);
  nlp.upper.assign(n, kInf);
  nlp.objective = m.compile(Expr(0.0));
  for (const Expr& e : p.d) nlp.eq.push_back(m.compile(e));
  for (const Expr& e : p.e) nlp.ineq.push_back(m.compile(e));

  std::vector<double> x0(n, 0.0);
  if (start) {
    std::copy(start->zp.begin(), start->zp.end(), x0.begin());
    std::copy(start->zm.begin(), start->zm.end(), x0.begin() + static_cast<std::ptrdiff_t>(p.dims.zp));
  }
  NlpSolution sol = solve(nlp, opts, x0);
  if (!sol.feasible(opts.tol_feas)) {
    const std::vector<std::vector<double>> extra{x0};
    sol = multistart(nlp, opts, extra);
  }
  if (!sol.feasible(opts.tol_feas)) return std::nullopt;
  Witness out;
  out.zp.assign(sol.x.begin(), sol.x.begin() + static_cast<std::ptrdiff_t>(p.dims.zp));
  out.zm.assign(sol.x.begin() + static_cast<std::ptrdiff_t>(p.dims.zp), sol.x.end());
  return out;
}

std::vector<double> feasible_s_center(const SipProblem& p, const SolverOptions& opts) {
  const std::size_t n = p.dims.s;
  if (n == 0) return {};
  std::vector<double> c(n);
  for (std::size_t j = 0; j < n; ++j) c[j] = 0.5 * (p.s_lo[j] + p.s_hi[j]);
  SlotMap m;
  m.place(Group::S, 0);
  NlpProblem nlp;
  nlp.n = n;
  nlp.lower = p.s_lo;
  nlp.upper = p.s_hi;
  Expr dist = 0.0;
  for (std::size_t j = 0; j < n; ++j) dist = dist + pow(vars::s(j) - c[j], 2);
  nlp.objective = m.compile(dist);
  for (const Expr& e : p.q) nlp.eq.push_back(m.compile(e));
  for (const Expr& e : p.r) nlp.ineq.push_back(m.compile(e));
  const std::vector<std::vector<double>> extra{c};
  const NlpSolution sol = multistart(nlp, opts, extra);
  return sol.x;
}

std::optional<InnerMin> inner_min(const SipProblem& p, std::size_t i, std::span<const double> theta,
                                  std::span<const double> w, std::span<const double> zp,
                                  const SolverOptions& opts) {
  const std::size_t n = p.dims.s;
  SlotMap m;
  m.freeze(Group::Theta, theta);
  m.freeze(Group::W, w);
  m.freeze(Group::Zp, zp);
  if (n == 0) {
    const double v = m.compile(p.g.at(i)).value({});
    if (std::isnan(v)) return std::nullopt;
    return InnerMin{{}, v};
  }
  m.place(Group::S, 0);
  NlpProblem nlp;
  nlp.n = n;
  nlp.lower = p.s_lo;
  nlp.upper = p.s_hi;
  nlp.objective = m.compile(p.g.at(i));
  for (const Expr& e : p.q) nlp.eq.push_back(m.compile(e));
  for (const Expr& e : p.r) nlp.ineq.push_back(m.compile(e));
  std::vector<double> c(n);
  for (std::size_t j = 0; j < n; ++j) c[j] = 0.5 * (p.s_lo[j] + p.s_hi[j]);
  const std::vector<std::vector<double>> extra{c};
  const NlpSolution sol = multistart(nlp, opts, extra);
  if (!sol.feasible(opts.tol_feas)) return std::nullopt;
  return InnerMin{sol.x, sol.objective_value};
}

AdversaryResult adversary_f(const SipProblem& p, std::span<const double> theta, double gamma,
                            const ReductionOptions& opts, const AdversaryHints& hints) {
  const AdversarySpace space{p, p.dims.w, p.dims.zp, p.dims.zm, false};
  const SlotMap m = space.slots(theta, gamma);
  NlpProblem nlp = space.base(m, opts.sigma_bound);
  nlp.objective = m.compile(vars::gamma() - p.f);

  SolverOptions so = opts.nlp;
  so.rng_seed = opts.rng_seed;
  const auto starts = space.starts(theta, hints, opts);
  const NlpSolution sol = solve_from_starts(nlp, so, starts);

  AdversaryResult r;
  r.status = sol.status;
  r.w.assign(sol.x.begin(), sol.x.begin() + static_cast<std::ptrdiff_t>(space.nw));
  r.witness_zp.assign(sol.x.begin() + static_cast<std::ptrdiff_t>(space.zp_at()),
                      sol.x.begin() + static_cast<std::ptrdiff_t>(space.zm_at()));
  r.witness_zm.assign(sol.x.begin() + static_cast<std::ptrdiff_t>(space.zm_at()), sol.x.end());
  r.failed = !sol.feasible(so.tol_feas);
  r.violation = r.failed ? -kInf : -sol.objective_value;
  return r;
}

AdversaryResult adversary_g(const SipProblem& p, std::span<const double> theta, std::size_t i,
                            const ReductionOptions& opts, const AdversaryHints& hints) {
  if (i >= p.g.size()) throw std::out_of_range("constraint index out of range");
  const AdversarySpace space{p, p.dims.w, p.dims.zp, p.dims.zm, true};
  const SlotMap m = space.slots(theta, 0.0);
  const NlpProblem base = space.base(m, opts.sigma_bound);
  const bool uses_s = depends_on(p.g[i], Group::S);

  SolverOptions so = opts.nlp;
  so.rng_seed = opts.rng_seed;
  SolverOptions inner_opts = opts.nlp;
  inner_opts.restarts = opts.adversary_restarts;
  inner_opts.rng_seed = derive_seed(opts.rng_seed, 31);

  AdversaryResult r;
  r.g_index = static_cast<int>(i);
  InnerCertificate cert;
  cert.inner_set.push_back(feasible_s_center(p, inner_opts));

  // row sigma - g_i(s_j) <= 0 for one inner point
  const auto row = [&](const std::vector<double>& sj) {
    SlotMap mj = m;
    mj.freeze(Group::S, sj);
    return mj.compile(vars::aux(0) - p.g[i]);
  };
  NlpProblem nlp = base;
  nlp.objective = m.compile(-vars::aux(0));
  nlp.ineq.push_back(row(cert.inner_set.front()));

  std::vector<std::vector<double>> starts = space.starts(theta, hints, opts);
  double best_certified = -kInf;
  std::optional<std::vector<double>> certified_x;
  for (int round = 0;; ++round) {
    // sigma starts at the smallest inner value so every start is feasible
    for (auto& x : starts) {
      double lo = opts.sigma_bound;
      for (std::size_t j = base.ineq.size(); j < nlp.ineq.size(); ++j) {
        x[space.sigma_at()] = 0.0;
        lo = std::min(lo, -nlp.ineq[j].value(x));
      }
      x[space.sigma_at()] = std::clamp(lo, -opts.sigma_bound, opts.sigma_bound);
    }
    const NlpSolution sol = solve_from_starts(nlp, so, starts);
    r.status = sol.status;
    if (!sol.feasible(so.tol_feas)) {
      r.failed = true;
      break;
    }
    const auto x = std::span<const double>(sol.x);
    const auto w = x.first(space.nw);
    const auto zp = x.subspan(space.zp_at(), space.nzp);
    const double sigma = sol.x[space.sigma_at()];
    const auto im = inner_min(p, i, theta, w, zp, inner_opts);
    if (!im) {
      r.failed = true;
      break;
    }
    if (im->value > best_certified) {
      best_certified = im->value;
      certified_x = sol.x;
    }
    r.w.assign(w.begin(), w.end());
    r.witness_zp.assign(zp.begin(), zp.end());
    r.witness_zm.assign(x.begin() + static_cast<std::ptrdiff_t>(space.zm_at()),
                        x.begin() + static_cast<std::ptrdiff_t>(space.sigma_at()));
    cert.sigma = sigma;
    cert.inner_gap = sigma - im->value;
    r.violation = sigma;

    if (!uses_s || im->value >= sigma - opts.tol_inner) break;
    bool seen = false;
    for (const auto& sj : cert.inner_set) seen = seen || linf(sj, im->s) < 1e-9;
    if (seen) break;  // the minimiser is already enforced; the gap is solver noise
    if (static_cast<int>(cert.inner_set.size()) >= opts.inner_budget) {
      cert.budget_exceeded = true;
      // fall back to the best point whose inner minimum was actually computed
      r.violation = best_certified;
      break;
    }
    cert.inner_set.push_back(im->s);
    nlp.ineq.push_back(row(im->s));
    starts.insert(starts.begin(), sol.x);
  }
  r.certificate = std::move(cert);
  if (r.failed) r.violation = -kInf;
  return r;
}

std::string_view to_string(ReductionStatus s) {
  switch (s) {
    case ReductionStatus::Optimal: return "Optimal";
    case ReductionStatus::ScenarioBudgetExceeded: return "ScenarioBudgetExceeded";
    case ReductionStatus::MasterInfeasible: return "MasterInfeasible";
    case ReductionStatus::AdversaryFailed: return "AdversaryFailed";
    case ReductionStatus::IterationLimit: return "IterationLimit";
    case ReductionStatus::Stalled: return "Stalled";
  }
  return "?";
}

namespace {

// The noise nearest to w that admits a trajectory at theta. Projection is
// solved tightly because, once w is frozen into the master, any residual in
// rows that only involve w becomes a constant infeasibility.
std::optional<std::pair<std::vector<double>, Witness>> admissible(const SipProblem& p,
                                                                  std::span<const double> theta,
                                                                  std::span<const double> w,
                                                                  const SolverOptions& opts,
                                                                  const Witness* hint = nullptr) {
  std::vector<double> w0(w.begin(), w.end());
  if (auto traj = resolve_trajectory(p, theta, w0, opts, hint)) return std::make_pair(w0, *traj);

  const AdversarySpace space{p, p.dims.w, p.dims.zp, p.dims.zm, false};
  SlotMap m = space.slots(theta, 0.0);
  NlpProblem nlp = space.base(m, 1.0);
  Expr dist = 0.0;
  for (std::size_t j = 0; j < p.dims.w; ++j) dist = dist + pow(vars::w(j) - w0[j], 2);
  nlp.objective = m.compile(dist);
  std::vector<double> x0(nlp.n, 0.0);
  std::copy(w0.begin(), w0.end(), x0.begin());
  if (hint) {
    std::copy(hint->zp.begin(), hint->zp.end(), x0.begin() + static_cast<std::ptrdiff_t>(space.zp_at()));
    std::copy(hint->zm.begin(), hint->zm.end(), x0.begin() + static_cast<std::ptrdiff_t>(space.zm_at()));
  }
  SolverOptions tight = opts;
  tight.tol_feas = std::min(opts.tol_feas, 1e-12);
  tight.tol_opt = std::min(opts.tol_opt, 1e-9);
  const std::vector<std::vector<double>> extra{x0};
  const NlpSolution sol = multistart(nlp, tight, extra);
  if (!sol.feasible(opts.tol_feas)) return std::nullopt;
  std::vector<double> w1(sol.x.begin(), sol.x.begin() + static_cast<std::ptrdiff_t>(p.dims.w));
  Witness start;
  start.zp.assign(sol.x.begin() + static_cast<std::ptrdiff_t>(space.zp_at()),
                  sol.x.begin() + static_cast<std::ptrdiff_t>(space.zm_at()));
  start.zm.assign(sol.x.begin() + static_cast<std::ptrdiff_t>(space.zm_at()), sol.x.end());
  if (auto traj = resolve_trajectory(p, theta, w1, opts, &start)) return std::make_pair(w1, *traj);
  return std::nullopt;
}

}  // namespace

ReductionReport run(const SipProblem& p, const ReductionOptions& opts) {
  opts.check();
  using clock = std::chrono::steady_clock;

  ReductionReport rep;
  rep.scenario_set.dedup_radius = opts.dedup_radius;
  ScenarioSet& set = rep.scenario_set;

  SolverOptions aux = opts.nlp;
  aux.rng_seed = derive_seed(opts.rng_seed, 1);
  aux.restarts = 3;
  const std::vector<double> s_center = feasible_s_center(p, aux);
  const std::vector<double> theta0 = box_middle(p.theta_lo, p.theta_hi);
  {
    // all-zero noise, or the smallest admissible one if zero admits no trajectory
    auto init = admissible(p, theta0, clipped_zero(p.w_lo, p.w_hi), aux);
    if (!init) {
      rep.status = ReductionStatus::AdversaryFailed;
      rep.theta = theta0;
      return rep;
    }
    init->second.s = s_center;
    set.add(std::move(init->first), Scenario::Origin::Initial, -1, 0.0, std::move(init->second));
  }

  std::optional<SolutionBundle> warm;
  std::optional<double> prev_gamma;
  NlpStatus prev_status = NlpStatus::IterationLimit;
  rep.status = ReductionStatus::IterationLimit;
  for (int it = 1; it <= opts.max_outer; ++it) {
    const auto t0 = clock::now();
    IterationRecord rec;
    rec.iteration = it;
    rec.n_scenarios = set.size();

    const MasterProblem mp = build_master(p, set, warm, s_center);
    SolverOptions mo = opts.nlp;
    mo.restarts = opts.master_restarts;
    mo.rng_seed = derive_seed(opts.rng_seed, 1000ULL * it);
    const std::vector<std::vector<double>> extra{mp.start};
    const NlpSolution ms = multistart(mp.nlp, mo, extra);
    rec.master_status = ms.status;
    const SolutionBundle bundle = mp.layout.unpack(ms.x);
    rec.gamma = bundle.gamma;
    if (!ms.feasible(mo.tol_feas)) {
      rep.status = ReductionStatus::MasterInfeasible;
      rec.wall_ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
      rep.iterations.push_back(rec);
      if (!warm) {
        rep.theta = bundle.theta;
        rep.gamma = bundle.gamma;
        rep.bundle = bundle;
      }
      break;
    }
    rep.theta = bundle.theta;
    rep.gamma = bundle.gamma;
    rep.bundle = bundle;
    if (prev_gamma && prev_status == NlpStatus::Converged && ms.status == NlpStatus::Converged &&
        bundle.gamma < *prev_gamma - 1e-6) {
      rep.events.push_back({it, "LOCAL_DIP",
                            "gamma fell from " + std::to_string(*prev_gamma) + " to " +
                                std::to_string(bundle.gamma)});
    }
    prev_gamma = bundle.gamma;
    prev_status = ms.status;

    // adversary pass
    const auto hints_for = [&](Scenario::Origin origin, int g_index) {
      AdversaryHints h;
      for (auto s = set.scenarios.rbegin(); s != set.scenarios.rend() && h.w.size() < 5; ++s) {
        if (s->origin == origin && s->g_index == g_index) h.w.push_back(s->w);
      }
      return h;
    };
    std::vector<AdversaryResult> pass;
    ReductionOptions ao = opts;
    ao.rng_seed = derive_seed(opts.rng_seed, 1000ULL * it + 1);
    pass.push_back(adversary_f(p, bundle.theta, bundle.gamma, ao,
                               hints_for(Scenario::Origin::FObjective, -1)));
    for (std::size_t i = 0; i < p.g.size(); ++i) {
      ao.rng_seed = derive_seed(opts.rng_seed, 1000ULL * it + 2 + i);
      pass.push_back(adversary_g(p, bundle.theta, i, ao,
                                 hints_for(Scenario::Origin::GConstraint, static_cast<int>(i))));
    }
    rep.last_pass = pass;

    bool failed = false;
    rec.worst_violation = -kInf;
    std::vector<const AdversaryResult*> violators;
    for (const auto& a : pass) {
      failed = failed || a.failed;
      rec.worst_violation = std::max(rec.worst_violation, a.violation);
      if (!a.failed && a.violation > opts.tol_viol) violators.push_back(&a);
    }
    std::stable_sort(violators.begin(), violators.end(),
                     [](const AdversaryResult* a, const AdversaryResult* b) { return a->violation > b->violation; });
    if (opts.add_policy == AddPolicy::WorstOnly && violators.size() > 1) violators.resize(1);

    const auto finish = [&](ReductionStatus st) {
      rep.status = st;
      rec.wall_ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
      rep.iterations.push_back(rec);
    };
    if (failed) {
      finish(ReductionStatus::AdversaryFailed);
      break;
    }
    if (violators.empty()) {
      finish(ReductionStatus::Optimal);
      break;
    }
    struct Candidate {
      const AdversaryResult* from;
      std::vector<double> w;
      Witness hint;
    };
    std::vector<Candidate> fresh;
    for (const AdversaryResult* a : violators) {
      Witness hint{a->witness_zp, a->witness_zm, {}};
      if (a->certificate && !a->certificate->inner_set.empty()) hint.s = a->certificate->inner_set.back();
      std::vector<double> w = a->w;
      if (auto fixed = admissible(p, bundle.theta, a->w, aux, &hint)) {
        w = std::move(fixed->first);
        hint.zp = std::move(fixed->second.zp);
        hint.zm = std::move(fixed->second.zm);
      }
      bool dup = set.contains_near(w);
      for (const Candidate& c : fresh) dup = dup || linf(w, c.w) < opts.dedup_radius;
      if (!dup) fresh.push_back({a, std::move(w), std::move(hint)});
    }
    if (fresh.empty()) {
      finish(ReductionStatus::Stalled);
      break;
    }
    if (set.size() + fresh.size() > static_cast<std::size_t>(opts.max_scenarios)) {
      finish(ReductionStatus::ScenarioBudgetExceeded);
      break;
    }
    for (Candidate& c : fresh) {
      const AdversaryResult* a = c.from;
      set.add(std::move(c.w), a->g_index < 0 ? Scenario::Origin::FObjective : Scenario::Origin::GConstraint,
              a->g_index, a->violation, std::move(c.hint));
    }
    rec.scenarios_added = static_cast<int>(fresh.size());
    rec.wall_ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    rep.iterations.push_back(rec);
    warm = bundle;
  }
  return rep;
}

}  // namespace sipred
