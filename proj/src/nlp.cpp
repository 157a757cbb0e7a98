#include "sipred/nlp.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "box_lbfgs.hpp"

namespace sipred {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Rows that survive presolve plus the tightened box.
struct Prepared {
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<const Tape*> eq;
  std::vector<const Tape*> ineq;
};

// Affine rows with a single free variable become exact bounds, repeated until
// nothing changes so that chains like x1 = y - w, v = x1' - x1 are fixed
// exactly. Nonnegativity of smoothing multipliers then holds exactly instead
// of to tol_feas.
Prepared presolve(const NlpProblem& p) {
  Prepared out{p.lower, p.upper, {}, {}};
  const auto forms = [](const std::vector<Tape>& rows) {
    std::vector<std::optional<AffineForm>> f(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].slots().size() <= 8) f[i] = rows[i].affine();
    }
    return f;
  };
  const auto eq_forms = forms(p.eq);
  const auto ineq_forms = forms(p.ineq);
  std::vector<char> eq_done(p.eq.size(), 0), ineq_done(p.ineq.size(), 0);

  // the single free term of a row and the constant after substituting fixed
  // variables
  const auto reduce = [&](const AffineForm& f) -> std::optional<std::pair<std::size_t, std::pair<double, double>>> {
    std::optional<std::size_t> free_at;
    double c = f.constant;
    for (std::size_t k = 0; k < f.terms.size(); ++k) {
      const auto [slot, a] = f.terms[k];
      if (out.lower[slot] == out.upper[slot]) {
        c += a * out.lower[slot];
      } else if (free_at) {
        return std::nullopt;
      } else {
        free_at = k;
      }
    }
    if (!free_at) return std::nullopt;
    return std::make_pair(f.terms[*free_at].first, std::make_pair(f.terms[*free_at].second, c));
  };

  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t i = 0; i < p.eq.size(); ++i) {
      if (eq_done[i] || !eq_forms[i]) continue;
      const auto r = reduce(*eq_forms[i]);
      if (!r) continue;
      const auto [slot, ac] = *r;
      const double v = -ac.second / ac.first;
      if (v >= out.lower[slot] && v <= out.upper[slot]) {
        out.lower[slot] = out.upper[slot] = v;
        eq_done[i] = 1;
        changed = true;
      }
    }
    for (std::size_t i = 0; i < p.ineq.size(); ++i) {
      if (ineq_done[i] || !ineq_forms[i]) continue;
      const auto r = reduce(*ineq_forms[i]);
      if (!r) continue;
      const auto [slot, ac] = *r;
      const double v = -ac.second / ac.first;
      if (ac.first > 0.0 && v >= out.lower[slot]) {
        out.upper[slot] = std::min(out.upper[slot], v);
      } else if (ac.first < 0.0 && v <= out.upper[slot]) {
        out.lower[slot] = std::max(out.lower[slot], v);
      } else {
        continue;
      }
      ineq_done[i] = 1;
      changed = true;
    }
  }
  for (std::size_t i = 0; i < p.eq.size(); ++i) {
    if (!eq_done[i]) out.eq.push_back(&p.eq[i]);
  }
  for (std::size_t i = 0; i < p.ineq.size(); ++i) {
    if (!ineq_done[i]) out.ineq.push_back(&p.ineq[i]);
  }
  return out;
}

NlpSolution solve_prepared(const NlpProblem& p, const Prepared& pre, const SolverOptions& opts,
                           std::vector<double> x) {
  const std::size_t n = p.n;
  for (std::size_t i = 0; i < n; ++i) x[i] = std::clamp(x[i], pre.lower[i], pre.upper[i]);

  // one penalty per row: a degenerate row (zero gradient on its feasible set)
  // may need a huge penalty, and sharing it would ruin the conditioning of
  // the others
  const std::size_t me = pre.eq.size(), mi = pre.ineq.size();
  std::vector<double> lambda(me, 0.0), mu(mi, 0.0), c(me, 0.0), h(mi, 0.0);
  std::vector<double> rho_eq(me, opts.initial_penalty), rho_in(mi, opts.initial_penalty);
  std::vector<double> prev_eq(me, kInf), prev_in(mi, kInf);

  const detail::SmoothFn lagrangian = [&](std::span<const double> xs, std::span<double> grad) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double val = p.objective.accumulate_gradient(xs, 1.0, grad);
    for (std::size_t j = 0; j < me; ++j) {
      const double rho = rho_eq[j];
      double cj = 0.0;
      pre.eq[j]->accumulate_gradient(
          xs,
          [&](double v) {
            cj = v;
            return lambda[j] + rho * v;
          },
          grad);
      val += cj * (lambda[j] + 0.5 * rho * cj);
    }
    for (std::size_t j = 0; j < mi; ++j) {
      const double rho = rho_in[j];
      double hj = 0.0;
      pre.ineq[j]->accumulate_gradient(
          xs,
          [&](double v) {
            hj = v;
            if (std::isnan(v)) return v;
            return std::max(0.0, mu[j] + rho * v);
          },
          grad);
      // (max(0, mu + rho h)^2 - mu^2) / (2 rho) without the cancellation
      val += mu[j] + rho * hj >= 0.0 ? hj * (mu[j] + 0.5 * rho * hj) : -mu[j] * mu[j] / (2.0 * rho);
    }
    return val;
  };

  // fills c and h, returns the max violation
  const auto violation = [&](std::span<const double> xs) {
    double v = 0.0;
    for (std::size_t j = 0; j < me; ++j) {
      c[j] = pre.eq[j]->value(xs);
      v = std::max(v, std::isnan(c[j]) ? kInf : std::abs(c[j]));
    }
    for (std::size_t j = 0; j < mi; ++j) {
      h[j] = pre.ineq[j]->value(xs);
      v = std::max(v, std::isnan(h[j]) ? kInf : std::max(0.0, h[j]));
    }
    return v;
  };

  NlpSolution sol;
  sol.status = NlpStatus::IterationLimit;
  double inner_tol = 1e-2;
  double feas_before = violation(x);
  double rho_top = opts.initial_penalty;
  std::optional<std::vector<double>> last_feasible;
  double last_feasible_stationarity = kInf;
  std::vector<double> grad(n);
  for (int outer = 1; outer <= opts.max_outer_iter; ++outer) {
    sol.outer_iterations = outer;
    const double tol_pg = std::max(0.5 * opts.tol_opt, inner_tol);
    const std::vector<double> x_before = x;
    const auto inner = detail::minimize_box(lagrangian, x, pre.lower, pre.upper,
                                            {opts.max_inner_iter, tol_pg, opts.lbfgs_memory});
    sol.inner_iterations += inner.iterations;

    const double feas = violation(x);
    if (!std::isfinite(inner.value) || feas > 1e6 * std::max(1.0, feas_before)) {
      // the subproblem is unbounded at these penalties: retreat and stiffen
      x = x_before;
      for (double& r : rho_eq) r *= 10.0;
      for (double& r : rho_in) r *= 10.0;
      rho_top *= 10.0;
      if (rho_top > opts.penalty_cap) {
        if (violation(x) > opts.tol_feas && !last_feasible) sol.status = NlpStatus::Diverged;
        break;
      }
      continue;
    }
    feas_before = feas;

    // gradient of the Lagrangian at the updated multipliers equals the
    // augmented-Lagrangian gradient at the old ones
    const double lval = lagrangian(x, grad);
    sol.stationarity = detail::projected_gradient_norm(x, grad, pre.lower, pre.upper);
    if (!std::isfinite(lval)) sol.stationarity = kInf;

    // multiplier step, then grow the penalty of every lagging row: its
    // violation (complementarity included) did not shrink fourfold and is
    // within a factor 10 of the worst one
    std::vector<double> meas_eq(me), meas_in(mi);
    double worst = 0.0;
    const auto clean = [](double v) { return std::isnan(v) ? kInf : v; };
    for (std::size_t j = 0; j < me; ++j) worst = std::max(worst, meas_eq[j] = clean(std::abs(c[j])));
    for (std::size_t j = 0; j < mi; ++j) {
      worst = std::max(worst, meas_in[j] = clean(std::abs(std::max(h[j], -mu[j] / rho_in[j]))));
    }
    const auto grow = [&](double measure, double& prev, double& rho) {
      if (measure > 0.25 * prev && measure >= 0.1 * worst && measure > 0.1 * opts.tol_feas) rho *= 10.0;
      prev = measure;
      rho_top = std::max(rho_top, rho);
    };
    for (std::size_t j = 0; j < me; ++j) {
      lambda[j] = std::clamp(lambda[j] + rho_eq[j] * c[j], -1e12, 1e12);
      grow(meas_eq[j], prev_eq[j], rho_eq[j]);
    }
    for (std::size_t j = 0; j < mi; ++j) {
      mu[j] = std::min(std::max(0.0, mu[j] + rho_in[j] * h[j]), 1e12);
      grow(meas_in[j], prev_in[j], rho_in[j]);
    }

    if (feas <= opts.tol_feas && sol.stationarity <= opts.tol_opt) {
      sol.status = NlpStatus::Converged;
      break;
    }
    if (feas <= opts.tol_feas) {
      last_feasible = x;
      last_feasible_stationarity = sol.stationarity;
    }
    if (rho_top > opts.penalty_cap) {
      if (feas > opts.tol_feas && !last_feasible) sol.status = NlpStatus::Diverged;
      break;
    }
    inner_tol *= 0.1;
  }
  // the outer loop can oscillate around the feasible set; fall back to the
  // most recent iterate that was inside it
  if (sol.status != NlpStatus::Converged && last_feasible && violation(x) > opts.tol_feas) {
    x = *last_feasible;
    sol.stationarity = last_feasible_stationarity;
  }

  const PointReport rep = evaluate_point(p, x);
  sol.objective_value = rep.objective;
  sol.max_eq_violation = rep.max_eq_violation;
  sol.max_ineq_violation = rep.max_ineq_violation;
  if (sol.status == NlpStatus::Converged && !(sol.max_violation() <= opts.tol_feas)) {
    sol.status = NlpStatus::IterationLimit;
  }
  sol.x = std::move(x);
  return sol;
}

bool better(const NlpSolution& a, const NlpSolution& b, double tol_feas) {
  const bool fa = a.feasible(tol_feas);
  const bool fb = b.feasible(tol_feas);
  if (fa != fb) return fa;
  if (fa) return a.objective_value < b.objective_value;
  const bool da = a.status == NlpStatus::Diverged;
  const bool db = b.status == NlpStatus::Diverged;
  if (da != db) return !da;
  return a.max_violation() < b.max_violation();
}

}  // namespace

void SolverOptions::check() const {
  if (!(tol_feas > 0.0) || !(tol_opt > 0.0)) throw std::invalid_argument("tolerances must be positive");
  if (restarts < 1) throw std::invalid_argument("restarts must be at least 1");
  if (max_outer_iter < 1 || max_inner_iter < 1) throw std::invalid_argument("iteration limits must be positive");
  if (!(initial_penalty > 0.0) || !(penalty_cap >= initial_penalty)) {
    throw std::invalid_argument("bad penalty schedule");
  }
  if (lbfgs_memory < 1) throw std::invalid_argument("lbfgs_memory must be at least 1");
}

void NlpProblem::check() const {
  if (n == 0) throw std::invalid_argument("problem has no variables");
  if (lower.size() != n || upper.size() != n) throw std::invalid_argument("bound vectors do not match n");
  for (std::size_t i = 0; i < n; ++i) {
    if (!(lower[i] <= upper[i])) throw std::invalid_argument("lower bound above upper bound");
  }
  const auto in_range = [this](const Tape& t) { return t.slots().empty() || t.slots().back() < n; };
  bool ok = in_range(objective);
  for (const Tape& t : eq) ok = ok && in_range(t);
  for (const Tape& t : ineq) ok = ok && in_range(t);
  if (!ok) throw std::invalid_argument("function references a variable outside [0, n)");
}

std::string_view to_string(NlpStatus s) {
  switch (s) {
    case NlpStatus::Converged: return "Converged";
    case NlpStatus::IterationLimit: return "IterationLimit";
    case NlpStatus::Diverged: return "Diverged";
  }
  return "?";
}

PointReport evaluate_point(const NlpProblem& p, std::span<const double> x) {
  PointReport r;
  r.objective = p.objective.value(x);
  for (const Tape& t : p.eq) {
    const double v = std::abs(t.value(x));
    r.max_eq_violation = std::isnan(v) ? kInf : std::max(r.max_eq_violation, v);
  }
  for (const Tape& t : p.ineq) {
    const double v = t.value(x);
    r.max_ineq_violation = std::isnan(v) ? kInf : std::max(r.max_ineq_violation, v);
  }
  return r;
}

NlpSolution solve(const NlpProblem& p, const SolverOptions& opts,
                  std::optional<std::span<const double>> warm_start) {
  p.check();
  opts.check();
  std::vector<double> x(p.n, 0.0);
  if (warm_start) {
    if (warm_start->size() != p.n) throw std::invalid_argument("warm start has wrong length");
    x.assign(warm_start->begin(), warm_start->end());
  }
  return solve_prepared(p, presolve(p), opts, std::move(x));
}

std::vector<std::vector<double>> random_starts(const NlpProblem& p, int count, std::uint64_t seed) {
  std::vector<std::vector<double>> out;
  out.reserve(static_cast<std::size_t>(std::max(count, 0)));
  for (int i = 0; i < count; ++i) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(i), 0x5eedu};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> x(p.n);
    for (std::size_t k = 0; k < p.n; ++k) {
      double lo = p.lower[k], hi = p.upper[k];
      if (!std::isfinite(lo) && !std::isfinite(hi)) {
        lo = -10.0;
        hi = 10.0;
      } else if (!std::isfinite(lo)) {
        lo = hi - 20.0;
      } else if (!std::isfinite(hi)) {
        hi = lo + 20.0;
      }
      x[k] = lo + (hi - lo) * unit(rng);
    }
    out.push_back(std::move(x));
  }
  return out;
}

NlpSolution solve_from_starts(const NlpProblem& p, const SolverOptions& opts,
                              std::span<const std::vector<double>> starts) {
  p.check();
  opts.check();
  if (starts.empty()) throw std::invalid_argument("no starting points");
  const Prepared pre = presolve(p);
  std::optional<NlpSolution> best;
  for (std::size_t i = 0; i < starts.size(); ++i) {
    if (starts[i].size() != p.n) throw std::invalid_argument("start has wrong length");
    NlpSolution s = solve_prepared(p, pre, opts, starts[i]);
    s.start_index = i;
    if (!best || better(s, *best, opts.tol_feas)) best = std::move(s);
  }
  return *best;
}

NlpSolution multistart(const NlpProblem& p, const SolverOptions& opts,
                       std::span<const std::vector<double>> extra_starts) {
  std::vector<std::vector<double>> starts(extra_starts.begin(), extra_starts.end());
  for (auto& x : random_starts(p, opts.restarts, opts.rng_seed)) starts.push_back(std::move(x));
  return solve_from_starts(p, opts, starts);
}

}  // namespace sipred
