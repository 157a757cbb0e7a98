#include "sipred/audit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>

#include <Eigen/Dense>

#include "json_util.hpp"
#include "sipred/examples.hpp"

namespace sipred {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool uses(const Expr& e, Group g) {
  for (const VarRef& v : variables(e)) {
    if (v.group == g) return true;
  }
  return false;
}

// Evaluates one candidate design over many noises. Programs read the flat
// vector w | zp | zm | s with theta frozen in.
class Evaluator {
 public:
  Evaluator(const SipProblem& p, std::span<const double> theta, const AuditOptions& opts)
      : p_(p), theta_(theta.begin(), theta.end()), opts_(opts) {
    const Dims& d = p.dims;
    zp_at_ = d.w;
    zm_at_ = zp_at_ + d.zp;
    s_at_ = zm_at_ + d.zm;
    x_.assign(s_at_ + d.s, 0.0);
    const Resolver resolve = [this](const VarRef& r) {
      switch (r.group) {
        case Group::Theta: return Operand::constant(theta_.at(r.index));
        case Group::W: return Operand::at(r.index);
        case Group::Zp: return Operand::at(zp_at_ + r.index);
        case Group::Zm: return Operand::at(zm_at_ + r.index);
        case Group::S: return Operand::at(s_at_ + r.index);
        default: return Operand::constant(0.0);
      }
    };
    f_ = Tape::compile(p.f, resolve);
    for (const Expr& e : p.d) d_.push_back(Tape::compile(e, resolve));
    for (const Expr& e : p.e) e_.push_back(Tape::compile(e, resolve));
    for (const Expr& e : p.g) {
      g_.push_back(Tape::compile(e, resolve));
      g_uses_s_.push_back(uses(e, Group::S));
    }

    inner_opts_ = opts.nlp;
    inner_opts_.restarts = opts.resolve_restarts;

    if (p.example) {
      try {
        if (p.example->kind == "saturation") {
          const SaturationParams sp = saturation_params(*p.example);
          if (build_saturation(sp) == p) saturation_ = sp;
        } else if (p.example->kind == "obstacle") {
          obstacle_ = build_obstacle(obstacle_params(*p.example)) == p;
        }
      } catch (const std::invalid_argument&) {
        // metadata that does not rebuild the problem: no shortcut
      }
    }
    if (!saturation_) prepare_affine();
  }

  struct Outcome {
    bool resolved = false;
    double cost = 0.0;
    double max_g = -kInf;
  };

  Outcome evaluate(std::span<const double> w) {
    Outcome out;
    std::copy(w.begin(), w.end(), x_.begin());
    std::fill(x_.begin() + static_cast<std::ptrdiff_t>(zp_at_), x_.end(), 0.0);
    if (!resolve(w)) return out;
    out.cost = f_.value(x_);
    for (std::size_t i = 0; i < g_.size(); ++i) {
      const auto v = g_value(i, w);
      if (!v) return out;
      out.max_g = std::max(out.max_g, *v);
    }
    out.resolved = std::isfinite(out.cost);
    return out;
  }

  std::vector<double> zp() const {
    return {x_.begin() + static_cast<std::ptrdiff_t>(zp_at_), x_.begin() + static_cast<std::ptrdiff_t>(zm_at_)};
  }

 private:
  void prepare_affine() {
    if (!e_.empty()) return;
    const std::size_t nw = p_.dims.w, nz = p_.dims.zp + p_.dims.zm;
    Eigen::MatrixXd aw = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d_.size()), static_cast<Eigen::Index>(nw));
    Eigen::MatrixXd az = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d_.size()), static_cast<Eigen::Index>(nz));
    Eigen::VectorXd c(static_cast<Eigen::Index>(d_.size()));
    for (std::size_t r = 0; r < d_.size(); ++r) {
      const auto form = d_[r].affine();
      if (!form) return;
      const auto row = static_cast<Eigen::Index>(r);
      c(row) = form->constant;
      for (const auto& [slot, coeff] : form->terms) {
        if (slot < nw) {
          aw(row, static_cast<Eigen::Index>(slot)) = coeff;
        } else if (slot < s_at_) {
          az(row, static_cast<Eigen::Index>(slot - nw)) = coeff;
        } else {
          return;
        }
      }
    }
    qr_.compute(az);
    if (nz > 0 && qr_.rank() < static_cast<Eigen::Index>(nz)) return;
    aw_ = std::move(aw);
    az_ = std::move(az);
    c_ = std::move(c);
    affine_ = true;
  }

  bool resolve(std::span<const double> w) {
    if (saturation_ && simulate_saturation_witness() && trajectory_ok()) return true;
    if (affine_) return solve_affine(w);
    const auto traj = resolve_trajectory(p_, theta_, w, inner_opts_);
    if (!traj) return false;
    std::copy(traj->zp.begin(), traj->zp.end(), x_.begin() + static_cast<std::ptrdiff_t>(zp_at_));
    std::copy(traj->zm.begin(), traj->zm.end(), x_.begin() + static_cast<std::ptrdiff_t>(zm_at_));
    return true;
  }

  bool solve_affine(std::span<const double> w) {
    const std::size_t nw = p_.dims.w, nz = p_.dims.zp + p_.dims.zm;
    const Eigen::Map<const Eigen::VectorXd> wv(w.data(), static_cast<Eigen::Index>(nw));
    const Eigen::VectorXd rhs = -(aw_ * wv + c_);
    Eigen::VectorXd z = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nz));
    if (nz > 0) z = qr_.solve(rhs);
    const double residual = rhs.size() ? (az_ * z - rhs).cwiseAbs().maxCoeff() : 0.0;
    if (!(residual <= opts_.nlp.tol_feas)) return false;
    for (std::size_t j = 0; j < nz; ++j) x_[zp_at_ + j] = z(static_cast<Eigen::Index>(j));
    return true;
  }

  // Exact saturated closed loop with the smoothing multipliers of the branch
  // each step takes.
  bool simulate_saturation_witness() {
    const SaturationParams& sp = *saturation_;
    const std::size_t n = static_cast<std::size_t>(sp.n_steps);
    const double b = theta_[0], a = sp.a + x_[0];
    double x = sp.x0;
    for (std::size_t k = 0; k < n; ++k) {
      const double v = -b * x;
      const double u = sat(sp.u_lo, sp.u_hi, v);
      double* z = &x_[zm_at_ + 7 * k];
      z[0] = v <= sp.u_hi ? 1.0 : 0.0;
      z[1] = 1.0 - z[0];
      z[2] = v >= sp.u_lo ? 1.0 : 0.0;
      z[3] = 1.0 - z[2];
      z[4] = v >= sp.u_hi ? 1.0 : 0.0;
      z[5] = z[4] == 0.0 && v <= sp.u_lo ? 1.0 : 0.0;
      z[6] = 1.0 - z[4] - z[5];
      x_[zp_at_ + n + k] = u;
      x = a * x + u;
      x_[zp_at_ + k] = x;
    }
    return std::isfinite(x);
  }

  bool trajectory_ok() const {
    const double tol = opts_.nlp.tol_feas;
    for (const Tape& t : d_) {
      if (!(std::abs(t.value(x_)) <= tol)) return false;
    }
    for (const Tape& t : e_) {
      if (!(t.value(x_) <= tol)) return false;
    }
    return true;
  }

  std::optional<double> g_value(std::size_t i, std::span<const double> w) {
    if (!g_uses_s_[i]) return g_[i].value(x_);
    if (obstacle_) {
      // g is linear in its own step's simplex weights: the minimum sits at a vertex
      double best = kInf;
      for (std::size_t slot : g_[i].slots()) {
        if (slot < s_at_) continue;
        x_[slot] = 1.0;
        best = std::min(best, g_[i].value(x_));
        x_[slot] = 0.0;
      }
      return best;
    }
    const auto m = inner_min(p_, i, theta_, w, zp(), inner_opts_);
    if (!m) return std::nullopt;
    return m->value;
  }

  const SipProblem& p_;
  std::vector<double> theta_;
  AuditOptions opts_;
  SolverOptions inner_opts_;
  std::size_t zp_at_ = 0, zm_at_ = 0, s_at_ = 0;
  std::vector<double> x_;
  Tape f_;
  std::vector<Tape> d_, e_, g_;
  std::vector<bool> g_uses_s_;

  std::optional<SaturationParams> saturation_;
  bool obstacle_ = false;

  bool affine_ = false;
  Eigen::MatrixXd aw_, az_;
  Eigen::VectorXd c_;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr_;
};

AuditReport audit_stream(const SipProblem& p, std::span<const double> theta, double gamma, std::size_t n,
                         const std::function<void(std::vector<double>&)>& next, const AuditOptions& opts) {
  Evaluator ev(p, theta, opts);
  AuditReport rep;
  rep.gamma = gamma;
  rep.worst_cost = -kInf;
  rep.worst_g = -kInf;
  std::vector<double> w(p.dims.w);
  for (std::size_t k = 0; k < n; ++k) {
    next(w);
    const auto o = ev.evaluate(w);
    ++rep.samples;
    if (!o.resolved) {
      ++rep.infeasible_samples;
    } else {
      if (o.max_g > opts.tol_viol) ++rep.violations;
      rep.worst_g = std::max(rep.worst_g, o.max_g);
      // strict comparison keeps the earliest sample among equal costs
      if (o.cost > rep.worst_cost) {
        rep.worst_cost = o.cost;
        rep.worst_w = w;
      }
    }
    if (opts.keep_records) rep.records.push_back({k, o.resolved, o.cost, o.max_g});
    if (k < opts.keep_trajectories) rep.trajectories.push_back(o.resolved ? ev.zp() : std::vector<double>{});
  }
  rep.margin = gamma - rep.worst_cost;
  return rep;
}

}  // namespace

AuditReport audit_samples(const SipProblem& p, std::span<const double> theta, double gamma,
                          const std::vector<std::vector<double>>& ws, const AuditOptions& opts) {
  std::size_t k = 0;
  return audit_stream(p, theta, gamma, ws.size(), [&](std::vector<double>& w) { w = ws.at(k++); }, opts);
}

AuditReport monte_carlo(const SipProblem& p, std::span<const double> theta, double gamma, std::size_t n,
                        std::uint64_t seed, const AuditOptions& opts) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  AuditReport rep = audit_stream(
      p, theta, gamma, n,
      [&](std::vector<double>& w) {
        for (std::size_t j = 0; j < w.size(); ++j) w[j] = p.w_lo[j] + (p.w_hi[j] - p.w_lo[j]) * unit(rng);
      },
      opts);
  rep.seed = seed;
  return rep;
}

double certify(const SipProblem& p, const ReductionReport& report, const ReductionOptions& opts) {
  const auto hints_for = [&](Scenario::Origin origin, int g_index) {
    AdversaryHints h;
    const auto& ss = report.scenario_set.scenarios;
    for (auto s = ss.rbegin(); s != ss.rend() && h.w.size() < 5; ++s) {
      if (s->origin == origin && s->g_index == g_index) h.w.push_back(s->w);
    }
    return h;
  };
  ReductionOptions ao = opts;
  ao.rng_seed = derive_seed(opts.rng_seed, 0);
  const AdversaryResult f = adversary_f(p, report.theta, report.gamma, ao, hints_for(Scenario::Origin::FObjective, -1));
  if (f.failed) return kInf;
  double worst = f.violation;
  for (std::size_t i = 0; i < p.g.size(); ++i) {
    ao.rng_seed = derive_seed(opts.rng_seed, 1 + i);
    const AdversaryResult g =
        adversary_g(p, report.theta, i, ao, hints_for(Scenario::Origin::GConstraint, static_cast<int>(i)));
    if (g.failed) return kInf;
    worst = std::max(worst, g.violation);
  }
  return worst;
}

std::string audit_to_json(const AuditReport& a) {
  detail::ordered_json j;
  j["samples"] = a.samples;
  j["violations"] = a.violations;
  j["worst_cost"] = detail::number(a.worst_cost);
  j["worst_w"] = detail::numbers(a.worst_w);
  j["gamma"] = detail::number(a.gamma);
  j["margin"] = detail::number(a.margin);
  j["infeasible_samples"] = a.infeasible_samples;
  j["seed"] = a.seed;
  j["worst_g"] = detail::number(a.worst_g);
  return detail::dump(j);
}

std::string audit_records_csv(const AuditReport& a) {
  std::string out = "sample,resolved,cost,max_g\n";
  char buf[128];
  for (const SampleRecord& r : a.records) {
    std::snprintf(buf, sizeof buf, "%zu,%d,%.17g,%.17g\n", r.index, r.resolved ? 1 : 0, r.cost, r.max_g);
    out += buf;
  }
  return out;
}

}  // namespace sipred
