#include "sipred/model.hpp"

#include <cmath>

namespace sipred {

std::size_t Dims::of(Group g) const {
  switch (g) {
    case Group::Theta: return theta;
    case Group::W: return w;
    case Group::Zp: return zp;
    case Group::Zm: return zm;
    case Group::S: return s;
    case Group::Gamma: return 1;
    case Group::Aux: return 0;
  }
  return 0;
}

namespace {

void check_box(std::vector<Diagnostic>& out, const char* group, const char* code,
               std::size_t dim, const std::vector<double>& lo, const std::vector<double>& hi) {
  if (lo.size() != dim || hi.size() != dim) {
    out.push_back({"DIM_MISMATCH", std::string(group) + " bounds have length " +
                                       std::to_string(lo.size()) + "/" + std::to_string(hi.size()) +
                                       ", expected " + std::to_string(dim)});
    return;
  }
  for (std::size_t i = 0; i < dim; ++i) {
    const std::string where = std::string(group) + "[" + std::to_string(i) + "]";
    if (!std::isfinite(lo[i]) || !std::isfinite(hi[i])) {
      out.push_back({code, where + " bound is not finite"});
    } else if (lo[i] > hi[i]) {
      out.push_back({"BAD_BOUNDS", where + " lower bound exceeds upper bound"});
    }
  }
}

void check_expr(std::vector<Diagnostic>& out, const SipProblem& p, const Expr& e,
                const std::string& where, const char* family, const std::vector<Group>& allowed) {
  bool bad_group = false;
  for (const VarRef& v : variables(e)) {
    bool ok = false;
    for (Group g : allowed) ok = ok || g == v.group;
    const std::string ref = std::string(group_name(v.group)) + "[" + std::to_string(v.index) + "]";
    if (!ok) {
      if (!bad_group) {
        out.push_back({std::string("BAD_GROUP_IN_") + family, where + " references " + ref});
      }
      bad_group = true;
    } else if (v.index >= p.dims.of(v.group)) {
      out.push_back({"INDEX_OUT_OF_RANGE",
                     where + " references " + ref + " but the group has dimension " +
                         std::to_string(p.dims.of(v.group))});
    }
  }
}

}  // namespace

std::vector<Diagnostic> validate(const SipProblem& p) {
  std::vector<Diagnostic> out;
  check_box(out, "theta", "NONCOMPACT_THETA", p.dims.theta, p.theta_lo, p.theta_hi);
  check_box(out, "w", "NONCOMPACT_W", p.dims.w, p.w_lo, p.w_hi);
  if (p.dims.s > 0 && p.s_lo.empty() && p.s_hi.empty()) {
    out.push_back({"NONCOMPACT_S", "s has dimension " + std::to_string(p.dims.s) + " but no box"});
  } else {
    check_box(out, "s", "NONCOMPACT_S", p.dims.s, p.s_lo, p.s_hi);
  }
  if (!std::isfinite(p.gamma_lo) || !std::isfinite(p.gamma_hi)) {
    out.push_back({"NONCOMPACT_GAMMA", "gamma range is not finite"});
  } else if (p.gamma_lo > p.gamma_hi) {
    out.push_back({"BAD_BOUNDS", "gamma lower bound exceeds upper bound"});
  }

  using G = Group;
  const std::vector<G> fg{G::Theta, G::W, G::Zp};
  const std::vector<G> gg{G::Theta, G::W, G::Zp, G::S};
  const std::vector<G> dg{G::Theta, G::W, G::Zp, G::Zm};
  const std::vector<G> sg{G::S};
  check_expr(out, p, p.f, "f", "F", fg);
  const auto rows = [&](const std::vector<Expr>& es, const char* name, const char* family,
                        const std::vector<G>& allowed) {
    for (std::size_t i = 0; i < es.size(); ++i) {
      check_expr(out, p, es[i], std::string(name) + "[" + std::to_string(i) + "]", family, allowed);
    }
  };
  rows(p.g, "g", "G", gg);
  rows(p.d, "d", "D", dg);
  rows(p.e, "e", "E", dg);
  rows(p.q, "q", "Q", sg);
  rows(p.r, "r", "R", sg);
  return out;
}

std::string origin_label(const Scenario& s) {
  switch (s.origin) {
    case Scenario::Origin::Initial: return "initial";
    case Scenario::Origin::FObjective: return "f";
    case Scenario::Origin::GConstraint: return "g[" + std::to_string(s.g_index) + "]";
  }
  return "?";
}

Bindings make_bindings(std::span<const double> theta, std::span<const double> w,
              const Witness& z, double gamma) {
  Bindings b;
  b[Group::Theta].assign(theta.begin(), theta.end());
  b[Group::W].assign(w.begin(), w.end());
  b[Group::Zp] = z.zp;
  b[Group::Zm] = z.zm;
  b[Group::S] = z.s;
  b[Group::Gamma] = {gamma};
  return b;
}

}  // namespace sipred
