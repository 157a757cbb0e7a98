#include "sipred/tape.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace sipred {

Tape Tape::compile(const Expr& e, const Resolver& resolve) {
  Tape t;
  t.emit(e, resolve);
  for (const Instr& in : t.code_) {
    if (in.op == Op::Load) t.slots_.push_back(in.a);
  }
  std::sort(t.slots_.begin(), t.slots_.end());
  t.slots_.erase(std::unique(t.slots_.begin(), t.slots_.end()), t.slots_.end());
  return t;
}

std::uint32_t Tape::emit(const Expr& e, const Resolver& resolve) {
  const auto push = [this](Op op, std::uint32_t a, std::uint32_t b, double c) {
    code_.push_back(Instr{op, a, b, c});
    return static_cast<std::uint32_t>(code_.size() - 1);
  };
  return std::visit(
      [&](const auto& n) -> std::uint32_t {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, ConstantNode>) {
          return push(Op::Const, 0, 0, n.value);
        } else if constexpr (std::is_same_v<T, VariableNode>) {
          const Operand o = resolve(n.ref);
          if (o.is_constant) return push(Op::Const, 0, 0, o.value);
          return push(Op::Load, static_cast<std::uint32_t>(o.slot), 0, 0.0);
        } else if constexpr (std::is_same_v<T, UnaryNode>) {
          const std::uint32_t a = emit(n.child, resolve);
          switch (n.op) {
            case UnaryOp::Neg: return push(Op::Neg, a, 0, 0.0);
            case UnaryOp::Exp: return push(Op::Exp, a, 0, 0.0);
            case UnaryOp::Log: return push(Op::Log, a, 0, 0.0);
            case UnaryOp::Sqrt: return push(Op::Sqrt, a, 0, 0.0);
            case UnaryOp::Sin: return push(Op::Sin, a, 0, 0.0);
            case UnaryOp::Cos: return push(Op::Cos, a, 0, 0.0);
          }
          return a;
        } else {
          const std::uint32_t a = emit(n.left, resolve);
          if (n.op == BinaryOp::Pow) {
            const double c = n.right.constant_value();
            if (c == 2.0) return push(Op::Square, a, 0, c);
            return push(Op::PowC, a, 0, c);
          }
          const std::uint32_t b = emit(n.right, resolve);
          switch (n.op) {
            case BinaryOp::Add: return push(Op::Add, a, b, 0.0);
            case BinaryOp::Sub: return push(Op::Sub, a, b, 0.0);
            case BinaryOp::Mul: return push(Op::Mul, a, b, 0.0);
            case BinaryOp::Div: return push(Op::Div, a, b, 0.0);
            case BinaryOp::Pow: break;
          }
          return a;
        }
      },
      e.node().value);
}

void Tape::forward(std::span<const double> x, std::vector<double>& v) const {
  v.resize(code_.size());
  for (std::size_t i = 0; i < code_.size(); ++i) {
    const Instr& in = code_[i];
    switch (in.op) {
      case Op::Const: v[i] = in.c; break;
      case Op::Load: v[i] = x[in.a]; break;
      case Op::Neg: v[i] = -v[in.a]; break;
      case Op::Exp: v[i] = std::exp(v[in.a]); break;
      case Op::Log: v[i] = v[in.a] > 0.0 ? std::log(v[in.a]) : std::nan(""); break;
      case Op::Sqrt: v[i] = v[in.a] >= 0.0 ? std::sqrt(v[in.a]) : std::nan(""); break;
      case Op::Sin: v[i] = std::sin(v[in.a]); break;
      case Op::Cos: v[i] = std::cos(v[in.a]); break;
      case Op::Add: v[i] = v[in.a] + v[in.b]; break;
      case Op::Sub: v[i] = v[in.a] - v[in.b]; break;
      case Op::Mul: v[i] = v[in.a] * v[in.b]; break;
      case Op::Div: v[i] = v[in.a] / v[in.b]; break;
      case Op::Square: v[i] = v[in.a] * v[in.a]; break;
      case Op::PowC: v[i] = std::pow(v[in.a], in.c); break;
    }
  }
}

double Tape::value(std::span<const double> x) const {
  thread_local std::vector<double> v;
  forward(x, v);
  return v.empty() ? 0.0 : v.back();
}

double Tape::accumulate_gradient(std::span<const double> x, double scale,
                                 std::span<double> grad) const {
  thread_local std::vector<double> v;
  forward(x, v);
  if (v.empty()) return 0.0;
  backward(v, scale, grad);
  return v.back();
}

double Tape::accumulate_gradient(std::span<const double> x,
                                 const std::function<double(double)>& scale_of_value,
                                 std::span<double> grad) const {
  thread_local std::vector<double> v;
  forward(x, v);
  if (v.empty()) return 0.0;
  const double scale = scale_of_value(v.back());
  if (scale != 0.0) backward(v, scale, grad);
  return v.back();
}

void Tape::backward(const std::vector<double>& v, double scale, std::span<double> grad) const {
  thread_local std::vector<double> adj;
  adj.assign(code_.size(), 0.0);
  adj.back() = scale;
  for (std::size_t i = code_.size(); i-- > 0;) {
    const double g = adj[i];
    if (g == 0.0) continue;
    const Instr& in = code_[i];
    switch (in.op) {
      case Op::Const: break;
      case Op::Load: grad[in.a] += g; break;
      case Op::Neg: adj[in.a] -= g; break;
      case Op::Exp: adj[in.a] += g * v[i]; break;
      case Op::Log: adj[in.a] += g / v[in.a]; break;
      case Op::Sqrt: adj[in.a] += g * 0.5 / v[i]; break;
      case Op::Sin: adj[in.a] += g * std::cos(v[in.a]); break;
      case Op::Cos: adj[in.a] -= g * std::sin(v[in.a]); break;
      case Op::Add:
        adj[in.a] += g;
        adj[in.b] += g;
        break;
      case Op::Sub:
        adj[in.a] += g;
        adj[in.b] -= g;
        break;
      case Op::Mul:
        adj[in.a] += g * v[in.b];
        adj[in.b] += g * v[in.a];
        break;
      case Op::Div:
        adj[in.a] += g / v[in.b];
        adj[in.b] -= g * v[i] / v[in.b];
        break;
      case Op::Square: adj[in.a] += 2.0 * g * v[in.a]; break;
      case Op::PowC:
        if (in.c != 0.0) adj[in.a] += g * in.c * std::pow(v[in.a], in.c - 1.0);
        break;
    }
  }
}

std::optional<AffineForm> Tape::affine() const {
  // Abstract interpretation over affine forms; any nonlinear use of a
  // non-constant operand gives up.
  struct Form {
    double c = 0.0;
    std::map<std::size_t, double> t;
    bool is_const() const { return t.empty(); }
  };
  std::vector<Form> f(code_.size());
  const auto scaled = [](const Form& a, double k) {
    Form r;
    r.c = a.c * k;
    if (k != 0.0) {
      for (const auto& [s, v] : a.t) r.t[s] = v * k;
    }
    return r;
  };
  const auto combine = [](const Form& a, const Form& b, double sign) {
    Form r = a;
    r.c += sign * b.c;
    for (const auto& [s, v] : b.t) {
      double& dst = r.t[s];
      dst += sign * v;
      if (dst == 0.0) r.t.erase(s);
    }
    return r;
  };
  for (std::size_t i = 0; i < code_.size(); ++i) {
    const Instr& in = code_[i];
    switch (in.op) {
      case Op::Const: f[i].c = in.c; break;
      case Op::Load: f[i].t[in.a] = 1.0; break;
      case Op::Neg: f[i] = scaled(f[in.a], -1.0); break;
      case Op::Add: f[i] = combine(f[in.a], f[in.b], 1.0); break;
      case Op::Sub: f[i] = combine(f[in.a], f[in.b], -1.0); break;
      case Op::Mul:
        if (f[in.a].is_const()) {
          f[i] = scaled(f[in.b], f[in.a].c);
        } else if (f[in.b].is_const()) {
          f[i] = scaled(f[in.a], f[in.b].c);
        } else {
          return std::nullopt;
        }
        break;
      case Op::Div:
        if (!f[in.b].is_const() || f[in.b].c == 0.0) return std::nullopt;
        f[i] = scaled(f[in.a], 1.0 / f[in.b].c);
        break;
      default: {
        // other ops are affine only when their operand is constant
        if (!f[in.a].is_const()) return std::nullopt;
        double r = 0.0;
        const double a = f[in.a].c;
        switch (in.op) {
          case Op::Exp: r = std::exp(a); break;
          case Op::Log: r = a > 0.0 ? std::log(a) : std::nan(""); break;
          case Op::Sqrt: r = a >= 0.0 ? std::sqrt(a) : std::nan(""); break;
          case Op::Sin: r = std::sin(a); break;
          case Op::Cos: r = std::cos(a); break;
          case Op::Square: r = a * a; break;
          case Op::PowC: r = std::pow(a, in.c); break;
          default: return std::nullopt;
        }
        f[i].c = r;
        break;
      }
    }
  }
  if (f.empty()) return AffineForm{};
  AffineForm out;
  out.constant = f.back().c;
  for (const auto& [s, v] : f.back().t) {
    if (v != 0.0) out.terms.emplace_back(s, v);
  }
  return out;
}

}  // namespace sipred
