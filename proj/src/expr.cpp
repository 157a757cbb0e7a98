#include "sipred/expr.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>

#include "sipred/tape.hpp"

namespace sipred {

std::string_view group_name(Group g) {
  switch (g) {
    case Group::Theta: return "theta";
    case Group::W: return "w";
    case Group::Zp: return "zp";
    case Group::Zm: return "zm";
    case Group::S: return "s";
    case Group::Gamma: return "gamma";
    case Group::Aux: return "aux";
  }
  return "?";
}

std::string_view unary_name(UnaryOp op) {
  switch (op) {
    case UnaryOp::Neg: return "-";
    case UnaryOp::Exp: return "exp";
    case UnaryOp::Log: return "log";
    case UnaryOp::Sqrt: return "sqrt";
    case UnaryOp::Sin: return "sin";
    case UnaryOp::Cos: return "cos";
  }
  return "?";
}

Expr::Expr() : Expr(0.0) {}

Expr::Expr(double value)
    : node_(std::make_shared<const ExprNode>(ExprNode{ConstantNode{value}})) {}

Expr Expr::constant(double value) { return Expr(value); }

Expr Expr::variable(Group group, std::size_t index) { return variable(VarRef{group, index}); }

Expr Expr::variable(VarRef ref) {
  return Expr(std::make_shared<const ExprNode>(ExprNode{VariableNode{ref}}));
}

Expr Expr::unary(UnaryOp op, Expr child) {
  return Expr(std::make_shared<const ExprNode>(ExprNode{UnaryNode{op, std::move(child)}}));
}

Expr Expr::binary(BinaryOp op, Expr left, Expr right) {
  if (op == BinaryOp::Pow && !right.is_constant()) {
    throw std::invalid_argument("pow exponent must be a constant");
  }
  return Expr(std::make_shared<const ExprNode>(
      ExprNode{BinaryNode{op, std::move(left), std::move(right)}}));
}

bool Expr::is_constant() const { return std::holds_alternative<ConstantNode>(node_->value); }

double Expr::constant_value() const { return std::get<ConstantNode>(node_->value).value; }

bool operator==(const Expr& a, const Expr& b) {
  if (a.node_ == b.node_) return true;
  const auto& x = a.node_->value;
  const auto& y = b.node_->value;
  if (x.index() != y.index()) return false;
  return std::visit(
      [&](const auto& lhs) -> bool {
        using T = std::decay_t<decltype(lhs)>;
        const auto& rhs = std::get<T>(y);
        if constexpr (std::is_same_v<T, ConstantNode>) {
          // bitwise-equal doubles (distinguishes -0 from 0 as the printer does)
          return std::signbit(lhs.value) == std::signbit(rhs.value) && lhs.value == rhs.value;
        } else if constexpr (std::is_same_v<T, VariableNode>) {
          return lhs.ref == rhs.ref;
        } else if constexpr (std::is_same_v<T, UnaryNode>) {
          return lhs.op == rhs.op && lhs.child == rhs.child;
        } else {
          return lhs.op == rhs.op && lhs.left == rhs.left && lhs.right == rhs.right;
        }
      },
      x);
}

Expr operator-(const Expr& a) { return Expr::unary(UnaryOp::Neg, a); }
Expr operator+(const Expr& a, const Expr& b) { return Expr::binary(BinaryOp::Add, a, b); }
Expr operator-(const Expr& a, const Expr& b) { return Expr::binary(BinaryOp::Sub, a, b); }
Expr operator*(const Expr& a, const Expr& b) { return Expr::binary(BinaryOp::Mul, a, b); }
Expr operator/(const Expr& a, const Expr& b) { return Expr::binary(BinaryOp::Div, a, b); }
Expr pow(const Expr& base, double exponent) {
  return Expr::binary(BinaryOp::Pow, base, Expr::constant(exponent));
}
Expr exp(const Expr& a) { return Expr::unary(UnaryOp::Exp, a); }
Expr log(const Expr& a) { return Expr::unary(UnaryOp::Log, a); }
Expr sqrt(const Expr& a) { return Expr::unary(UnaryOp::Sqrt, a); }
Expr sin(const Expr& a) { return Expr::unary(UnaryOp::Sin, a); }
Expr cos(const Expr& a) { return Expr::unary(UnaryOp::Cos, a); }

namespace vars {
Expr theta(std::size_t i) { return Expr::variable(Group::Theta, i); }
Expr w(std::size_t i) { return Expr::variable(Group::W, i); }
Expr zp(std::size_t i) { return Expr::variable(Group::Zp, i); }
Expr zm(std::size_t i) { return Expr::variable(Group::Zm, i); }
Expr s(std::size_t i) { return Expr::variable(Group::S, i); }
Expr aux(std::size_t i) { return Expr::variable(Group::Aux, i); }
Expr gamma() { return Expr::variable(Group::Gamma, 0); }
}  // namespace vars

ParseError::ParseError(const std::string& message, std::size_t offset)
    : std::runtime_error(message + " at offset " + std::to_string(offset)), offset_(offset) {}

EvalError::EvalError(const std::string& message, std::string node)
    : std::runtime_error(message + " in '" + node + "'"), node_(std::move(node)) {}

// ---------------------------------------------------------------------------
// Printer

namespace {

// Binding strength used to decide where parentheses are required.
constexpr int kPrecAdd = 1;
constexpr int kPrecMul = 2;
constexpr int kPrecUnary = 3;
constexpr int kPrecPow = 4;
constexpr int kPrecAtom = 5;

int precedence(const Expr& e) {
  return std::visit(
      [](const auto& n) -> int {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, ConstantNode>) {
          return std::signbit(n.value) ? kPrecUnary : kPrecAtom;
        } else if constexpr (std::is_same_v<T, VariableNode>) {
          return kPrecAtom;
        } else if constexpr (std::is_same_v<T, UnaryNode>) {
          return n.op == UnaryOp::Neg ? kPrecUnary : kPrecAtom;
        } else {
          switch (n.op) {
            case BinaryOp::Add:
            case BinaryOp::Sub: return kPrecAdd;
            case BinaryOp::Mul:
            case BinaryOp::Div: return kPrecMul;
            case BinaryOp::Pow: return kPrecPow;
          }
          return kPrecAtom;
        }
      },
      e.node().value);
}

void format_number(double v, std::string& out) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

void print(const Expr& e, std::string& out);

void print_wrapped(const Expr& e, bool wrap, std::string& out) {
  if (wrap) out.push_back('(');
  print(e, out);
  if (wrap) out.push_back(')');
}

void print(const Expr& e, std::string& out) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, ConstantNode>) {
          format_number(n.value, out);
        } else if constexpr (std::is_same_v<T, VariableNode>) {
          out.append(group_name(n.ref.group));
          if (n.ref.group != Group::Gamma) {
            out.push_back('[');
            out.append(std::to_string(n.ref.index));
            out.push_back(']');
          }
        } else if constexpr (std::is_same_v<T, UnaryNode>) {
          if (n.op == UnaryOp::Neg) {
            out.push_back('-');
            // "-2" would read back as the literal -2, so a negated
            // nonnegative constant keeps its parentheses.
            const bool literal_clash = n.child.is_constant() && !std::signbit(n.child.constant_value());
            print_wrapped(n.child, literal_clash || precedence(n.child) < kPrecUnary, out);
          } else {
            out.append(unary_name(n.op));
            out.push_back('(');
            print(n.child, out);
            out.push_back(')');
          }
        } else {
          const int p = precedence(e);
          if (n.op == BinaryOp::Pow) {
            print_wrapped(n.left, precedence(n.left) <= kPrecPow, out);
            out.push_back('^');
            print(n.right, out);
            return;
          }
          print_wrapped(n.left, precedence(n.left) < p, out);
          switch (n.op) {
            case BinaryOp::Add: out.append(" + "); break;
            case BinaryOp::Sub: out.append(" - "); break;
            case BinaryOp::Mul: out.append("*"); break;
            case BinaryOp::Div: out.append("/"); break;
            case BinaryOp::Pow: break;
          }
          print_wrapped(n.right, precedence(n.right) <= p, out);
        }
      },
      e.node().value);
}

}  // namespace

std::string to_string(const Expr& e) {
  std::string out;
  print(e, out);
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

double lookup(const VarRef& ref, const Bindings& b, const Expr& e) {
  const auto& v = b[ref.group];
  if (ref.index >= v.size()) throw EvalError("unbound variable", to_string(e));
  return v[ref.index];
}

double eval_node(const Expr& e, const Bindings& b) {
  return std::visit(
      [&](const auto& n) -> double {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, ConstantNode>) {
          return n.value;
        } else if constexpr (std::is_same_v<T, VariableNode>) {
          return lookup(n.ref, b, e);
        } else if constexpr (std::is_same_v<T, UnaryNode>) {
          const double x = eval_node(n.child, b);
          switch (n.op) {
            case UnaryOp::Neg: return -x;
            case UnaryOp::Exp: return std::exp(x);
            case UnaryOp::Log:
              if (!(x > 0.0)) throw EvalError("log of non-positive value", to_string(e));
              return std::log(x);
            case UnaryOp::Sqrt:
              if (!(x >= 0.0)) throw EvalError("sqrt of negative value", to_string(e));
              return std::sqrt(x);
            case UnaryOp::Sin: return std::sin(x);
            case UnaryOp::Cos: return std::cos(x);
          }
          return x;
        } else {
          const double l = eval_node(n.left, b);
          const double r = eval_node(n.right, b);
          switch (n.op) {
            case BinaryOp::Add: return l + r;
            case BinaryOp::Sub: return l - r;
            case BinaryOp::Mul: return l * r;
            case BinaryOp::Div:
              if (r == 0.0) throw EvalError("division by zero", to_string(e));
              return l / r;
            case BinaryOp::Pow:
              if (l < 0.0 && r != std::floor(r)) {
                throw EvalError("fractional power of negative value", to_string(e));
              }
              if (l == 0.0 && r < 0.0) throw EvalError("division by zero", to_string(e));
              return std::pow(l, r);
          }
          return l;
        }
      },
      e.node().value);
}

void collect(const Expr& e, std::vector<VarRef>& out) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, VariableNode>) {
          out.push_back(n.ref);
        } else if constexpr (std::is_same_v<T, UnaryNode>) {
          collect(n.child, out);
        } else if constexpr (std::is_same_v<T, BinaryNode>) {
          collect(n.left, out);
          collect(n.right, out);
        }
      },
      e.node().value);
}

}  // namespace

double eval(const Expr& e, const Bindings& b) { return eval_node(e, b); }

std::vector<double> gradient(const Expr& e, const Bindings& b, Group group) {
  // eval first so domain errors surface with the offending node
  (void)eval(e, b);
  const auto& gv = b[group];
  Tape tape = Tape::compile(e, [&](const VarRef& ref) -> Operand {
    if (ref.group == group) return Operand::at(ref.index);
    return Operand::constant(b[ref.group].at(ref.index));
  });
  std::vector<double> grad(gv.size(), 0.0);
  tape.accumulate_gradient(gv, 1.0, grad);
  return grad;
}

std::vector<VarRef> variables(const Expr& e) {
  std::vector<VarRef> out;
  collect(e, out);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::size_t node_count(const Expr& e) {
  return std::visit(
      [](const auto& n) -> std::size_t {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, UnaryNode>) {
          return 1 + node_count(n.child);
        } else if constexpr (std::is_same_v<T, BinaryNode>) {
          return 1 + node_count(n.left) + node_count(n.right);
        } else {
          return 1;
        }
      },
      e.node().value);
}

}  // namespace sipred
