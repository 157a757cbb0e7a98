#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace sipred {

/// Variable groups of the robust problem. `Aux` holds solver-introduced
/// scalars such as the epigraph level of a constraint adversary.
enum class Group : std::uint8_t { Theta, W, Zp, Zm, S, Gamma, Aux };

inline constexpr std::size_t kGroupCount = 7;

std::string_view group_name(Group g);

struct VarRef {
  Group group = Group::Theta;
  std::size_t index = 0;

  friend auto operator<=>(const VarRef&, const VarRef&) = default;
};

enum class UnaryOp : std::uint8_t { Neg, Exp, Log, Sqrt, Sin, Cos };
enum class BinaryOp : std::uint8_t { Add, Sub, Mul, Div, Pow };

std::string_view unary_name(UnaryOp op);

struct ExprNode;

/// Immutable, shared expression tree. Copies share structure.
///
/// The node set is deliberately smooth: there is no min/max/abs. Disjunctive
/// constraints have to be written with explicit smoothing multipliers.
class Expr {
 public:
  Expr();  // Constant 0
  Expr(double value);  // NOLINT(google-explicit-constructor)

  static Expr constant(double value);
  static Expr variable(Group group, std::size_t index);
  static Expr variable(VarRef ref);
  static Expr unary(UnaryOp op, Expr child);
  /// Throws std::invalid_argument for Pow with a non-constant exponent.
  static Expr binary(BinaryOp op, Expr left, Expr right);

  const ExprNode& node() const { return *node_; }

  bool is_constant() const;
  /// Value of a Constant node. Precondition: is_constant().
  double constant_value() const;

  friend bool operator==(const Expr& a, const Expr& b);

 private:
  explicit Expr(std::shared_ptr<const ExprNode> node) : node_(std::move(node)) {}
  std::shared_ptr<const ExprNode> node_;
};

struct ConstantNode {
  double value;
};
struct VariableNode {
  VarRef ref;
};
struct UnaryNode {
  UnaryOp op;
  Expr child;
};
struct BinaryNode {
  BinaryOp op;
  Expr left;
  Expr right;
};

struct ExprNode {
  std::variant<ConstantNode, VariableNode, UnaryNode, BinaryNode> value;
};

Expr operator-(const Expr& a);
Expr operator+(const Expr& a, const Expr& b);
Expr operator-(const Expr& a, const Expr& b);
Expr operator*(const Expr& a, const Expr& b);
Expr operator/(const Expr& a, const Expr& b);
Expr pow(const Expr& base, double exponent);
Expr exp(const Expr& a);
Expr log(const Expr& a);
Expr sqrt(const Expr& a);
Expr sin(const Expr& a);
Expr cos(const Expr& a);

/// Shorthands for building problem functions in code.
namespace vars {
Expr theta(std::size_t i);
Expr w(std::size_t i);
Expr zp(std::size_t i);
Expr zm(std::size_t i);
Expr s(std::size_t i);
Expr aux(std::size_t i);
Expr gamma();
}  // namespace vars

/// Values for every variable group, indexed by Group.
struct Bindings {
  std::array<std::vector<double>, kGroupCount> values;

  std::vector<double>& operator[](Group g) { return values[static_cast<std::size_t>(g)]; }
  const std::vector<double>& operator[](Group g) const {
    return values[static_cast<std::size_t>(g)];
  }
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message, std::size_t offset);
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

/// Domain error or unbound variable during evaluation. `node()` is the
/// printed form of the offending subexpression.
class EvalError : public std::runtime_error {
 public:
  EvalError(const std::string& message, std::string node);
  const std::string& node() const { return node_; }

 private:
  std::string node_;
};

/// Parses the infix grammar: literals, theta[i], w[i], zp[i], zm[i], s[i],
/// aux[i], gamma, + - * / ^, unary minus, parentheses and exp/log/sqrt/sin/cos.
/// `^` is right-associative and binds tighter than unary minus; its exponent
/// must be a numeric literal (optionally negative).
Expr parse(std::string_view text);

/// Canonical printer. parse(to_string(e)) reproduces e for every e returned
/// by parse.
std::string to_string(const Expr& e);

double eval(const Expr& e, const Bindings& b);

/// Exact partial derivatives of `e` with respect to every component of
/// `group`, sized to b[group].
std::vector<double> gradient(const Expr& e, const Bindings& b, Group group);

/// Sorted, de-duplicated variable references reachable from `e`.
std::vector<VarRef> variables(const Expr& e);

std::size_t node_count(const Expr& e);

}  // namespace sipred
