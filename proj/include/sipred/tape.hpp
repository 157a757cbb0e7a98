#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "sipred/expr.hpp"

namespace sipred {

/// What a variable reference compiles to: a position in the flat decision
/// vector or a value frozen into the program.
struct Operand {
  bool is_constant = false;
  std::size_t slot = 0;
  double value = 0.0;

  static Operand at(std::size_t s) { return Operand{false, s, 0.0}; }
  static Operand constant(double v) { return Operand{true, 0, v}; }
};

using Resolver = std::function<Operand(const VarRef&)>;

/// c + sum coeff_i * x[slot_i]
struct AffineForm {
  double constant = 0.0;
  std::vector<std::pair<std::size_t, double>> terms;  // sorted by slot, no zeros
};

/// An expression flattened into straight-line code over a decision vector.
/// Evaluation never throws: domain violations produce NaN or inf so line
/// searches can back off.
class Tape {
 public:
  Tape() = default;

  static Tape compile(const Expr& e, const Resolver& resolve);

  double value(std::span<const double> x) const;

  /// Adds scale * d(value)/dx into grad and returns the value.
  double accumulate_gradient(std::span<const double> x, double scale, std::span<double> grad) const;

  /// As above, with the scale chosen from the value once it is known
  /// (a zero scale skips the reverse sweep).
  double accumulate_gradient(std::span<const double> x,
                             const std::function<double(double)>& scale_of_value,
                             std::span<double> grad) const;

  /// Exact affine decomposition if the program is affine in x.
  std::optional<AffineForm> affine() const;

  /// Unique slots read by the program, ascending.
  const std::vector<std::size_t>& slots() const { return slots_; }

  std::size_t size() const { return code_.size(); }

 private:
  enum class Op : std::uint8_t {
    Const, Load, Neg, Exp, Log, Sqrt, Sin, Cos, Add, Sub, Mul, Div, PowC, Square
  };
  struct Instr {
    Op op;
    std::uint32_t a;  // operand index, or slot for Load
    std::uint32_t b;
    double c;  // constant value or exponent
  };

  std::uint32_t emit(const Expr& e, const Resolver& resolve);
  void forward(std::span<const double> x, std::vector<double>& v) const;
  void backward(const std::vector<double>& v, double scale, std::span<double> grad) const;

  std::vector<Instr> code_;
  std::vector<std::size_t> slots_;
};

}  // namespace sipred
