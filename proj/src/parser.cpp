#include <cctype>
#include <charconv>
#include <cmath>
#include <optional>

#include "sipred/expr.hpp"

namespace sipred {

namespace {

struct Parsed {
  Expr expr;
  // a bare numeric literal, neither parenthesized nor raised to a power
  bool literal = false;
};

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  Expr parse_all() {
    Expr e = parse_sum();
    skip_space();
    if (pos_ != text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& message) const { throw ParseError(message, pos_); }
  [[noreturn]] void fail_at(const std::string& message, std::size_t at) const {
    throw ParseError(message, at);
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) fail(std::string("expected '") + c + "'");
  }

  // sum := product (('+' | '-') product)*
  Expr parse_sum() {
    Expr lhs = parse_product();
    for (;;) {
      if (accept('+')) {
        lhs = Expr::binary(BinaryOp::Add, lhs, parse_product());
      } else if (accept('-')) {
        lhs = Expr::binary(BinaryOp::Sub, lhs, parse_product());
      } else {
        return lhs;
      }
    }
  }

  // product := unary (('*' | '/') unary)*
  Expr parse_product() {
    Expr lhs = parse_unary().expr;
    for (;;) {
      if (accept('*')) {
        lhs = Expr::binary(BinaryOp::Mul, lhs, parse_unary().expr);
      } else if (accept('/')) {
        lhs = Expr::binary(BinaryOp::Div, lhs, parse_unary().expr);
      } else {
        return lhs;
      }
    }
  }

  // unary := '-' unary | power
  Parsed parse_unary() {
    if (accept('-')) {
      Parsed operand = parse_unary();
      if (operand.literal) return {Expr::constant(-operand.expr.constant_value()), false};
      return {Expr::unary(UnaryOp::Neg, operand.expr), false};
    }
    return parse_power();
  }

  // power := primary ('^' unary)?   exponent must be a constant
  Parsed parse_power() {
    Parsed base = parse_primary();
    if (!accept('^')) return base;
    skip_space();
    const std::size_t at = pos_;
    Parsed exponent = parse_unary();
    if (!exponent.expr.is_constant()) fail_at("non-constant exponent", at);
    return {Expr::binary(BinaryOp::Pow, base.expr, exponent.expr), false};
  }

  Parsed parse_primary() {
    skip_space();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      Expr inner = parse_sum();
      expect(')');
      return {inner, false};
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return {parse_number(), true};
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return {parse_identifier(), false};
    fail(std::string("unexpected '") + c + "'");
  }

  Expr parse_number() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.')) {
      ++pos_;
    }
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t p = pos_ + 1;
      if (p < text_.size() && (text_[p] == '+' || text_[p] == '-')) ++p;
      if (p < text_.size() && std::isdigit(static_cast<unsigned char>(text_[p]))) {
        pos_ = p;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      }
    }
    double value = 0.0;
    const char* first = text_.data() + start;
    const char* last = text_.data() + pos_;
    auto res = std::from_chars(first, last, value);
    if (res.ec != std::errc() || res.ptr != last) fail_at("malformed number", start);
    return Expr::constant(value);
  }

  std::size_t parse_index() {
    expect('[');
    skip_space();
    const std::size_t start = pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (start == pos_) fail("expected index");
    std::size_t value = 0;
    auto res = std::from_chars(text_.data() + start, text_.data() + pos_, value);
    if (res.ec != std::errc()) fail_at("index out of range", start);
    expect(']');
    return value;
  }

  Expr parse_identifier() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
      ++pos_;
    }
    const std::string_view name = text_.substr(start, pos_ - start);

    static constexpr std::pair<std::string_view, Group> kIndexed[] = {
        {"theta", Group::Theta}, {"w", Group::W},   {"zp", Group::Zp},
        {"zm", Group::Zm},       {"s", Group::S},   {"aux", Group::Aux}};
    for (const auto& [n, g] : kIndexed) {
      if (name == n) return Expr::variable(g, parse_index());
    }
    if (name == "gamma") return Expr::variable(Group::Gamma, 0);

    static constexpr std::pair<std::string_view, UnaryOp> kFunctions[] = {
        {"exp", UnaryOp::Exp}, {"log", UnaryOp::Log}, {"sqrt", UnaryOp::Sqrt},
        {"sin", UnaryOp::Sin}, {"cos", UnaryOp::Cos}};
    for (const auto& [n, op] : kFunctions) {
      if (name == n) {
        expect('(');
        Expr arg = parse_sum();
        expect(')');
        return Expr::unary(op, arg);
      }
    }
    fail_at("unknown identifier '" + std::string(name) + "'", start);
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

Expr parse(std::string_view text) { return Parser(text).parse_all(); }

}  // namespace sipred
