#pragma once
// Real-valued expressions in the fixed variables x1, x2, y1, y2.
//
// Grammar (whitespace is insignificant):
//
//   expr     = term { ("+" | "-") term } ;
//   term     = unary { ("*" | "/") unary } ;
//   unary    = ("-" | "+") unary | power ;
//   power    = primary [ "^" integer ] ;
//   integer  = [ "-" ] digits | "(" [ "-" ] digits ")" ;
//   primary  = number | "pi" | variable | function "(" expr ")" | "(" expr ")" ;
//   variable = "x1" | "x2" | "y1" | "y2" ;
//   function = "sin" | "cos" | "exp" | "sqrt" | "abs" | "sign" ;
//
// `^` binds tighter than unary minus, so -x^2 == -(x^2). Exponents are
// integer literals only. `sign` is the derivative of `abs`; it is accepted by
// the parser so that printed derivatives re-parse.

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "thinhomog/error.hpp"

namespace thinhomog {

enum class Var : std::uint8_t { x1 = 0, x2 = 1, y1 = 2, y2 = 3 };

inline constexpr std::array<std::string_view, 4> kVarNames{"x1", "x2", "y1", "y2"};

inline constexpr unsigned var_bit(Var v) { return 1u << static_cast<unsigned>(v); }

inline std::string_view var_name(Var v) { return kVarNames[static_cast<std::size_t>(v)]; }

inline bool lookup_var(std::string_view name, Var& out) {
  for (std::size_t i = 0; i < kVarNames.size(); ++i) {
    if (kVarNames[i] == name) {
      out = static_cast<Var>(i);
      return true;
    }
  }
  return false;
}

enum class Op : std::uint8_t {
  constant,
  pi,
  variable,
  neg,
  sin,
  cos,
  exp,
  sqrt,
  abs,
  sign,
  add,
  sub,
  mul,
  div,
  pow,
};

/// Values for the four variables plus a mask of which ones are bound.
struct Coords {
  std::array<double, 4> value{};
  unsigned bound = 0;

  Coords() = default;
  Coords(double x1, double x2, double y1, double y2) : value{x1, x2, y1, y2}, bound(0xF) {}

  Coords& set(Var v, double x) {
    value[static_cast<std::size_t>(v)] = x;
    bound |= var_bit(v);
    return *this;
  }
  double get(Var v) const { return value[static_cast<std::size_t>(v)]; }
};

/// Ordered name -> value association; each name at most once.
class Bindings {
public:
  Bindings() = default;
  Bindings(std::initializer_list<std::pair<std::string, double>> init) {
    for (const auto& [k, v] : init) set(k, v);
  }

  Bindings& set(const std::string& name, double value) {
    for (const auto& entry : entries_) {
      if (entry.first == name) throw Error("variable '" + name + "' bound twice");
    }
    Var v = Var::x1;
    if (!lookup_var(name, v)) throw UnknownIdentifier(0, name);
    entries_.emplace_back(name, value);
    return *this;
  }

  const std::vector<std::pair<std::string, double>>& entries() const { return entries_; }

  Coords coords() const {
    Coords c;
    for (const auto& [name, value] : entries_) {
      Var v = Var::x1;
      lookup_var(name, v);
      c.set(v, value);
    }
    return c;
  }

private:
  std::vector<std::pair<std::string, double>> entries_;
};

class Expr;

namespace detail {

struct Node {
  Op op = Op::constant;
  double value = 0.0;
  Var var = Var::x1;
  int exponent = 0;
  std::shared_ptr<const Node> lhs;
  std::shared_ptr<const Node> rhs;
  unsigned free_mask = 0;
  bool has_abs = false;
};

using NodePtr = std::shared_ptr<const Node>;

} // namespace detail

/// Immutable expression tree. Copies share structure.
class Expr {
public:
  Expr() : Expr(constant(0.0)) {}

  static Expr constant(double v) {
    if (v < 0.0 || (v == 0.0 && std::signbit(v))) return negate(constant(-v));
    auto n = std::make_shared<detail::Node>();
    n->op = Op::constant;
    n->value = v;
    return Expr(std::move(n));
  }

  static Expr pi() {
    auto n = std::make_shared<detail::Node>();
    n->op = Op::pi;
    n->value = std::numbers::pi;
    return Expr(std::move(n));
  }

  static Expr variable(Var v) {
    auto n = std::make_shared<detail::Node>();
    n->op = Op::variable;
    n->var = v;
    n->free_mask = var_bit(v);
    return Expr(std::move(n));
  }

  static Expr unary(Op op, const Expr& arg) {
    auto n = std::make_shared<detail::Node>();
    n->op = op;
    n->lhs = arg.node_;
    n->free_mask = arg.node_->free_mask;
    n->has_abs = arg.node_->has_abs || op == Op::abs;
    return Expr(std::move(n));
  }

  static Expr negate(const Expr& arg) { return unary(Op::neg, arg); }

  static Expr binary(Op op, const Expr& lhs, const Expr& rhs) {
    auto n = std::make_shared<detail::Node>();
    n->op = op;
    n->lhs = lhs.node_;
    n->rhs = rhs.node_;
    n->free_mask = lhs.node_->free_mask | rhs.node_->free_mask;
    n->has_abs = lhs.node_->has_abs || rhs.node_->has_abs;
    return Expr(std::move(n));
  }

  static Expr power(const Expr& base, int exponent) {
    auto n = std::make_shared<detail::Node>();
    n->op = Op::pow;
    n->lhs = base.node_;
    n->exponent = exponent;
    n->free_mask = base.node_->free_mask;
    n->has_abs = base.node_->has_abs;
    return Expr(std::move(n));
  }

  Op op() const { return node_->op; }
  double value() const { return node_->value; }
  Var var() const { return node_->var; }
  int exponent() const { return node_->exponent; }
  Expr lhs() const { return Expr(node_->lhs); }
  Expr rhs() const { return Expr(node_->rhs); }

  unsigned free_mask() const { return node_->free_mask; }
  bool depends_on(Var v) const { return (node_->free_mask & var_bit(v)) != 0; }
  bool contains_abs() const { return node_->has_abs; }
  bool is_constant(double v) const { return node_->op == Op::constant && node_->value == v; }

  std::vector<std::string> free_variables() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < kVarNames.size(); ++i) {
      if (node_->free_mask & (1u << i)) out.emplace_back(kVarNames[i]);
    }
    return out;
  }

  /// Structural equality.
  friend bool operator==(const Expr& a, const Expr& b) { return equal(a.node_.get(), b.node_.get()); }

  /// Evaluates at `c`; every free variable must be bound.
  double operator()(const Coords& c) const {
    const unsigned missing = node_->free_mask & ~c.bound;
    if (missing != 0) {
      for (std::size_t i = 0; i < kVarNames.size(); ++i) {
        if (missing & (1u << i)) throw UnboundVariable(std::string(kVarNames[i]));
      }
    }
    return eval_node(*node_, c);
  }

  double operator()(double x1, double x2, double y1, double y2) const {
    return (*this)(Coords(x1, x2, y1, y2));
  }

  std::string to_string() const {
    std::string out;
    print(*node_, out);
    return out;
  }

private:
  explicit Expr(detail::NodePtr n) : node_(std::move(n)) {}

  static bool equal(const detail::Node* a, const detail::Node* b) {
    if (a == b) return true;
    if (a == nullptr || b == nullptr) return false;
    if (a->op != b->op) return false;
    switch (a->op) {
    case Op::constant:
      return a->value == b->value;
    case Op::pi:
      return true;
    case Op::variable:
      return a->var == b->var;
    case Op::pow:
      return a->exponent == b->exponent && equal(a->lhs.get(), b->lhs.get());
    default:
      return equal(a->lhs.get(), b->lhs.get()) && equal(a->rhs.get(), b->rhs.get());
    }
  }

  static double eval_node(const detail::Node& n, const Coords& c) {
    switch (n.op) {
    case Op::constant:
    case Op::pi:
      return n.value;
    case Op::variable:
      return c.value[static_cast<std::size_t>(n.var)];
    case Op::neg:
      return -eval_node(*n.lhs, c);
    case Op::sin:
      return std::sin(eval_node(*n.lhs, c));
    case Op::cos:
      return std::cos(eval_node(*n.lhs, c));
    case Op::exp:
      return std::exp(eval_node(*n.lhs, c));
    case Op::sqrt: {
      const double a = eval_node(*n.lhs, c);
      if (a < 0.0) throw DomainError("sqrt of negative value " + std::to_string(a));
      return std::sqrt(a);
    }
    case Op::abs:
      return std::fabs(eval_node(*n.lhs, c));
    case Op::sign: {
      const double a = eval_node(*n.lhs, c);
      if (a == 0.0) throw NonDifferentiable("derivative of abs evaluated at its kink");
      return a > 0.0 ? 1.0 : -1.0;
    }
    case Op::add:
      return eval_node(*n.lhs, c) + eval_node(*n.rhs, c);
    case Op::sub:
      return eval_node(*n.lhs, c) - eval_node(*n.rhs, c);
    case Op::mul:
      return eval_node(*n.lhs, c) * eval_node(*n.rhs, c);
    case Op::div: {
      const double den = eval_node(*n.rhs, c);
      if (den == 0.0) throw DomainError("division by zero");
      return eval_node(*n.lhs, c) / den;
    }
    case Op::pow: {
      const double base = eval_node(*n.lhs, c);
      if (n.exponent < 0 && base == 0.0) throw DomainError("zero raised to a negative power");
      return int_pow(base, n.exponent);
    }
    }
    return 0.0;
  }

  static double int_pow(double base, int e) {
    const bool invert = e < 0;
    unsigned k = static_cast<unsigned>(invert ? -e : e);
    double result = 1.0;
    while (k != 0) {
      if (k & 1u) result *= base;
      base *= base;
      k >>= 1u;
    }
    return invert ? 1.0 / result : result;
  }

  // precedence levels used by the printer
  static int precedence(const detail::Node& n) {
    switch (n.op) {
    case Op::add:
    case Op::sub:
      return 1;
    case Op::mul:
    case Op::div:
      return 2;
    case Op::neg:
      return 3;
    case Op::pow:
      return 4;
    default:
      return 5;
    }
  }

  static void print_number(double v, std::string& out) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, end);
  }

  static void print_child(const detail::Node& child, bool parens, std::string& out) {
    if (parens) out.push_back('(');
    print(child, out);
    if (parens) out.push_back(')');
  }

  static void print(const detail::Node& n, std::string& out) {
    switch (n.op) {
    case Op::constant:
      print_number(n.value, out);
      return;
    case Op::pi:
      out += "pi";
      return;
    case Op::variable:
      out += var_name(n.var);
      return;
    case Op::neg:
      out.push_back('-');
      print_child(*n.lhs, precedence(*n.lhs) < 3, out);
      return;
    case Op::sin:
    case Op::cos:
    case Op::exp:
    case Op::sqrt:
    case Op::abs:
    case Op::sign:
      out += function_name(n.op);
      print_child(*n.lhs, true, out);
      return;
    case Op::pow:
      print_child(*n.lhs, precedence(*n.lhs) < 5, out);
      out.push_back('^');
      out += std::to_string(n.exponent);
      return;
    case Op::add:
    case Op::sub:
    case Op::mul:
    case Op::div: {
      const int p = precedence(n);
      print_child(*n.lhs, precedence(*n.lhs) < p, out);
      switch (n.op) {
      case Op::add: out += " + "; break;
      case Op::sub: out += " - "; break;
      case Op::mul: out += "*"; break;
      default: out += "/"; break;
      }
      print_child(*n.rhs, precedence(*n.rhs) <= p, out);
      return;
    }
    }
  }

public:
  static std::string_view function_name(Op op) {
    switch (op) {
    case Op::sin: return "sin";
    case Op::cos: return "cos";
    case Op::exp: return "exp";
    case Op::sqrt: return "sqrt";
    case Op::abs: return "abs";
    case Op::sign: return "sign";
    default: return "";
    }
  }

private:
  detail::NodePtr node_;
};

// ---- parsing ----------------------------------------------------------------

namespace detail {

class Parser {
public:
  explicit Parser(std::string_view text) : text_(text) {}

  Expr parse() {
    skip_ws();
    if (pos_ >= text_.size()) throw SyntaxError(pos_, "empty expression");
    Expr e = parse_expr();
    skip_ws();
    if (pos_ < text_.size()) throw SyntaxError(pos_, std::string("unexpected '") + text_[pos_] + "'");
    return e;
  }

private:
  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char ch) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == ch) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char ch) {
    if (!accept(ch)) {
      if (pos_ >= text_.size()) throw SyntaxError(pos_, std::string("expected '") + ch + "' before end of input");
      throw SyntaxError(pos_, std::string("expected '") + ch + "', found '" + text_[pos_] + "'");
    }
  }

  Expr parse_expr() {
    Expr lhs = parse_term();
    for (;;) {
      if (accept('+')) {
        lhs = Expr::binary(Op::add, lhs, parse_term());
      } else if (accept('-')) {
        lhs = Expr::binary(Op::sub, lhs, parse_term());
      } else {
        return lhs;
      }
    }
  }

  Expr parse_term() {
    Expr lhs = parse_unary();
    for (;;) {
      if (accept('*')) {
        lhs = Expr::binary(Op::mul, lhs, parse_unary());
      } else if (accept('/')) {
        lhs = Expr::binary(Op::div, lhs, parse_unary());
      } else {
        return lhs;
      }
    }
  }

  Expr parse_unary() {
    if (accept('-')) return Expr::negate(parse_unary());
    if (accept('+')) return parse_unary();
    return parse_power();
  }

  Expr parse_power() {
    Expr base = parse_primary();
    if (accept('^')) return Expr::power(base, parse_integer_exponent());
    return base;
  }

  int parse_integer_exponent() {
    skip_ws();
    const bool paren = accept('(');
    skip_ws();
    const std::size_t start = pos_;
    bool negative = false;
    if (accept('-')) negative = true;
    skip_ws();
    const std::size_t digits = pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (pos_ == digits) throw SyntaxError(start, "exponent must be a constant integer");
    if (pos_ < text_.size() && (text_[pos_] == '.' || text_[pos_] == 'e' || text_[pos_] == 'E')) {
      throw SyntaxError(start, "exponent must be a constant integer");
    }
    int value = 0;
    auto [ptr, ec] = std::from_chars(text_.data() + digits, text_.data() + pos_, value);
    if (ec != std::errc()) throw SyntaxError(start, "exponent out of range");
    if (paren) expect(')');
    return negative ? -value : value;
  }

  Expr parse_primary() {
    skip_ws();
    if (pos_ >= text_.size()) throw SyntaxError(pos_, "unexpected end of input");
    const char ch = text_[pos_];
    if (ch == '(') {
      ++pos_;
      Expr inner = parse_expr();
      expect(')');
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(ch)) || ch == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(ch)) || ch == '_') return parse_identifier();
    throw SyntaxError(pos_, std::string("unexpected '") + ch + "'");
  }

  Expr parse_number() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.')) ++pos_;
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t look = pos_ + 1;
      if (look < text_.size() && (text_[look] == '+' || text_[look] == '-')) ++look;
      if (look < text_.size() && std::isdigit(static_cast<unsigned char>(text_[look]))) {
        pos_ = look;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      }
    }
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text_.data() + start, text_.data() + pos_, value);
    if (ec != std::errc() || ptr != text_.data() + pos_) throw SyntaxError(start, "malformed number");
    return Expr::constant(value);
  }

  Expr parse_identifier() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
      ++pos_;
    }
    const std::string_view name = text_.substr(start, pos_ - start);
    if (name == "pi") return Expr::pi();
    Var v = Var::x1;
    if (lookup_var(name, v)) return Expr::variable(v);
    for (Op op : {Op::sin, Op::cos, Op::exp, Op::sqrt, Op::abs, Op::sign}) {
      if (Expr::function_name(op) == name) {
        expect('(');
        Expr arg = parse_expr();
        expect(')');
        return Expr::unary(op, arg);
      }
    }
    throw UnknownIdentifier(start, std::string(name));
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

} // namespace detail

inline Expr parse(std::string_view text) { return detail::Parser(text).parse(); }

inline double eval(const Expr& e, const Bindings& b) { return e(b.coords()); }

// ---- differentiation ----------------------------------------------------------

namespace detail {

inline Expr add(const Expr& a, const Expr& b) {
  if (a.is_constant(0.0)) return b;
  if (b.is_constant(0.0)) return a;
  if (a.op() == Op::constant && b.op() == Op::constant) return Expr::constant(a.value() + b.value());
  return Expr::binary(Op::add, a, b);
}

inline Expr neg(const Expr& a) {
  if (a.is_constant(0.0)) return a;
  if (a.op() == Op::neg) return a.lhs();
  return Expr::negate(a);
}

inline Expr sub(const Expr& a, const Expr& b) {
  if (b.is_constant(0.0)) return a;
  if (a.is_constant(0.0)) return neg(b);
  if (a.op() == Op::constant && b.op() == Op::constant) return Expr::constant(a.value() - b.value());
  return Expr::binary(Op::sub, a, b);
}

inline Expr mul(const Expr& a, const Expr& b) {
  if (a.is_constant(0.0) || b.is_constant(0.0)) return Expr::constant(0.0);
  if (a.is_constant(1.0)) return b;
  if (b.is_constant(1.0)) return a;
  if (a.op() == Op::constant && b.op() == Op::constant) return Expr::constant(a.value() * b.value());
  return Expr::binary(Op::mul, a, b);
}

inline Expr div(const Expr& a, const Expr& b) {
  if (a.is_constant(0.0)) return Expr::constant(0.0);
  if (b.is_constant(1.0)) return a;
  return Expr::binary(Op::div, a, b);
}

inline Expr pow(const Expr& a, int n) {
  if (n == 0) return Expr::constant(1.0);
  if (n == 1) return a;
  return Expr::power(a, n);
}

inline Expr derive(const Expr& e, Var v) {
  if (!e.depends_on(v)) return Expr::constant(0.0);
  switch (e.op()) {
  case Op::constant:
  case Op::pi:
    return Expr::constant(0.0);
  case Op::variable:
    return Expr::constant(e.var() == v ? 1.0 : 0.0);
  case Op::neg:
    return neg(derive(e.lhs(), v));
  case Op::sin:
    return mul(Expr::unary(Op::cos, e.lhs()), derive(e.lhs(), v));
  case Op::cos:
    return neg(mul(Expr::unary(Op::sin, e.lhs()), derive(e.lhs(), v)));
  case Op::exp:
    return mul(e, derive(e.lhs(), v));
  case Op::sqrt:
    return div(derive(e.lhs(), v), mul(Expr::constant(2.0), e));
  case Op::abs:
    return mul(Expr::unary(Op::sign, e.lhs()), derive(e.lhs(), v));
  case Op::sign:
    return Expr::constant(0.0);
  case Op::add:
    return add(derive(e.lhs(), v), derive(e.rhs(), v));
  case Op::sub:
    return sub(derive(e.lhs(), v), derive(e.rhs(), v));
  case Op::mul:
    return add(mul(derive(e.lhs(), v), e.rhs()), mul(e.lhs(), derive(e.rhs(), v)));
  case Op::div: {
    const Expr num = sub(mul(derive(e.lhs(), v), e.rhs()), mul(e.lhs(), derive(e.rhs(), v)));
    return div(num, pow(e.rhs(), 2));
  }
  case Op::pow: {
    const int n = e.exponent();
    return mul(mul(Expr::constant(static_cast<double>(n)), pow(e.lhs(), n - 1)), derive(e.lhs(), v));
  }
  }
  return Expr::constant(0.0);
}

} // namespace detail

/// Exact symbolic derivative with light constant folding.
inline Expr differentiate(const Expr& e, Var v) { return detail::derive(e, v); }

inline Expr differentiate(const Expr& e, std::string_view name) {
  Var v = Var::x1;
  if (!lookup_var(name, v)) throw UnknownIdentifier(0, std::string(name));
  return differentiate(e, v);
}

/// Samples |e(var=t) - e(var=t+1)| on an n_samples x n_samples grid of
/// (random binding of the other variables in [lo, hi], t in [0, 1]).
inline bool check_periodicity(const Expr& e, Var var, int n_samples, std::uint64_t seed = 20240607,
                              double lo = -1.0, double hi = 1.0) {
  if (n_samples < 8) throw Error("check_periodicity needs at least 8 samples");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> other(lo, hi);
  for (int i = 0; i < n_samples; ++i) {
    Coords c;
    for (std::size_t k = 0; k < kVarNames.size(); ++k) c.set(static_cast<Var>(k), other(rng));
    for (int j = 0; j < n_samples; ++j) {
      const double t = (j + 0.5) / n_samples;
      c.set(var, t);
      const double a = e(c);
      c.set(var, t + 1.0);
      const double b = e(c);
      if (std::fabs(a - b) > 1e-10 * (1.0 + std::fabs(a))) return false;
    }
  }
  return true;
}

inline bool check_periodicity(const Expr& e, std::string_view name, int n_samples, std::uint64_t seed = 20240607) {
  Var v = Var::x1;
  if (!lookup_var(name, v)) throw UnknownIdentifier(0, std::string(name));
  return check_periodicity(e, v, n_samples, seed);
}

} // namespace thinhomog
