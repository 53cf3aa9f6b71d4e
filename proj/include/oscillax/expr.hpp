#pragma once

/**
 * @file expr.hpp
 * @brief Coefficient expression language.
 *
 * A deliberately small grammar for scalar functions of one real variable:
 *
 *     expr    := term (('+' | '-') term)*
 *     term    := unary (('*' | '/') unary)*
 *     unary   := ('+' | '-') unary | power
 *     power   := primary ('^' unary)?            right associative
 *     primary := number | 's' | 'r' | 'pi' | name
 *              | func '(' expr ')' | '(' expr ')'
 *     func    := sin | cos | exp | log | abs
 *
 * `s` and `r` both denote the independent variable. Other names must be
 * supplied as numeric bindings at parse time. A unary minus applied directly
 * to a literal is folded into the literal, so printed forms re-parse to the
 * same tree.
 *
 * Piecewise functions are tables of sub-expressions over strictly increasing
 * nodes; piece k owns [node_k, node_{k+1}) and the last piece also owns its
 * right endpoint.
 */

#include <oscillax/error.hpp>

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace oscillax {

using Bindings = std::map<std::string, double, std::less<>>;

enum class ExprKind { number, variable, negate, add, sub, mul, div, pow, call };
enum class ExprFunc { sin, cos, exp, log, abs };

/// Immutable expression tree. Copies share structure.
class Expr {
 public:
  struct Node {
    ExprKind kind = ExprKind::number;
    double value = 0.0;
    ExprFunc func = ExprFunc::sin;
    std::shared_ptr<const Node> lhs;
    std::shared_ptr<const Node> rhs;
  };

  Expr() : node_(make_number(0.0)) {}

  static Expr number(double v) { return Expr(make_number(v)); }
  static Expr variable() {
    auto n = std::make_shared<Node>();
    n->kind = ExprKind::variable;
    return Expr(std::move(n));
  }
  static Expr negate(const Expr& e) {
    auto n = std::make_shared<Node>();
    n->kind = ExprKind::negate;
    n->lhs = e.node_;
    return Expr(std::move(n));
  }
  static Expr binary(ExprKind kind, const Expr& a, const Expr& b) {
    auto n = std::make_shared<Node>();
    n->kind = kind;
    n->lhs = a.node_;
    n->rhs = b.node_;
    return Expr(std::move(n));
  }
  static Expr call(ExprFunc f, const Expr& arg) {
    auto n = std::make_shared<Node>();
    n->kind = ExprKind::call;
    n->func = f;
    n->lhs = arg.node_;
    return Expr(std::move(n));
  }

  const Node& root() const noexcept { return *node_; }

  /// Raw evaluation; may return a non-finite value. log of a non-positive
  /// argument throws DomainError.
  double evaluate(double s) const { return eval_node(*node_, s); }

  friend bool operator==(const Expr& a, const Expr& b) { return equal_nodes(*a.node_, *b.node_); }

 private:
  explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}

  static std::shared_ptr<const Node> make_number(double v) {
    auto n = std::make_shared<Node>();
    n->kind = ExprKind::number;
    n->value = v;
    return n;
  }

  static double integer_power(double base, long k) {
    bool invert = k < 0;
    unsigned long e = static_cast<unsigned long>(invert ? -k : k);
    double acc = 1.0;
    double b = base;
    while (e != 0) {
      if (e & 1UL) acc *= b;
      b *= b;
      e >>= 1U;
    }
    return invert ? 1.0 / acc : acc;
  }

  static double eval_node(const Node& n, double s) {
    switch (n.kind) {
      case ExprKind::number:
        return n.value;
      case ExprKind::variable:
        return s;
      case ExprKind::negate:
        return -eval_node(*n.lhs, s);
      case ExprKind::add:
        return eval_node(*n.lhs, s) + eval_node(*n.rhs, s);
      case ExprKind::sub:
        return eval_node(*n.lhs, s) - eval_node(*n.rhs, s);
      case ExprKind::mul:
        return eval_node(*n.lhs, s) * eval_node(*n.rhs, s);
      case ExprKind::div:
        return eval_node(*n.lhs, s) / eval_node(*n.rhs, s);
      case ExprKind::pow: {
        double base = eval_node(*n.lhs, s);
        if (n.rhs->kind == ExprKind::number) {
          double e = n.rhs->value;
          if (e == std::trunc(e) && std::abs(e) <= 64.0) return integer_power(base, static_cast<long>(e));
        }
        return std::pow(base, eval_node(*n.rhs, s));
      }
      case ExprKind::call: {
        double x = eval_node(*n.lhs, s);
        switch (n.func) {
          case ExprFunc::sin: return std::sin(x);
          case ExprFunc::cos: return std::cos(x);
          case ExprFunc::exp: return std::exp(x);
          case ExprFunc::abs: return std::abs(x);
          case ExprFunc::log:
            if (!(x > 0.0)) throw DomainError("log of non-positive argument");
            return std::log(x);
        }
      }
    }
    return std::numeric_limits<double>::quiet_NaN();
  }

  static bool equal_nodes(const Node& a, const Node& b) {
    if (a.kind != b.kind) return false;
    switch (a.kind) {
      case ExprKind::number:
        return a.value == b.value || (std::isnan(a.value) && std::isnan(b.value));
      case ExprKind::variable:
        return true;
      case ExprKind::negate:
        return equal_nodes(*a.lhs, *b.lhs);
      case ExprKind::call:
        return a.func == b.func && equal_nodes(*a.lhs, *b.lhs);
      default:
        return equal_nodes(*a.lhs, *b.lhs) && equal_nodes(*a.rhs, *b.rhs);
    }
  }

  std::shared_ptr<const Node> node_;
};

namespace detail {

inline std::string format_number(double v) {
  std::array<char, 40> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::general, 17);
  (void)ec;
  return std::string(buf.data(), end);
}

inline const char* func_name(ExprFunc f) {
  switch (f) {
    case ExprFunc::sin: return "sin";
    case ExprFunc::cos: return "cos";
    case ExprFunc::exp: return "exp";
    case ExprFunc::log: return "log";
    case ExprFunc::abs: return "abs";
  }
  return "?";
}

inline void print_node(const Expr::Node& n, std::string& out) {
  switch (n.kind) {
    case ExprKind::number:
      if (n.value < 0.0 || std::signbit(n.value)) {
        out += "(-";
        out += format_number(-n.value);
        out += ')';
      } else {
        out += format_number(n.value);
      }
      return;
    case ExprKind::variable:
      out += 's';
      return;
    case ExprKind::negate:
      out += "(-";
      print_node(*n.lhs, out);
      out += ')';
      return;
    case ExprKind::call:
      out += func_name(n.func);
      out += '(';
      print_node(*n.lhs, out);
      out += ')';
      return;
    default:
      break;
  }
  char op = '?';
  switch (n.kind) {
    case ExprKind::add: op = '+'; break;
    case ExprKind::sub: op = '-'; break;
    case ExprKind::mul: op = '*'; break;
    case ExprKind::div: op = '/'; break;
    case ExprKind::pow: op = '^'; break;
    default: break;
  }
  out += '(';
  print_node(*n.lhs, out);
  out += ' ';
  out += op;
  out += ' ';
  print_node(*n.rhs, out);
  out += ')';
}

class Parser {
 public:
  Parser(std::string_view src, const Bindings& bindings) : src_(src), bindings_(bindings) {}

  Expr parse() {
    skip_space();
    if (pos_ >= src_.size()) throw ParseError("empty expression", pos_);
    Expr e = parse_expr();
    skip_space();
    if (pos_ < src_.size()) throw ParseError(std::string("unexpected '") + src_[pos_] + "'", pos_);
    return e;
  }

 private:
  void skip_space() {
    while (pos_ < src_.size() && (src_[pos_] == ' ' || src_[pos_] == '\t' || src_[pos_] == '\n' || src_[pos_] == '\r'))
      ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Expr parse_expr() {
    Expr lhs = parse_term();
    for (;;) {
      if (accept('+')) {
        lhs = Expr::binary(ExprKind::add, lhs, parse_term());
      } else if (accept('-')) {
        lhs = Expr::binary(ExprKind::sub, lhs, parse_term());
      } else {
        return lhs;
      }
    }
  }

  Expr parse_term() {
    Expr lhs = parse_unary();
    for (;;) {
      if (accept('*')) {
        lhs = Expr::binary(ExprKind::mul, lhs, parse_unary());
      } else if (accept('/')) {
        lhs = Expr::binary(ExprKind::div, lhs, parse_unary());
      } else {
        return lhs;
      }
    }
  }

  Expr parse_unary() {
    if (accept('-')) {
      Expr operand = parse_unary();
      if (operand.root().kind == ExprKind::number) return Expr::number(-operand.root().value);
      return Expr::negate(operand);
    }
    if (accept('+')) return parse_unary();
    return parse_power();
  }

  Expr parse_power() {
    Expr base = parse_primary();
    if (accept('^')) return Expr::binary(ExprKind::pow, base, parse_unary());
    return base;
  }

  Expr parse_primary() {
    skip_space();
    if (pos_ >= src_.size()) throw ParseError("unexpected end of expression", pos_);
    char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      Expr inner = parse_expr();
      if (!accept(')')) throw ParseError("expected ')'", pos_);
      return inner;
    }
    if ((c >= '0' && c <= '9') || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_name();
    throw ParseError(std::string("unexpected '") + c + "'", pos_);
  }

  Expr parse_number() {
    std::size_t start = pos_;
    while (pos_ < src_.size() && (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.')) ++pos_;
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t save = pos_;
      ++pos_;
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
      if (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
      } else {
        pos_ = save;
      }
    }
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(src_.data() + start, src_.data() + pos_, v);
    if (ec != std::errc() || ptr != src_.data() + pos_) throw ParseError("malformed number", start);
    return Expr::number(v);
  }

  Expr parse_name() {
    std::size_t start = pos_;
    while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) ++pos_;
    std::string_view name = src_.substr(start, pos_ - start);
    static constexpr std::array<std::pair<std::string_view, ExprFunc>, 5> funcs{{
        {"sin", ExprFunc::sin}, {"cos", ExprFunc::cos}, {"exp", ExprFunc::exp},
        {"log", ExprFunc::log}, {"abs", ExprFunc::abs}}};
    for (const auto& [fname, f] : funcs) {
      if (name == fname) {
        if (!accept('(')) throw ParseError("expected '(' after " + std::string(name), pos_);
        Expr arg = parse_expr();
        if (!accept(')')) throw ParseError("expected ')'", pos_);
        return Expr::call(f, arg);
      }
    }
    if (name == "s" || name == "r") return Expr::variable();
    if (name == "pi") return Expr::number(std::numbers::pi);
    if (auto it = bindings_.find(name); it != bindings_.end()) return Expr::number(it->second);
    throw ParseError("unknown identifier '" + std::string(name) + "'", start);
  }

  std::string_view src_;
  const Bindings& bindings_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline Expr parse_expr(std::string_view source, const Bindings& bindings = {}) {
  return detail::Parser(source, bindings).parse();
}

/// Fully parenthesised rendering; literals use 17 significant digits.
inline std::string to_string(const Expr& e) {
  std::string out;
  detail::print_node(e.root(), out);
  return out;
}

/// Closed interval, possibly unbounded above.
struct Domain {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();

  bool contains(double s) const noexcept { return s >= lo && s <= hi; }
};

/**
 * A coefficient function: one expression over a domain, or a piecewise table.
 * Values are immutable after construction and safe to evaluate concurrently.
 */
class CoefficientExpr {
 public:
  CoefficientExpr() = default;

  static CoefficientExpr parse(std::string_view source, const Bindings& bindings = {}, Domain domain = {}) {
    CoefficientExpr c;
    c.source_ = std::string(source);
    c.pieces_ = {parse_expr(source, bindings)};
    c.domain_ = domain;
    return c;
  }

  static CoefficientExpr from_expr(Expr e, Domain domain = {}) {
    CoefficientExpr c;
    c.pieces_ = {std::move(e)};
    c.source_ = oscillax::to_string(c.pieces_.front());
    c.domain_ = domain;
    return c;
  }

  /// nodes.size() == pieces.size() + 1, nodes strictly increasing.
  static CoefficientExpr piecewise(std::vector<double> nodes, std::vector<Expr> pieces) {
    if (pieces.empty() || nodes.size() != pieces.size() + 1)
      throw std::invalid_argument("piecewise: need one more node than pieces");
    for (std::size_t i = 1; i < nodes.size(); ++i) {
      if (!(nodes[i] > nodes[i - 1])) throw std::invalid_argument("piecewise: nodes must strictly increase");
    }
    CoefficientExpr c;
    c.domain_ = Domain{nodes.front(), nodes.back()};
    c.nodes_ = std::move(nodes);
    c.pieces_ = std::move(pieces);
    return c;
  }

  bool is_piecewise() const noexcept { return !nodes_.empty(); }
  const Domain& domain() const noexcept { return domain_; }
  std::span<const double> nodes() const noexcept { return nodes_; }
  std::span<const Expr> pieces() const noexcept { return pieces_; }
  const std::string& source() const noexcept { return source_; }

  /// Index of the piece owning s; s must be inside the domain.
  std::size_t piece_index(double s) const {
    if (!is_piecewise()) return 0;
    auto it = std::upper_bound(nodes_.begin(), nodes_.end(), s);
    auto k = static_cast<std::size_t>(it - nodes_.begin());
    if (k == 0) return 0;
    return std::min(k - 1, pieces_.size() - 1);
  }

  double operator()(double s) const {
    if (!domain_.contains(s)) {
      throw DomainError("s = " + detail::format_number(s) + " outside domain [" + detail::format_number(domain_.lo) +
                        ", " + detail::format_number(domain_.hi) + "]");
    }
    double v = pieces_[piece_index(s)].evaluate(s);
    if (!std::isfinite(v)) throw DomainError("non-finite value at s = " + detail::format_number(s));
    return v;
  }

  double eval(double s) const { return (*this)(s); }

  /// Evaluates piece k at s without ownership lookup (s may be a shared node).
  double eval_piece(std::size_t k, double s) const {
    double v = pieces_.at(k).evaluate(s);
    if (!std::isfinite(v)) throw DomainError("non-finite value at s = " + detail::format_number(s));
    return v;
  }

  std::vector<double> eval_grid(std::span<const double> grid) const {
    std::vector<double> out(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (i > 0 && !(grid[i] > grid[i - 1])) throw GridError("grid not strictly increasing", i);
      try {
        out[i] = (*this)(grid[i]);
      } catch (const DomainError& e) {
        throw GridError(e.what(), i);
      }
    }
    return out;
  }

  /// Printable form of a single-expression coefficient.
  std::string to_string() const {
    if (is_piecewise()) {
      std::string out = "piecewise{";
      for (std::size_t k = 0; k < pieces_.size(); ++k) {
        if (k) out += "; ";
        out += "[" + detail::format_number(nodes_[k]) + "," + detail::format_number(nodes_[k + 1]) +
               (k + 1 == pieces_.size() ? "]" : ")") + ": " + oscillax::to_string(pieces_[k]);
      }
      return out + "}";
    }
    return oscillax::to_string(pieces_.front());
  }

 private:
  std::string source_;
  std::vector<double> nodes_;
  std::vector<Expr> pieces_{Expr::number(0.0)};
  Domain domain_{};
};

}  // namespace oscillax
