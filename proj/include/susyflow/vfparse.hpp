#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "susyflow/error.hpp"

namespace susyflow {

/// Compiled scalar expression over x, y, z (aliases x1, x2, x3).
///
/// Grammar, lowest to highest precedence:
///   expr   := term (('+' | '-') term)*
///   term   := unary (('*' | '/') unary)*
///   unary  := ('-' | '+') unary | power
///   power  := primary ('^' unary)?          right-associative
///   primary:= number | variable | func '(' expr ')' | '(' expr ')'
///
/// New functions go in `function_table` and `apply_function`.
class FieldExpr {
 public:
  enum class Kind { Number, Variable, Negate, Add, Sub, Mul, Div, Pow, Call };
  enum class Func { Sin, Cos, Exp };

  struct Node {
    Kind kind = Kind::Number;
    double value = 0.0;
    int var = -1;
    Func func = Func::Sin;
    int lhs = -1;
    int rhs = -1;

    bool operator==(const Node&) const = default;
  };

  FieldExpr() = default;

  static FieldExpr parse(std::string_view src);

  double eval(std::span<const double> point) const {
    if (static_cast<int>(point.size()) < variable_count())
      throw Error(ErrorCode::DomainMismatch, "expression uses " + std::to_string(variable_count()) +
                                                 " variables, point has " + std::to_string(point.size()));
    return eval_node(root_, point);
  }

  /// Number of coordinates the expression needs (1 + highest variable index).
  int variable_count() const { return max_var_ + 1; }

  /// Fully parenthesized rendering that parses back to the same tree.
  std::string to_string() const { return render(root_); }

  bool operator==(const FieldExpr& o) const { return structurally_equal(root_, o, o.root_); }

  std::span<const Node> nodes() const { return nodes_; }
  int root() const { return root_; }

 private:
  friend class ExprParser;

  double eval_node(int idx, std::span<const double> x) const {
    const Node& nd = nodes_[static_cast<std::size_t>(idx)];
    switch (nd.kind) {
      case Kind::Number: return nd.value;
      case Kind::Variable: return x[static_cast<std::size_t>(nd.var)];
      case Kind::Negate: return -eval_node(nd.lhs, x);
      case Kind::Add: return eval_node(nd.lhs, x) + eval_node(nd.rhs, x);
      case Kind::Sub: return eval_node(nd.lhs, x) - eval_node(nd.rhs, x);
      case Kind::Mul: return eval_node(nd.lhs, x) * eval_node(nd.rhs, x);
      case Kind::Div: {
        const double num = eval_node(nd.lhs, x);
        const double den = eval_node(nd.rhs, x);
        if (den == 0.0) throw Error(ErrorCode::DivisionByZero, "in '" + render(idx) + "'");
        return num / den;
      }
      case Kind::Pow: return std::pow(eval_node(nd.lhs, x), eval_node(nd.rhs, x));
      case Kind::Call: {
        const double a = eval_node(nd.lhs, x);
        switch (nd.func) {
          case Func::Sin: return std::sin(a);
          case Func::Cos: return std::cos(a);
          case Func::Exp: return std::exp(a);
        }
      }
    }
    return 0.0;
  }

  std::string render(int idx) const {
    const Node& nd = nodes_[static_cast<std::size_t>(idx)];
    auto bin = [&](const char* op) { return "(" + render(nd.lhs) + op + render(nd.rhs) + ")"; };
    switch (nd.kind) {
      case Kind::Number: {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", nd.value);
        return buf;
      }
      case Kind::Variable: return std::string(1, "xyz"[nd.var]);
      case Kind::Negate: return "(-" + render(nd.lhs) + ")";
      case Kind::Add: return bin("+");
      case Kind::Sub: return bin("-");
      case Kind::Mul: return bin("*");
      case Kind::Div: return bin("/");
      case Kind::Pow: return bin("^");
      case Kind::Call: {
        const char* name = nd.func == Func::Sin ? "sin" : nd.func == Func::Cos ? "cos" : "exp";
        return std::string(name) + "(" + render(nd.lhs) + ")";
      }
    }
    return {};
  }

  bool structurally_equal(int a, const FieldExpr& o, int b) const {
    const Node& x = nodes_[static_cast<std::size_t>(a)];
    const Node& y = o.nodes_[static_cast<std::size_t>(b)];
    if (x.kind != y.kind) return false;
    switch (x.kind) {
      case Kind::Number: return x.value == y.value;
      case Kind::Variable: return x.var == y.var;
      case Kind::Negate: return structurally_equal(x.lhs, o, y.lhs);
      case Kind::Call: return x.func == y.func && structurally_equal(x.lhs, o, y.lhs);
      default: return structurally_equal(x.lhs, o, y.lhs) && structurally_equal(x.rhs, o, y.rhs);
    }
  }

  std::vector<Node> nodes_;
  int root_ = -1;
  int max_var_ = -1;
};

class ExprParser {
 public:
  explicit ExprParser(std::string_view src) : src_(src) {}

  FieldExpr run() {
    skip_ws();
    if (pos_ >= src_.size()) throw SyntaxError(pos_, "empty expression");
    out_.root_ = expr();
    skip_ws();
    if (pos_ < src_.size()) throw SyntaxError(pos_, std::string("unexpected '") + src_[pos_] + "'");
    return std::move(out_);
  }

 private:
  using Kind = FieldExpr::Kind;

  int add(FieldExpr::Node nd) {
    out_.nodes_.push_back(nd);
    return static_cast<int>(out_.nodes_.size()) - 1;
  }

  void skip_ws() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  int expr() {
    int lhs = term();
    for (;;) {
      if (accept('+')) lhs = add({Kind::Add, 0, -1, {}, lhs, term()});
      else if (accept('-')) lhs = add({Kind::Sub, 0, -1, {}, lhs, term()});
      else return lhs;
    }
  }

  int term() {
    int lhs = unary();
    for (;;) {
      if (accept('*')) lhs = add({Kind::Mul, 0, -1, {}, lhs, unary()});
      else if (accept('/')) lhs = add({Kind::Div, 0, -1, {}, lhs, unary()});
      else return lhs;
    }
  }

  int unary() {
    if (accept('-')) return add({Kind::Negate, 0, -1, {}, unary(), -1});
    if (accept('+')) return unary();
    return power();
  }

  int power() {
    const int base = primary();
    if (accept('^')) return add({Kind::Pow, 0, -1, {}, base, unary()});
    return base;
  }

  int primary() {
    skip_ws();
    if (pos_ >= src_.size()) throw SyntaxError(pos_, "unexpected end of expression");
    const char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      const int inner = expr();
      if (!accept(')')) throw SyntaxError(pos_, "expected ')'");
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
    throw SyntaxError(pos_, std::string("unexpected '") + c + "'");
  }

  int number() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() && (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.')) ++pos_;
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t q = pos_ + 1;
      if (q < src_.size() && (src_[q] == '+' || src_[q] == '-')) ++q;
      if (q < src_.size() && std::isdigit(static_cast<unsigned char>(src_[q]))) {
        pos_ = q;
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
      }
    }
    double v = 0.0;
    const auto res = std::from_chars(src_.data() + start, src_.data() + pos_, v);
    if (res.ec != std::errc() || res.ptr != src_.data() + pos_) throw SyntaxError(start, "malformed number");
    return add({Kind::Number, v, -1, {}, -1, -1});
  }

  int identifier() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) ++pos_;
    const std::string name(src_.substr(start, pos_ - start));
    static const std::map<std::string, int> variables{{"x", 0}, {"y", 1}, {"z", 2},
                                                      {"x1", 0}, {"x2", 1}, {"x3", 2}};
    static const std::map<std::string, FieldExpr::Func> functions{
        {"sin", FieldExpr::Func::Sin}, {"cos", FieldExpr::Func::Cos}, {"exp", FieldExpr::Func::Exp}};
    if (auto v = variables.find(name); v != variables.end()) {
      out_.max_var_ = std::max(out_.max_var_, v->second);
      return add({Kind::Variable, 0, v->second, {}, -1, -1});
    }
    if (auto f = functions.find(name); f != functions.end()) {
      if (!accept('(')) throw SyntaxError(pos_, "expected '(' after " + name);
      const int arg = expr();
      if (!accept(')')) throw SyntaxError(pos_, "expected ')'");
      return add({Kind::Call, 0, -1, f->second, arg, -1});
    }
    throw Error(ErrorCode::UnknownIdentifier, name);
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  FieldExpr out_;
};

inline FieldExpr FieldExpr::parse(std::string_view src) { return ExprParser(src).run(); }

inline FieldExpr parse(std::string_view src) { return FieldExpr::parse(src); }

/// Flow vector field F^i(x), noise temperature T and a constant diagonal
/// vielbein for dx = F dt + sqrt(T) e dW.
struct FlowSpec {
  std::string name;
  std::vector<std::string> sources;
  std::vector<FieldExpr> components;
  double temperature = 0.0;
  std::vector<double> vielbein;

  int dim() const { return static_cast<int>(components.size()); }

  double eval(int component, std::span<const double> x) const {
    return components[static_cast<std::size_t>(component)].eval(x);
  }

  void validate() const {
    if (components.empty() || components.size() > 3)
      throw Error(ErrorCode::DimensionMismatch, "flow needs 1..3 components");
    if (!(temperature >= 0.0)) throw Error(ErrorCode::DomainMismatch, "T must be >= 0");
    if (vielbein.size() != components.size())
      throw Error(ErrorCode::DimensionMismatch, "vielbein length differs from component count");
    for (double e : vielbein)
      if (!(e > 0.0)) throw Error(ErrorCode::DomainMismatch, "vielbein entries must be > 0");
    for (const auto& c : components)
      if (c.variable_count() > dim())
        throw Error(ErrorCode::DimensionMismatch, "component references a coordinate beyond D");
  }
};

inline FlowSpec make_flow(std::string name, const std::vector<std::string>& sources, double temperature,
                          std::vector<double> vielbein = {}) {
  FlowSpec f;
  f.name = std::move(name);
  f.sources = sources;
  for (const auto& s : sources) f.components.push_back(FieldExpr::parse(s));
  f.temperature = temperature;
  f.vielbein = vielbein.empty() ? std::vector<double>(sources.size(), 1.0) : std::move(vielbein);
  f.validate();
  return f;
}

namespace detail {
inline std::string lit(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "(%.17g)", v);
  return buf;
}
inline double param(const std::map<std::string, double>& p, const std::string& key, double fallback) {
  auto it = p.find(key);
  return it == p.end() ? fallback : it->second;
}
}  // namespace detail

/// Registry of test systems. Recognized parameters: T (all), v (drift1d),
/// A, B, C (abc).
inline FlowSpec builtin_flow(const std::string& name, const std::map<std::string, double>& params) {
  using detail::lit;
  const double T = detail::param(params, "T", 0.0);
  if (name == "diffusion") {
    const int D = static_cast<int>(detail::param(params, "D", 1));
    return make_flow(name, std::vector<std::string>(static_cast<std::size_t>(std::clamp(D, 1, 3)), "0"), T);
  }
  if (name == "drift1d") return make_flow(name, {lit(detail::param(params, "v", 1.0))}, T);
  if (name == "pendulum1d") return make_flow(name, {"-sin(x)"}, T);
  if (name == "shear2d") return make_flow(name, {"sin(y)", "0"}, T);
  if (name == "abc") {
    const std::string A = lit(detail::param(params, "A", 1.0));
    const std::string B = lit(detail::param(params, "B", 1.0));
    const std::string C = lit(detail::param(params, "C", 1.0));
    return make_flow(name,
                     {A + "*sin(z)+" + C + "*cos(y)", B + "*sin(x)+" + A + "*cos(z)",
                      C + "*sin(y)+" + B + "*cos(x)"},
                     T);
  }
  throw Error(ErrorCode::UnknownFlow, "'" + name + "' (known: diffusion, drift1d, pendulum1d, shear2d, abc)");
}

}  // namespace susyflow
