#pragma once

// Scalar arithmetic expressions over named real variables, with exact symbolic
// partial derivatives.
//
// Grammar (whitespace is ignored):
//
//   expr   := term (('+' | '-') term)*
//   term   := factor (('*' | '/') factor)*
//   factor := '-' factor | base ('^' integer)?
//   base   := number | ident | func '(' expr ')' | '(' expr ')'
//   func   := exp | log | sqrt | sin | cos | neg
//
// Exponents are non-negative integer literals; general powers are written
// with exp/log.

#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sweepmp {

using Env = std::map<std::string, double, std::less<>>;

namespace detail {
struct Node;
}

class Expr {
 public:
  enum class Op { Const, Var, Add, Sub, Mul, Div, Pow, Neg, Exp, Log, Sqrt, Sin, Cos };

  /// The constant zero.
  Expr();

  static Expr constant(double value);
  static Expr variable(std::string name);

  Op op() const noexcept;
  /// Constant value; only meaningful when op() == Op::Const.
  double value() const noexcept;
  /// Variable name; only meaningful when op() == Op::Var.
  const std::string& name() const noexcept;
  /// Integer exponent; only meaningful when op() == Op::Pow.
  int exponent() const noexcept;
  /// Children (zero, one or two).
  std::vector<Expr> children() const;

  bool is_constant() const noexcept { return op() == Op::Const; }
  bool is_zero() const noexcept { return is_constant() && value() == 0.0; }

  std::set<std::string> free_variables() const;

  /// Evaluates in IEEE double precision. Throws UnboundVariable or DomainError.
  double eval(const Env& env) const;

  /// Exact partial derivative with respect to `var`. Results are memoized on
  /// the node, so repeated requests (Hessian assembly) are cheap.
  Expr diff(std::string_view var) const;

  /// Re-parseable text form.
  std::string str() const;

  friend Expr operator+(const Expr& a, const Expr& b);
  friend Expr operator-(const Expr& a, const Expr& b);
  friend Expr operator*(const Expr& a, const Expr& b);
  friend Expr operator/(const Expr& a, const Expr& b);
  friend Expr operator-(const Expr& a);
  friend Expr pow(const Expr& base, int exponent);
  friend Expr apply(Expr::Op func, const Expr& arg);

  const detail::Node* node() const noexcept { return node_.get(); }

 private:
  explicit Expr(std::shared_ptr<const detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<const detail::Node> node_;

  friend struct detail::Node;
};

Expr pow(const Expr& base, int exponent);
/// Applies a unary function (Exp, Log, Sqrt, Sin, Cos or Neg).
Expr apply(Expr::Op func, const Expr& arg);

/// Parses `source`; every identifier that is not a function must be one of
/// `allowed_vars`. Throws ParseError, UnknownVariable or UnknownFunction.
Expr parse(std::string_view source, std::span<const std::string> allowed_vars);

double eval(const Expr& e, const Env& env);
Expr differentiate(const Expr& e, std::string_view var);

/// An expression bound to an ordered variable list and flattened into a
/// postfix program. Evaluation takes the variable values positionally.
class CompiledExpr {
 public:
  CompiledExpr() = default;
  CompiledExpr(const Expr& e, std::span<const std::string> vars);

  double operator()(std::span<const double> values) const;
  bool is_constant() const noexcept { return constant_; }
  /// True when the expression is identically zero (after folding).
  bool is_zero() const noexcept { return constant_ && constant_value_ == 0.0; }

 private:
  struct Instr {
    Expr::Op op;
    int arg;       // variable slot for Var, exponent for Pow
    double value;  // literal for Const
  };
  std::vector<Instr> code_;
  int max_depth_ = 0;
  bool constant_ = true;
  double constant_value_ = 0.0;
};

}  // namespace sweepmp
