#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sweepmp/expr.hpp"
#include "sweepmp/moving_set.hpp"
#include "sweepmp/types.hpp"

namespace sweepmp {

/// Variable names t, x1..xn (and u1..um when m > 0), in that order.
std::vector<std::string> variable_names(int n, int m = 0);

/// Compiled right-hand side f(t, x, u) with its state Jacobian.
class Dynamics {
 public:
  Dynamics(std::vector<Expr> components, int n, int m);

  int state_dim() const noexcept { return n_; }
  int control_dim() const noexcept { return m_; }
  const std::vector<Expr>& components() const noexcept { return exprs_; }

  Vec eval(double t, const Vec& x, const Vec& u) const;
  /// d f / d x, row a = component a.
  Mat jacobian(double t, const Vec& x, const Vec& u) const;

 private:
  void fill(double t, const Vec& x, const Vec& u, double* args) const;

  int n_, m_;
  std::vector<Expr> exprs_;
  std::vector<CompiledExpr> f_;
  std::vector<CompiledExpr> jac_;  // row major n x n
};

/// Terminal cost phi(x).
class Cost {
 public:
  Cost(Expr phi, int n);
  const Expr& expr() const noexcept { return expr_; }
  double value(const Vec& x) const;
  Vec gradient(const Vec& x) const;

 private:
  int n_;
  Expr expr_;
  CompiledExpr value_;
  std::vector<CompiledExpr> grad_;
};

/// Compact control set: a box or a finite list of vectors.
struct ControlSet {
  enum class Kind { Box, Finite };
  Kind kind = Kind::Box;
  Vec lo, hi;               // Box
  std::vector<Vec> points;  // Finite

  static ControlSet box(Vec lo, Vec hi);
  static ControlSet finite(std::vector<Vec> points);

  int dim() const;
  bool contains(const Vec& u, double tol = 1e-12) const;
  /// Candidate controls for maximization: the finite list, or a tensor grid
  /// with `per_dim` points per axis (vertices included).
  std::vector<Vec> grid(int per_dim) const;
};

/// Initial endpoint set C0.
struct InitialSet {
  enum class Kind { Point, Points, Ball };
  Kind kind = Kind::Point;
  std::vector<Vec> points;  // Point (one entry) or Points
  Vec center;               // Ball
  double radius = 0.0;

  /// The start point used by forward simulations: the point, the first
  /// listed point, or the ball centre.
  Vec representative() const;
  bool contains(const Vec& x, double tol = 1e-9) const;
};

/// Terminal endpoint set: conjunction of inequalities g_j(x) <= 0, optionally
/// intersected with C(T).
class TerminalSet {
 public:
  TerminalSet(std::vector<Expr> inequalities, bool within_moving_set, int n);

  int count() const noexcept { return static_cast<int>(exprs_.size()); }
  bool within_moving_set() const noexcept { return within_; }
  const std::vector<Expr>& inequalities() const noexcept { return exprs_; }

  double value(int j, const Vec& x) const;
  Vec gradient(int j, const Vec& x) const;
  double max_violation(const Vec& x) const;

 private:
  int n_;
  bool within_;
  std::vector<Expr> exprs_;
  std::vector<CompiledExpr> value_;
  std::vector<std::vector<CompiledExpr>> grad_;
};

struct Problem {
  std::string name;
  int n = 0;
  int m = 0;
  double horizon = 1.0;
  Dynamics dynamics;
  MovingSet set;
  ControlSet controls;
  InitialSet initial;
  std::optional<TerminalSet> terminal;
  Cost cost;

  /// True when x(T) lies in the terminal set (and in C(T) when required).
  bool terminal_feasible(const Vec& x, double tol = 1e-6) const;
  /// Amount by which x(T) violates the terminal set (0 when feasible).
  double terminal_violation(const Vec& x) const;
};

/// Piecewise-constant control: values[k] holds on (breaks[k-1], breaks[k]].
class ControlSignal {
 public:
  ControlSignal() = default;
  ControlSignal(std::vector<double> breaks, std::vector<Vec> values);

  static ControlSignal constant(Vec u);
  /// `before` on [0, t_switch], `after` afterwards.
  static ControlSignal switching(double t_switch, Vec before, Vec after);

  Vec at(double t) const;
  /// Value on the open interval (a, b); it must not contain a breakpoint.
  Vec on(double a, double b) const { return at(0.5 * (a + b)); }
  const std::vector<double>& breaks() const noexcept { return breaks_; }
  const std::vector<Vec>& values() const noexcept { return values_; }
  int dim() const { return values_.empty() ? 0 : static_cast<int>(values_.front().size()); }

 private:
  std::vector<double> breaks_;
  std::vector<Vec> values_;
};

/// Sampled consistency checks: C0 in C(0), terminal set in C(T), |f| bounded.
struct ProblemCheck {
  bool initial_inside = true;
  bool terminal_inside = true;
  double max_speed = 0.0;  // sampled sup |f| over the ball and U (the constant M)
  std::size_t samples = 0;
};
ProblemCheck check_problem(const Problem& p, std::size_t samples, std::uint64_t seed);

}  // namespace sweepmp
