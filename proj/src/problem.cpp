#include "sweepmp/problem.hpp"

#include <algorithm>
#include <cmath>

#include "sweepmp/errors.hpp"
#include "sweepmp/rng.hpp"

namespace sweepmp {

std::vector<std::string> variable_names(int n, int m) {
  std::vector<std::string> v{"t"};
  for (int k = 1; k <= n; ++k) v.push_back("x" + std::to_string(k));
  for (int k = 1; k <= m; ++k) v.push_back("u" + std::to_string(k));
  return v;
}

namespace {

void check_vars(const Expr& e, const std::vector<std::string>& allowed, const std::string& what) {
  for (const std::string& v : e.free_variables())
    if (std::find(allowed.begin(), allowed.end(), v) == allowed.end())
      throw UnknownVariable(v + "' in " + what + " '" + e.str(), 0);
}

}  // namespace

// Dynamics -------------------------------------------------------------

Dynamics::Dynamics(std::vector<Expr> components, int n, int m) : n_(n), m_(m), exprs_(std::move(components)) {
  if (n_ < 1 || n_ > kMaxDim) throw DimensionMismatch("state dimension out of range");
  if (m_ < 0 || m_ > kMaxDim) throw DimensionMismatch("control dimension out of range");
  if (static_cast<int>(exprs_.size()) != n_)
    throw DimensionMismatch("dynamics has " + std::to_string(exprs_.size()) + " components, expected " +
                            std::to_string(n_));
  const auto vars = variable_names(n_, m_);
  for (const Expr& e : exprs_) {
    check_vars(e, vars, "dynamics");
    f_.emplace_back(e, vars);
    for (int b = 0; b < n_; ++b) jac_.emplace_back(e.diff(vars[static_cast<std::size_t>(b + 1)]), vars);
  }
}

void Dynamics::fill(double t, const Vec& x, const Vec& u, double* args) const {
  if (x.size() != n_) throw DimensionMismatch("state has wrong dimension");
  if (u.size() != m_) throw DimensionMismatch("control has wrong dimension");
  args[0] = t;
  for (int k = 0; k < n_; ++k) args[1 + k] = x[k];
  for (int k = 0; k < m_; ++k) args[1 + n_ + k] = u[k];
}

Vec Dynamics::eval(double t, const Vec& x, const Vec& u) const {
  double args[2 * kMaxDim + 1];
  fill(t, x, u, args);
  const std::span<const double> a{args, static_cast<std::size_t>(1 + n_ + m_)};
  Vec out(n_);
  for (int k = 0; k < n_; ++k) out[k] = f_[static_cast<std::size_t>(k)](a);
  return out;
}

Mat Dynamics::jacobian(double t, const Vec& x, const Vec& u) const {
  double args[2 * kMaxDim + 1];
  fill(t, x, u, args);
  const std::span<const double> a{args, static_cast<std::size_t>(1 + n_ + m_)};
  Mat J(n_, n_);
  for (int r = 0; r < n_; ++r)
    for (int c = 0; c < n_; ++c) J(r, c) = jac_[static_cast<std::size_t>(r * n_ + c)](a);
  return J;
}

// Cost -----------------------------------------------------------------

Cost::Cost(Expr phi, int n) : n_(n), expr_(std::move(phi)) {
  auto vars = variable_names(n_);
  vars.erase(vars.begin());  // cost depends on x only
  check_vars(expr_, vars, "cost");
  value_ = CompiledExpr(expr_, vars);
  for (int k = 0; k < n_; ++k) grad_.emplace_back(expr_.diff(vars[static_cast<std::size_t>(k)]), vars);
}

double Cost::value(const Vec& x) const {
  if (x.size() != n_) throw DimensionMismatch("cost argument has wrong dimension");
  return value_({x.data(), static_cast<std::size_t>(n_)});
}

Vec Cost::gradient(const Vec& x) const {
  if (x.size() != n_) throw DimensionMismatch("cost argument has wrong dimension");
  Vec g(n_);
  for (int k = 0; k < n_; ++k) g[k] = grad_[static_cast<std::size_t>(k)]({x.data(), static_cast<std::size_t>(n_)});
  return g;
}

// Control set ----------------------------------------------------------

ControlSet ControlSet::box(Vec lo, Vec hi) {
  if (lo.size() != hi.size()) throw DimensionMismatch("control box bounds differ in length");
  for (int k = 0; k < lo.size(); ++k)
    if (!(lo[k] <= hi[k])) throw InvalidParameters("control box has lo > hi");
  ControlSet s;
  s.kind = Kind::Box;
  s.lo = std::move(lo);
  s.hi = std::move(hi);
  return s;
}

ControlSet ControlSet::finite(std::vector<Vec> points) {
  if (points.empty()) throw InvalidParameters("finite control set is empty");
  for (const Vec& p : points)
    if (p.size() != points.front().size()) throw DimensionMismatch("finite control set mixes dimensions");
  ControlSet s;
  s.kind = Kind::Finite;
  s.points = std::move(points);
  return s;
}

int ControlSet::dim() const {
  return kind == Kind::Box ? static_cast<int>(lo.size()) : static_cast<int>(points.front().size());
}

bool ControlSet::contains(const Vec& u, double tol) const {
  if (u.size() != dim()) return false;
  if (kind == Kind::Box) {
    for (int k = 0; k < u.size(); ++k)
      if (u[k] < lo[k] - tol || u[k] > hi[k] + tol) return false;
    return true;
  }
  return std::any_of(points.begin(), points.end(),
                     [&](const Vec& p) { return (p - u).cwiseAbs().maxCoeff() <= tol; });
}

std::vector<Vec> ControlSet::grid(int per_dim) const {
  if (kind == Kind::Finite) return points;
  const int m = dim();
  if (m == 0) return {Vec(0)};
  per_dim = std::max(per_dim, 2);
  std::vector<Vec> out;
  std::vector<int> idx(static_cast<std::size_t>(m), 0);
  while (true) {
    Vec u(m);
    for (int k = 0; k < m; ++k) {
      const double s = static_cast<double>(idx[static_cast<std::size_t>(k)]) / (per_dim - 1);
      u[k] = lo[k] + s * (hi[k] - lo[k]);
    }
    out.push_back(u);
    int k = 0;
    while (k < m && ++idx[static_cast<std::size_t>(k)] == per_dim) idx[static_cast<std::size_t>(k++)] = 0;
    if (k == m) break;
  }
  return out;
}

// Endpoint sets --------------------------------------------------------

Vec InitialSet::representative() const { return kind == Kind::Ball ? center : points.front(); }

bool InitialSet::contains(const Vec& x, double tol) const {
  if (kind == Kind::Ball) return (x - center).norm() <= radius + tol;
  return std::any_of(points.begin(), points.end(),
                     [&](const Vec& p) { return (p - x).cwiseAbs().maxCoeff() <= tol; });
}

TerminalSet::TerminalSet(std::vector<Expr> inequalities, bool within_moving_set, int n)
    : n_(n), within_(within_moving_set), exprs_(std::move(inequalities)) {
  auto vars = variable_names(n_);
  vars.erase(vars.begin());
  for (const Expr& e : exprs_) {
    check_vars(e, vars, "terminal set");
    value_.emplace_back(e, vars);
    std::vector<CompiledExpr> g;
    for (int k = 0; k < n_; ++k) g.emplace_back(e.diff(vars[static_cast<std::size_t>(k)]), vars);
    grad_.push_back(std::move(g));
  }
}

double TerminalSet::value(int j, const Vec& x) const {
  return value_.at(static_cast<std::size_t>(j))({x.data(), static_cast<std::size_t>(n_)});
}

Vec TerminalSet::gradient(int j, const Vec& x) const {
  Vec g(n_);
  for (int k = 0; k < n_; ++k)
    g[k] = grad_.at(static_cast<std::size_t>(j))[static_cast<std::size_t>(k)]({x.data(), static_cast<std::size_t>(n_)});
  return g;
}

double TerminalSet::max_violation(const Vec& x) const {
  double v = 0.0;
  for (int j = 0; j < count(); ++j) v = std::max(v, value(j, x));
  return v;
}

double Problem::terminal_violation(const Vec& x) const {
  if (!terminal) return 0.0;
  double v = terminal->max_violation(x);
  if (terminal->within_moving_set()) v = std::max(v, set.max_raw(horizon, x));
  return std::max(v, 0.0);
}

bool Problem::terminal_feasible(const Vec& x, double tol) const { return terminal_violation(x) <= tol; }

// Control signal -------------------------------------------------------

ControlSignal::ControlSignal(std::vector<double> breaks, std::vector<Vec> values)
    : breaks_(std::move(breaks)), values_(std::move(values)) {
  if (values_.size() != breaks_.size() + 1)
    throw DimensionMismatch("control signal needs one more value than breakpoints");
  if (!std::is_sorted(breaks_.begin(), breaks_.end()) ||
      std::adjacent_find(breaks_.begin(), breaks_.end()) != breaks_.end())
    throw InvalidParameters("control breakpoints must be strictly increasing");
  for (const Vec& v : values_)
    if (v.size() != values_.front().size()) throw DimensionMismatch("control values mix dimensions");
}

ControlSignal ControlSignal::constant(Vec u) { return ControlSignal({}, {std::move(u)}); }

ControlSignal ControlSignal::switching(double t_switch, Vec before, Vec after) {
  return ControlSignal({t_switch}, {std::move(before), std::move(after)});
}

Vec ControlSignal::at(double t) const {
  if (values_.empty()) return Vec(0);
  // Closed on the left of the first piece: u(t_switch) is the "before" value.
  const auto it = std::lower_bound(breaks_.begin(), breaks_.end(), t);
  return values_[static_cast<std::size_t>(it - breaks_.begin())];
}

// Consistency checks ---------------------------------------------------

ProblemCheck check_problem(const Problem& p, std::size_t samples, std::uint64_t seed) {
  ProblemCheck out;
  Rng rng(seed);
  const double r = p.set.bounding_radius();
  const auto sample_ball = [&](const Vec& c, double rad) {
    Vec d(p.n);
    for (int k = 0; k < p.n; ++k) d[k] = rng.normal();
    const double nrm = d.norm();
    if (nrm == 0.0) return c;
    return Vec(c + d * (rad * std::pow(rng.uniform(), 1.0 / p.n) / nrm));
  };
  const auto controls = p.controls.grid(5);

  for (const Vec& x0 : p.initial.points)
    if (!p.set.contains(0.0, x0, 1e-12)) out.initial_inside = false;
  for (std::size_t s = 0; s < samples; ++s) {
    ++out.samples;
    if (p.initial.kind == InitialSet::Kind::Ball) {
      const Vec x = sample_ball(p.initial.center, p.initial.radius);
      if (!p.set.contains(0.0, x, 1e-12)) out.initial_inside = false;
    }
    const Vec x = sample_ball(Vec::Zero(p.n), r);
    if (p.terminal && !p.terminal->within_moving_set() && p.terminal->max_violation(x) <= 0.0 &&
        !p.set.contains(p.horizon, x, 1e-9))
      out.terminal_inside = false;
    const double t = p.horizon * rng.uniform();
    const Vec& u = controls[static_cast<std::size_t>(rng.below(controls.size()))];
    out.max_speed = std::max(out.max_speed, p.dynamics.eval(t, x, u).norm());
  }
  return out;
}

}  // namespace sweepmp
