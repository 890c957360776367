#include "sweepmp/adjoint.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "sweepmp/errors.hpp"

namespace sweepmp {

double trapezoid(const std::vector<double>& t, const std::vector<double>& v) {
  if (t.size() != v.size()) throw DimensionMismatch("trapezoid: grid and values differ in length");
  double s = 0.0;
  for (std::size_t j = 0; j + 1 < t.size(); ++j) s += 0.5 * (t[j + 1] - t[j]) * (v[j] + v[j + 1]);
  return s;
}

Mat adjoint_matrix(const Problem& p, const PenaltyLevel& level, double t, const Vec& x, const Vec& u) {
  Mat A = -p.dynamics.jacobian(t, x, u).transpose();
  const double floor = -2.0 * p.set.a1().beta;
  for (int i = 0; i < p.set.count(); ++i) {
    if (p.set.raw_value(i, t, x) <= floor) continue;
    const ConstraintJet j = p.set.jet(i, t, x, true);
    const double xi = level.gamma * std::exp(level.gamma * (j.value - level.sigma));
    A += xi * (j.hess + level.gamma * j.grad * j.grad.transpose());
  }
  return A;
}

namespace {

PenaltyLevel level_of(const Trajectory& tr) {
  if (!(tr.gamma > 0.0)) throw PreconditionError("adjoint needs a penalized trajectory (gamma > 0)");
  PenaltyLevel l;
  l.gamma = tr.gamma;
  l.sigma = tr.sigma;
  l.mu = tr.xi_cap > 0.0 ? tr.xi_cap : 1.0;
  l.eta = 1.0;
  return l;
}

// Cubic Hermite state on one trajectory interval.
struct Segment {
  double t0, t1;
  Vec x0, x1, m0, m1;

  Vec at(double t) const {
    const double h = t1 - t0;
    const double s = (t - t0) / h;
    const double s2 = s * s, s3 = s2 * s;
    return (2 * s3 - 3 * s2 + 1) * x0 + (s3 - 2 * s2 + s) * h * m0 + (-2 * s3 + 3 * s2) * x1 + (s3 - s2) * h * m1;
  }
};

bool near_band(const Problem& p, double t, const Vec& x) {
  const double lim = -3.0 * p.set.a1().beta;
  for (int i = 0; i < p.set.count(); ++i)
    if (p.set.raw_value(i, t, x) > lim) return true;
  return false;
}

class AdjointSystem {
 public:
  AdjointSystem(const Problem& p, const Trajectory& tr, const AdjointOptions& opt)
      : p_(p), tr_(tr), level_(level_of(tr)) {
    OdeOptions oo;
    oo.rtol = opt.rtol;
    oo.atol = opt.atol;
    oo.force_implicit = opt.force_implicit;
    stepper_ = std::make_unique<Stepper>(
        [this](double t, const Vec& y, Vec& dy) { dy = matrix(t) * y; },
        [this](double t, const Vec&, Mat& J) { J = matrix(t); }, oo);
    ceiling_ = 0.5 / level_.gamma * std::min(1.0, 1.0 / level_.mu);
  }

  void set_interval(std::size_t j) {
    seg_.t0 = tr_.t[j];
    seg_.t1 = tr_.t[j + 1];
    seg_.x0 = tr_.x[j];
    seg_.x1 = tr_.x[j + 1];
    u_ = tr_.u[j];
    seg_.m0 = penalized_rhs(p_, level_, seg_.t0, seg_.x0, u_);
    seg_.m1 = penalized_rhs(p_, level_, seg_.t1, seg_.x1, u_);
    const double h = seg_.t1 - seg_.t0;
    const bool band = near_band(p_, seg_.t0, seg_.x0) || near_band(p_, seg_.t1, seg_.x1);
    stepper_->set_h_max(band ? std::min(ceiling_, h) : h);
  }

  Mat matrix(double t) const { return adjoint_matrix(p_, level_, t, seg_.at(t), u_); }
  Stepper& stepper() { return *stepper_; }
  const PenaltyLevel& level() const { return level_; }

 private:
  const Problem& p_;
  const Trajectory& tr_;
  PenaltyLevel level_;
  Segment seg_;
  Vec u_;
  double ceiling_ = 0.0;
  std::unique_ptr<Stepper> stepper_;
};

void check_trajectory(const Problem& p, const Trajectory& tr) {
  if (tr.size() < 2) throw PreconditionError("trajectory has fewer than two nodes");
  if (tr.x.size() != tr.size() || tr.u.size() != tr.size()) throw DimensionMismatch("malformed trajectory");
  if (tr.x.front().size() != p.n) throw DimensionMismatch("trajectory state dimension differs from problem");
}

}  // namespace

AdjointArc integrate_adjoint(const Problem& p, const Trajectory& tr, const TerminalData& terminal,
                             const AdjointOptions& opt) {
  check_trajectory(p, tr);
  if (terminal.pT.size() != p.n) throw DimensionMismatch("terminal adjoint has wrong dimension");
  if (!(terminal.lambda >= 0.0)) throw PreconditionError("lambda must be non-negative");
  const double norm = terminal.lambda + terminal.pT.norm();
  if (std::abs(norm - 1.0) > opt.normalization_tolerance)
    throw PreconditionError("terminal data not normalized: lambda + |pT| = " + std::to_string(norm));

  AdjointSystem sys(p, tr, opt);
  const std::size_t N = tr.size();
  AdjointArc arc;
  arc.t = tr.t;
  arc.lambda = terminal.lambda;
  arc.gamma = tr.gamma;
  arc.sigma = tr.sigma;
  arc.p.assign(N, Vec());
  arc.p[N - 1] = terminal.pT;
  Vec y = terminal.pT;
  for (std::size_t j = N - 1; j-- > 0;) {
    sys.set_interval(j);
    sys.stepper().advance(tr.t[j + 1], tr.t[j], y);
    if (!y.allFinite()) throw StepUnderflow("adjoint became non-finite at t = " + std::to_string(tr.t[j]));
    arc.p[j] = y;
  }
  arc.stats = sys.stepper().stats();

  const int I = p.set.count();
  const PenaltyLevel& level = sys.level();
  arc.pdot.reserve(N);
  arc.grad_dot_p.reserve(N);
  arc.density.reserve(N);
  for (std::size_t j = 0; j < N; ++j) {
    const double t = tr.t[j];
    arc.pdot.push_back(adjoint_matrix(p, level, t, tr.x[j], tr.u[j]) * arc.p[j]);
    std::vector<double> gp(static_cast<std::size_t>(I), 0.0), d(gp), g2(gp);
    const auto xi = penalty_multipliers(p, level, t, tr.x[j]);
    for (int i = 0; i < I; ++i) {
      const auto k = static_cast<std::size_t>(i);
      if (xi[k] == 0.0) continue;
      const Vec g = p.set.jet(i, t, tr.x[j], false).grad;
      gp[k] = g.dot(arc.p[j]);
      g2[k] = g.squaredNorm();
      d[k] = level.gamma * xi[k] * gp[k];
    }
    arc.grad_norm2.push_back(std::move(g2));
    arc.grad_dot_p.push_back(std::move(gp));
    arc.density.push_back(std::move(d));
  }

  std::vector<double> steps;
  for (std::size_t j = 0; j + 1 < N; ++j) steps.push_back((arc.p[j + 1] - arc.p[j]).norm());
  std::vector<double> sorted = steps;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2), sorted.end());
  const double median = sorted[sorted.size() / 2];
  for (std::size_t j = 0; j < steps.size(); ++j)
    if (steps[j] > 10.0 * median && steps[j] > 1e-14) arc.jumps.push_back(j);
  return arc;
}

std::vector<Vec> integrate_adjoint_forward(const Problem& p, const Trajectory& tr, const Vec& p0,
                                           const AdjointOptions& opt) {
  check_trajectory(p, tr);
  AdjointSystem sys(p, tr, opt);
  std::vector<Vec> out{p0};
  Vec y = p0;
  for (std::size_t j = 0; j + 1 < tr.size(); ++j) {
    sys.set_interval(j);
    sys.stepper().advance(tr.t[j], tr.t[j + 1], y);
    out.push_back(y);
  }
  return out;
}

MultiplierRecord extract_multipliers(const Trajectory& tr, const AdjointArc& arc) {
  if (tr.t != arc.t) throw DimensionMismatch("trajectory and adjoint grids differ");
  MultiplierRecord rec;
  rec.xi = tr.xi;
  rec.density = arc.density;
  const std::size_t N = tr.size();
  const std::size_t I = N ? tr.xi.front().size() : 0;
  rec.measure_min = 0.0;
  for (std::size_t i = 0; i < I; ++i) {
    std::vector<double> comp(N), meas(N);
    for (std::size_t j = 0; j < N; ++j) {
      comp[j] = tr.xi[j][i] * std::abs(arc.grad_dot_p[j][i]);
      meas[j] = arc.grad_dot_p[j][i] * arc.density[j][i];
      rec.measure_min = std::min(rec.measure_min, meas[j]);
    }
    rec.complementarity.push_back(trapezoid(tr.t, comp));
    rec.measure_integral.push_back(trapezoid(tr.t, meas));
  }
  return rec;
}

DiagnosticsReport diagnostics(const Trajectory& tr, const AdjointArc& arc) {
  if (tr.t != arc.t) throw DimensionMismatch("trajectory and adjoint grids differ");
  DiagnosticsReport rep;
  rep.gamma = arc.gamma;
  rep.lambda = arc.lambda;
  rep.normalization = arc.lambda + arc.p.back().norm();
  rep.jump_count = arc.jumps.size();
  const std::size_t N = tr.size();
  const std::size_t I = N ? tr.xi.front().size() : 0;
  std::vector<double> weighted(N, 0.0), var(N, 0.0), dens(N, 0.0);
  for (std::size_t j = 0; j < N; ++j) {
    rep.p_sup = std::max(rep.p_sup, arc.p[j].norm());
    var[j] = arc.pdot[j].norm();
    for (std::size_t i = 0; i < I; ++i) {
      const double d = std::abs(arc.density[j][i]);
      dens[j] += d;
      weighted[j] += d * arc.grad_norm2[j][i];
    }
  }
  for (std::size_t i = 0; i < I; ++i) {
    std::vector<double> comp(N);
    for (std::size_t j = 0; j < N; ++j) comp[j] = tr.xi[j][i] * std::abs(arc.grad_dot_p[j][i]);
    rep.xi_grad_p_L1.push_back(trapezoid(tr.t, comp));
  }
  rep.adjoint_var_L1 = trapezoid(tr.t, var);
  rep.density_L1 = trapezoid(tr.t, dens);
  rep.weighted_L1 = trapezoid(tr.t, weighted);
  return rep;
}

}  // namespace sweepmp
