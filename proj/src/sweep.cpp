#include "sweepmp/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sweepmp/errors.hpp"
#include "sweepmp/rng.hpp"

namespace sweepmp {

double mu_of_gamma(double mu, double eta, double gamma) {
  if (!(gamma > 0.0) || !(mu > 0.0) || !(eta > 0.0))
    throw InvalidParameters("mu(gamma) needs positive mu, eta and gamma");
  return std::log(mu / (eta * eta * gamma)) / gamma;
}

namespace {

Vec sample_control(Rng& rng, const ControlSet& U) {
  if (U.kind == ControlSet::Kind::Finite) return U.points[static_cast<std::size_t>(rng.below(U.points.size()))];
  Vec u(U.lo.size());
  for (int k = 0; k < u.size(); ++k) u[k] = U.lo[k] + rng.uniform() * (U.hi[k] - U.lo[k]);
  return u;
}

// A point of the ball with max_i psi_i <= level_cap, steered towards a random
// level in (lo, hi] of a random constraint with probability `targeted`.
std::optional<Vec> sample_region(Rng& rng, const MovingSet& set, double t, double level_cap, double lo,
                                 double hi, double targeted) {
  const double r = set.bounding_radius();
  Vec x = uniform_in_ball(rng, set.dim(), r);
  if (rng.uniform() < targeted) {
    const int i = static_cast<int>(rng.below(static_cast<std::uint64_t>(set.count())));
    const double level = lo + (hi - lo) * (1.0 - rng.uniform());
    if (auto y = steer_to_levels(set, t, x, {i}, {level}); y && y->norm() <= r) x = *y;
  }
  if (set.max_raw(t, x) > level_cap) return std::nullopt;
  return x;
}

}  // namespace

MuEstimate estimate_mu(const Problem& p, std::size_t samples, std::uint64_t seed) {
  const MovingSet& set = p.set;
  const double beta = set.a1().beta;
  Rng rng(seed);
  MuEstimate best;
  best.mu = 1.0;
  for (std::size_t s = 0; s < samples; ++s) {
    const double t = p.horizon * rng.uniform();
    const Vec u = sample_control(rng, p.controls);
    const auto x = sample_region(rng, set, t, beta, -2.0 * beta, beta, 0.5);
    ++best.samples;
    if (!x) continue;
    const double fnorm = p.dynamics.eval(t, *x, u).norm();
    for (int i = 0; i < set.count(); ++i) {
      const ConstraintJet j = set.jet(i, t, *x, false);
      const double v = j.grad.norm() * fnorm + std::abs(j.dt) + 1.0;
      if (v > best.mu) {
        best.mu = v;
        best.t = t;
        best.x = *x;
        best.u = u;
        best.constraint = i;
      }
    }
  }
  return best;
}

InclusionCheck check_inclusion(const MovingSet& set, double mu, double eta, const std::vector<double>& gammas,
                               const std::vector<double>& sigmas, const SamplingPlan& plan) {
  if (gammas.size() != sigmas.size()) throw DimensionMismatch("gamma and sigma lists differ in length");
  InclusionCheck out;
  Rng rng(plan.seed);
  std::vector<double> mus;
  for (double g : gammas) mus.push_back(mu_of_gamma(mu, eta, g));
  for (std::size_t s = 0; s < plan.count; ++s) {
    const double t = plan.horizon * rng.uniform();
    const auto x = sample_region(rng, set, t, 0.0, -set.a1().beta, 0.0, 0.5);
    ++out.samples;
    if (!x) continue;
    double top = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < set.count(); ++i) top = std::max(top, set.value(i, t, *x));
    for (std::size_t k = 0; k < gammas.size(); ++k) {
      const double margin = top - sigmas[k] - mus[k];
      if (margin > out.worst_margin) {
        out.worst_margin = margin;
        out.worst_k = static_cast<int>(k);
        out.t = t;
        out.x = *x;
      }
    }
  }
  out.holds = out.worst_margin < 0.0;
  return out;
}

PenaltySchedule PenaltySchedule::from_lists(const MovingSet& set, double mu, double eta, std::vector<double> gammas,
                                            std::vector<double> sigmas, const SamplingPlan& plan) {
  if (gammas.empty()) throw InvalidParameters("empty gamma list");
  if (gammas.size() != sigmas.size()) throw DimensionMismatch("gamma and sigma lists differ in length");
  for (std::size_t k = 0; k < gammas.size(); ++k) {
    if (!(gammas[k] > 0.0)) throw InvalidParameters("gamma must be positive");
    if (!(sigmas[k] >= 0.0)) throw InvalidParameters("sigma must be non-negative");
    if (k > 0 && !(gammas[k] > gammas[k - 1])) throw InvalidParameters("gammas must be increasing");
  }
  PenaltySchedule s;
  s.mu = mu;
  s.eta = eta;
  s.gammas = std::move(gammas);
  s.sigmas = std::move(sigmas);
  for (std::size_t k = 0; k < s.gammas.size(); ++k) {
    s.mus.push_back(mu_of_gamma(mu, eta, s.gammas[k]));
    if (s.mus.back() <= -set.a1().beta) s.below_band.push_back(static_cast<int>(k));
  }
  s.inclusion = check_inclusion(set, mu, eta, s.gammas, s.sigmas, plan);
  return s;
}

PenaltySchedule build_schedule(const MovingSet& set, double mu, double eta, std::vector<double> gammas,
                               double c_margin, const SamplingPlan& plan) {
  if (!(c_margin > 0.0)) throw InvalidParameters("c_margin must be positive");
  std::vector<double> sigmas;
  for (double g : gammas) sigmas.push_back(c_margin / g);
  PenaltySchedule s = PenaltySchedule::from_lists(set, mu, eta, std::move(gammas), std::move(sigmas), plan);
  if (!s.below_band.empty()) {
    const auto k = static_cast<std::size_t>(s.below_band.front());
    throw ScheduleInfeasible("mu_k = " + std::to_string(s.mus[k]) + " <= -beta at gamma = " +
                             std::to_string(s.gammas[k]));
  }
  if (!s.inclusion.holds) {
    const auto k = static_cast<std::size_t>(s.inclusion.worst_k);
    std::string where;
    for (int a = 0; a < s.inclusion.x.size(); ++a) where += (a ? ", " : "") + std::to_string(s.inclusion.x[a]);
    throw ScheduleInfeasible("C(t) not inside int C^k(t) at gamma = " + std::to_string(s.gammas[k]) +
                             " (t = " + std::to_string(s.inclusion.t) + ", x = (" + where + "), margin " +
                             std::to_string(s.inclusion.worst_margin) + ")");
  }
  return s;
}

// Trajectories ---------------------------------------------------------

Vec Trajectory::state_at(double time) const {
  if (t.empty()) throw PreconditionError("empty trajectory");
  if (time <= t.front()) return x.front();
  if (time >= t.back()) return x.back();
  const auto it = std::upper_bound(t.begin(), t.end(), time);
  const auto j = static_cast<std::size_t>(it - t.begin()) - 1;
  const double w = (time - t[j]) / (t[j + 1] - t[j]);
  return (1.0 - w) * x[j] + w * x[j + 1];
}

std::vector<double> make_grid(double horizon, double dt, const std::vector<double>& breaks) {
  if (!(horizon > 0.0)) throw InvalidParameters("horizon must be positive");
  if (!(dt > 0.0)) throw InvalidParameters("grid spacing must be positive");
  const auto n = static_cast<std::size_t>(std::ceil(horizon / dt - 1e-9));
  std::vector<double> g;
  g.reserve(n + 1 + breaks.size());
  for (std::size_t j = 0; j <= n; ++j) g.push_back(horizon * static_cast<double>(j) / static_cast<double>(n));
  g.back() = horizon;
  const double tol = 1e-12 * horizon;
  for (double b : breaks) {
    if (b <= tol || b >= horizon - tol) continue;
    const auto it = std::lower_bound(g.begin(), g.end(), b);
    if (std::abs(*it - b) <= tol || std::abs(*(it - 1) - b) <= tol) continue;
    g.insert(it, b);
  }
  return g;
}

namespace {

struct PenaltyModel {
  const Problem& p;
  PenaltyLevel level;
  Vec u;

  double xi(double value) const { return level.gamma * std::exp(level.gamma * (value - level.sigma)); }

  void rhs(double t, const Vec& x, Vec& dx) const {
    dx = p.dynamics.eval(t, x, u);
    const double floor = -2.0 * p.set.a1().beta;
    for (int i = 0; i < p.set.count(); ++i) {
      if (p.set.raw_value(i, t, x) <= floor) continue;
      const ConstraintJet j = p.set.jet(i, t, x, false);
      dx -= xi(j.value) * j.grad;
    }
  }

  void jacobian(double t, const Vec& x, Mat& J) const {
    J = p.dynamics.jacobian(t, x, u);
    const double floor = -2.0 * p.set.a1().beta;
    for (int i = 0; i < p.set.count(); ++i) {
      if (p.set.raw_value(i, t, x) <= floor) continue;
      const ConstraintJet j = p.set.jet(i, t, x, true);
      J -= xi(j.value) * (j.hess + level.gamma * j.grad * j.grad.transpose());
    }
  }
};

}  // namespace

Vec penalized_rhs(const Problem& p, const PenaltyLevel& level, double t, const Vec& x, const Vec& u) {
  const PenaltyModel model{p, level, u};
  Vec dx;
  model.rhs(t, x, dx);
  return dx;
}

std::vector<double> penalty_multipliers(const Problem& p, const PenaltyLevel& level, double t, const Vec& x) {
  const PenaltyModel model{p, level, Vec(p.m)};
  std::vector<double> xi(static_cast<std::size_t>(p.set.count()), 0.0);
  for (int i = 0; i < p.set.count(); ++i) {
    const double raw = p.set.raw_value(i, t, x);
    if (raw > -2.0 * p.set.a1().beta) xi[static_cast<std::size_t>(i)] = model.xi(p.set.cap().value(raw));
  }
  return xi;
}

Trajectory integrate_penalized(const Problem& p, const ControlSignal& control, const PenaltyLevel& level,
                               const IntegratorOptions& options, const std::optional<Vec>& x0_in) {
  if (!(level.gamma > 0.0)) throw InvalidParameters("gamma must be positive");
  if (!(level.sigma >= 0.0)) throw InvalidParameters("sigma must be non-negative");
  if (control.dim() != p.m) throw DimensionMismatch("control signal has wrong dimension");
  const MovingSet& set = p.set;
  const double beta = set.a1().beta;
  const int I = set.count();

  Trajectory tr;
  tr.gamma = level.gamma;
  tr.sigma = level.sigma;
  tr.mu_k = level.mu_k();
  tr.xi_cap = level.xi_cap();

  const double dt = options.report_dt > 0.0 ? options.report_dt : std::min(1e-3, 0.1 / level.gamma);
  tr.t = make_grid(p.horizon, dt, control.breaks());
  const std::size_t N = tr.t.size();

  Vec x = x0_in ? *x0_in : p.initial.representative();
  if (x.size() != p.n) throw DimensionMismatch("initial state has wrong dimension");

  double start_excess = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < I; ++i) start_excess = std::max(start_excess, set.value(i, 0.0, x) - level.sigma);
  if (options.enforce && start_excess > tr.mu_k + 1e-9)
    throw PreconditionError("initial state is not in C^k(0): max(psi - sigma) = " + std::to_string(start_excess) +
                            " > mu_k = " + std::to_string(tr.mu_k));

  PenaltyModel model{p, level, Vec(p.m)};
  OdeOptions oo;
  oo.rtol = options.rtol;
  oo.atol = options.atol;
  oo.force_implicit = options.force_implicit;
  Stepper stepper([&model](double t, const Vec& y, Vec& dy) { model.rhs(t, y, dy); },
                  [&model](double t, const Vec& y, Mat& J) { model.jacobian(t, y, J); }, oo);
  const double band_ceiling = 0.5 / level.gamma * std::min(1.0, level.eta * level.eta / level.mu);

  tr.x.reserve(N);
  tr.u.reserve(N);
  tr.xdot.reserve(N);
  tr.xi.reserve(N);
  for (std::size_t j = 0; j < N; ++j) {
    const double t = tr.t[j];
    model.u = j + 1 < N ? control.on(t, tr.t[j + 1]) : control.on(tr.t[j - 1], t);
    if (!x.allFinite()) throw InvarianceViolation("state became non-finite at t = " + std::to_string(t));

    // Node record.
    std::vector<double> xi(static_cast<std::size_t>(I), 0.0);
    double excess = -std::numeric_limits<double>::infinity();
    double cross = 0.0;
    bool near_band = false;
    for (int i = 0; i < I; ++i) {
      const double raw = set.raw_value(i, t, x);
      const double v = set.cap().value(raw);
      excess = std::max(excess, v - level.sigma);
      if (raw > -3.0 * beta) near_band = true;
      if (raw > -2.0 * beta) {
        xi[static_cast<std::size_t>(i)] = model.xi(v);
        tr.max_xi = std::max(tr.max_xi, xi[static_cast<std::size_t>(i)]);
      }
      if (!(raw > -2.0 * beta && raw <= beta)) cross += std::exp(level.gamma * (v - level.sigma));
    }
    tr.cross_term = std::max(tr.cross_term, cross);
    tr.max_invariance_excess = std::max(tr.max_invariance_excess, excess - tr.mu_k);
    if (options.enforce) {
      if (excess > tr.mu_k + 1e-9)
        throw InvarianceViolation("x(t) left C^k(t) at t = " + std::to_string(t) + ": max(psi - sigma) - mu_k = " +
                                  std::to_string(excess - tr.mu_k));
      for (double v : xi)
        if (v > tr.xi_cap * (1.0 + 1e-6))
          throw InvarianceViolation("multiplier " + std::to_string(v) + " exceeds the cap " +
                                    std::to_string(tr.xi_cap) + " at t = " + std::to_string(t));
    }
    Vec dx;
    model.rhs(t, x, dx);
    tr.x.push_back(x);
    tr.u.push_back(model.u);
    tr.xdot.push_back(dx);
    tr.xi.push_back(std::move(xi));

    if (j + 1 == N) break;
    const double h = tr.t[j + 1] - t;
    stepper.set_h_max(near_band ? std::min(band_ceiling, h) : h);
    stepper.advance(t, tr.t[j + 1], x);
  }
  tr.stats = stepper.stats();
  return tr;
}

Trajectory catching_up(const Problem& p, const ControlSignal& control, double dt, const std::optional<Vec>& x0_in) {
  if (control.dim() != p.m) throw DimensionMismatch("control signal has wrong dimension");
  const MovingSet& set = p.set;
  const int I = set.count();
  Trajectory tr;
  tr.t = make_grid(p.horizon, dt, control.breaks());
  const std::size_t N = tr.t.size();

  Vec x = x0_in ? *x0_in : p.initial.representative();
  if (x.size() != p.n) throw DimensionMismatch("initial state has wrong dimension");
  if (!set.contains(0.0, x, 1e-9)) throw PreconditionError("initial state is not in C(0)");

  tr.x.push_back(x);
  tr.xi.emplace_back(static_cast<std::size_t>(I), 0.0);
  for (std::size_t j = 0; j + 1 < N; ++j) {
    const double h = tr.t[j + 1] - tr.t[j];
    const Vec u = control.on(tr.t[j], tr.t[j + 1]);
    const Vec y = x + h * p.dynamics.eval(tr.t[j], x, u);
    const ProjectionResult pr = project(set, tr.t[j + 1], y);
    std::vector<double> xi(static_cast<std::size_t>(I));
    for (int i = 0; i < I; ++i) {
      xi[static_cast<std::size_t>(i)] = pr.multipliers[static_cast<std::size_t>(i)] / h;
      tr.max_xi = std::max(tr.max_xi, xi[static_cast<std::size_t>(i)]);
    }
    tr.u.push_back(u);
    tr.xdot.push_back((pr.point - x) / h);
    x = pr.point;
    tr.x.push_back(x);
    tr.xi.push_back(std::move(xi));
  }
  tr.u.push_back(tr.u.empty() ? control.at(0.0) : tr.u.back());
  tr.xdot.push_back(tr.xdot.empty() ? Vec(Vec::Zero(p.n)) : tr.xdot.back());
  return tr;
}

double sup_distance(const Trajectory& a, const Trajectory& b) {
  const Trajectory& coarse = a.size() <= b.size() ? a : b;
  const Trajectory& fine = a.size() <= b.size() ? b : a;
  double sup = 0.0;
  for (std::size_t j = 0; j < coarse.size(); ++j)
    sup = std::max(sup, (coarse.x[j] - fine.state_at(coarse.t[j])).norm());
  return sup;
}

bool non_increasing(const std::vector<double>& v, double slack) {
  for (std::size_t k = 1; k < v.size(); ++k)
    if (v[k] > (1.0 + slack) * v[k - 1]) return false;
  return true;
}

ConvergenceReport convergence_sweep(const Problem& p, const ControlSignal& control, const PenaltySchedule& schedule,
                                    double dt_oracle, double tolerance, const IntegratorOptions& options) {
  ConvergenceReport rep;
  rep.gammas = schedule.gammas;
  rep.sigmas = schedule.sigmas;
  rep.dt_oracle = dt_oracle;
  rep.tolerance = tolerance;
  rep.inclusion_holds = schedule.inclusion.holds;
  if (!schedule.inclusion.holds)
    rep.warnings.push_back("sampled inclusion C(t) in int C^k(t) fails at gamma = " +
                           std::to_string(schedule.gammas.at(static_cast<std::size_t>(schedule.inclusion.worst_k))));
  for (int k : schedule.below_band)
    rep.warnings.push_back("mu_k <= -beta at gamma = " + std::to_string(schedule.gammas[static_cast<std::size_t>(k)]));

  const Trajectory oracle = catching_up(p, control, dt_oracle);
  for (std::size_t k = 0; k < schedule.size(); ++k) {
    const Trajectory tr = integrate_penalized(p, control, schedule.level(k), options);
    rep.sup_errors.push_back(sup_distance(tr, oracle));
    rep.max_xi.push_back(tr.max_xi);
    rep.max_invariance_excess.push_back(tr.max_invariance_excess);
    rep.cross_terms.push_back(tr.cross_term);
  }
  rep.non_increasing = non_increasing(rep.sup_errors, rep.slack);
  rep.final_within_tolerance = !rep.sup_errors.empty() && rep.sup_errors.back() <= tolerance;
  rep.verdict = rep.non_increasing && rep.final_within_tolerance;
  return rep;
}

}  // namespace sweepmp
