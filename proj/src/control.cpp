#include "sweepmp/control.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "sweepmp/errors.hpp"
#include "sweepmp/parallel.hpp"

namespace sweepmp {

double TwoSphereParams::y1() const { return std::sqrt(1.0 - x0 * x0 - (z0 + h) * (z0 + h)); }
double TwoSphereParams::y2() const { return std::sqrt(1.0 - h * h); }

void TwoSphereParams::check() const {
  const auto fail = [](const std::string& what) { throw InvalidParameters("two-sphere parameters: " + what); };
  if (!(2.0 * h * h < 1.0)) fail("2 h^2 < 1 fails");
  if (!(h > 0.0)) fail("h > 0 fails");
  if (!(sigma_drift >= 0.0)) fail("sigma_drift >= 0 fails");
  if (!(delta > 0.0)) fail("delta > 0 fails");
  if (!(x0 < -delta)) fail("x0 < -delta fails");
  if (!(z0 > 0.0)) fail("z0 > 0 fails");
  if (!(x0 * x0 + (z0 + h) * (z0 + h) < 1.0)) fail("x0^2 + (z0 + h)^2 < 1 fails (start not interior)");
  if (!(x0 * x0 + (z0 - h) * (z0 - h) < 1.0)) fail("x0^2 + (z0 - h)^2 < 1 fails (start not interior)");
  if (!(delta < y2() * std::abs(x0) / y1())) fail("delta < y2 |x0| / y1 fails");
  if (!(T > 0.0)) fail("T > 0 fails");
}

double two_sphere_eta(const TwoSphereParams& prm) { return 0.9 * 2.0 * std::sqrt(1.0 - prm.beta); }

Problem build_two_sphere(const TwoSphereParams& prm) {
  prm.check();
  const auto vars = variable_names(3, 1);
  const auto num = [](double v) {
    std::ostringstream s;
    s.precision(17);
    s << "(" << v << ")";
    return s.str();
  };
  const auto P = [&](const std::string& src) { return parse(src, vars); };
  const std::string h = num(prm.h);
  std::vector<Expr> f{P(num(prm.sigma_drift) + "*x2"), P("u1"), P("0")};
  std::vector<Expr> psi{P("x1^2 + x2^2 + (x3 + " + h + ")^2 - 1"), P("x1^2 + x2^2 + (x3 - " + h + ")^2 - 1")};
  const std::string d = num(prm.delta), y2 = num(prm.y2());
  std::vector<Expr> face{P("x1"), P("neg(x2)"), P(d + "*x2 - " + y2 + "*x1 - " + d + "*" + y2)};
  A1Constants a1{prm.beta, two_sphere_eta(prm), prm.rho};
  Vec x0(3);
  x0 << prm.x0, 0.0, prm.z0;
  InitialSet c0;
  c0.kind = InitialSet::Kind::Point;
  c0.points = {x0};
  Vec lo(1), hi(1);
  lo << -1.0;
  hi << 1.0;
  return Problem{"two_sphere",
                 3,
                 1,
                 prm.T,
                 Dynamics(std::move(f), 3, 1),
                 MovingSet(std::move(psi), 3, a1, 2.0),
                 ControlSet::box(lo, hi),
                 c0,
                 TerminalSet(std::move(face), true, 3),
                 Cost(P("neg(x1)"), 3)};
}

ContactTimes detect_contact(const Trajectory& tr, double fraction) {
  ContactTimes c;
  c.threshold = fraction * tr.xi_cap;
  for (std::size_t j = 0; j < tr.size(); ++j) {
    const auto& xi = tr.xi[j];
    const bool first = !xi.empty() && xi[0] > c.threshold;
    const bool both = xi.size() > 1 && xi[0] > c.threshold && xi[1] > c.threshold;
    const bool any = std::any_of(xi.begin(), xi.end(), [&](double v) { return v > c.threshold; });
    if (first && !c.t1) c.t1 = tr.t[j];
    if (both && !c.t2) c.t2 = tr.t[j];
    if (any) c.t3 = tr.t[j];
  }
  return c;
}

ControlSignal switching_control(double t_switch) {
  return ControlSignal::switching(t_switch, Vec::Constant(1, 1.0), Vec::Constant(1, -1.0));
}

SwitchRun simulate_control(const Problem& p, const PenaltyLevel& level, const ControlSignal& control,
                           const SwitchOptions& opt) {
  SwitchRun run;
  run.traj = integrate_penalized(p, control, level, opt.integrator);
  const Vec& xT = run.traj.x.back();
  run.objective = p.cost.value(xT);
  run.terminal_violation = p.terminal_violation(xT);
  run.feasible = run.terminal_violation <= opt.feasibility_tol + opt.terminal_inflation;
  run.contact = detect_contact(run.traj, opt.contact_fraction);
  return run;
}

SwitchRun simulate_switching(const Problem& p, const PenaltyLevel& level, double t_switch, const SwitchOptions& opt) {
  if (!(t_switch > 0.0 && t_switch < p.horizon)) throw InvalidParameters("switching time must lie in (0, T)");
  SwitchRun run = simulate_control(p, level, switching_control(t_switch), opt);
  run.t_switch = t_switch;
  return run;
}

namespace {

struct Score {
  bool feasible;
  double value;  // cost when feasible, violation otherwise
  bool better_than(const Score& o) const {
    if (feasible != o.feasible) return feasible;
    return value < o.value;
  }
};

}  // namespace

SwitchOptimum optimize_switching(const Problem& p, const PenaltyLevel& level, std::pair<double, double> bracket,
                                 const OptimizeOptions& opt) {
  auto [a, b] = bracket;
  if (!(0.0 < a && a < b && b < p.horizon)) throw InvalidParameters("bracket must satisfy 0 < a < b < T");
  SwitchOptimum out;
  out.agreement = opt.agreement;
  const auto eval = [&](double t) {
    const SwitchRun r = simulate_switching(p, level, t, opt.run);
    out.trace.emplace_back(t, r.objective, r.feasible);
    return std::pair{Score{r.feasible, r.feasible ? r.objective : r.terminal_violation}, r.objective};
  };

  // Grid scan first: it decides whether the bracket holds any feasible switch.
  const int G = std::max(2, opt.grid_points);
  std::vector<std::tuple<double, double, bool>> grid_trace(static_cast<std::size_t>(G));
  parallel_for(grid_trace.size(), [&](std::size_t k) {
    const double t = a + (b - a) * static_cast<double>(k) / (G - 1);
    const SwitchRun r = simulate_switching(p, level, t, opt.run);
    grid_trace[k] = {t, r.objective, r.feasible};
  });
  std::optional<std::pair<double, double>> grid_best;
  for (const auto& [t, obj, feasible] : grid_trace)
    if (feasible && (!grid_best || obj < grid_best->second)) grid_best = std::pair{t, obj};
  if (!grid_best) throw NoFeasibleSwitch("no feasible switching time in the bracket");

  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - g * (b - a), d = a + g * (b - a);
  auto fc = eval(c), fd = eval(d);
  while (b - a > opt.width) {
    if (!fd.first.better_than(fc.first)) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = eval(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = eval(d);
    }
  }
  const bool left = !fd.first.better_than(fc.first);
  out.t_star = left ? c : d;
  if (!(left ? fc : fd).first.feasible) {
    // Golden section ended on an infeasible point; fall back to the grid optimum.
    out.t_star = grid_best->first;
  }
  out.objective = simulate_switching(p, level, out.t_star, opt.run).objective;
  out.grid_t_star = grid_best->first;
  out.grid_objective = grid_best->second;
  out.agree = std::abs(out.t_star - out.grid_t_star) <= opt.agreement;
  out.trace.insert(out.trace.end(), grid_trace.begin(), grid_trace.end());
  return out;
}

BangBangReport bang_bang_dominance(const Problem& p, const PenaltyLevel& level, int grid, const SwitchOptions& opt) {
  BangBangReport rep;
  const double T = p.horizon;
  std::vector<double> ts;
  for (int k = 1; k <= grid; ++k) ts.push_back(T * k / (grid + 1));
  const double inf = std::numeric_limits<double>::infinity();
  rep.best_single = inf;
  rep.best_double = inf;
  std::vector<SwitchRun> single(ts.size());
  parallel_for(ts.size(), [&](std::size_t k) { single[k] = simulate_switching(p, level, ts[k], opt); });
  for (const SwitchRun& r : single) {
    if (!r.feasible) continue;
    ++rep.feasible_single;
    if (r.objective < rep.best_single) {
      rep.best_single = r.objective;
      rep.best_single_t = r.t_switch;
    }
  }
  struct Pair {
    double first;
    std::size_t i, j;
  };
  std::vector<Pair> pairs;
  for (double first : {1.0, -1.0})
    for (std::size_t i = 0; i < ts.size(); ++i)
      for (std::size_t j = i + 1; j < ts.size(); ++j) pairs.push_back({first, i, j});
  std::vector<std::pair<double, bool>> results(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t k) {
    const Pair& q = pairs[k];
    const Vec a = Vec::Constant(1, q.first), b = Vec::Constant(1, -q.first);
    const SwitchRun r = simulate_control(p, level, ControlSignal({ts[q.i], ts[q.j]}, {a, b, a}), opt);
    results[k] = {r.objective, r.feasible};
  });
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    if (!results[k].second) continue;
    ++rep.feasible_double;
    if (results[k].first < rep.best_double) {
      rep.best_double = results[k].first;
      rep.best_double_t = {ts[pairs[k].i], ts[pairs[k].j]};
      rep.best_double_first = pairs[k].first;
    }
  }
  rep.pass = rep.feasible_single > 0 && rep.best_single <= rep.best_double + rep.slack;
  return rep;
}

double penalized_objective(const Problem& p, const Trajectory& tr, double alpha, const ControlSignal& ref,
                           const Vec& ref_x0) {
  double J = p.cost.value(tr.x.back()) + (tr.x.front() - ref_x0).squaredNorm();
  if (alpha == 0.0) return J;
  double integral = 0.0;
  for (std::size_t j = 0; j + 1 < tr.size(); ++j) {
    // The trajectory control is constant on [t_j, t_{j+1}); split at reference breaks.
    std::vector<double> cuts{tr.t[j]};
    for (double br : ref.breaks())
      if (br > tr.t[j] && br < tr.t[j + 1]) cuts.push_back(br);
    cuts.push_back(tr.t[j + 1]);
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k)
      integral += (cuts[k + 1] - cuts[k]) * (tr.u[j] - ref.on(cuts[k], cuts[k + 1])).norm();
  }
  return J + alpha * integral;
}

ArcCheck check_arc_formulas(const TwoSphereParams& prm, const Trajectory& tr, const ContactTimes& c, double trim) {
  ArcCheck out;
  out.trim = trim;
  if (!c.t1 || !c.t2 || !c.t3) return out;
  const double s = prm.sigma_drift, w = 1.0 - prm.h * prm.h;
  for (std::size_t j = 0; j < tr.size(); ++j) {
    const double t = tr.t[j];
    const double x = tr.x[j][0], y = tr.x[j][1], u = tr.u[j][0];
    const double xi1 = tr.xi[j][0], xi2 = tr.xi[j][1];
    if (t >= *c.t2 + trim && t <= *c.t3 - trim) {
      ++out.intersection_nodes;
      out.intersection_formula = std::max(out.intersection_formula, std::abs(xi1 - (s * x * y + u * y) / (4.0 * w)));
      out.intersection_gap = std::max(out.intersection_gap, std::abs(xi1 - xi2));
    } else if (t >= *c.t1 + trim && t <= *c.t2 - trim) {
      ++out.single_nodes;
      out.single_formula = std::max(out.single_formula, std::abs(xi1 - (s * x * y + u * y) / 2.0));
      out.single_xi2 = std::max(out.single_xi2, xi2);
    }
  }
  return out;
}

SignPattern q_sign_pattern(const AdjointArc& arc, double dead_band) {
  SignPattern s;
  int last = 0;
  for (std::size_t j = 0; j < arc.size(); ++j) {
    const double q = arc.p[j][1];
    if (std::abs(q) < dead_band) continue;
    const int sg = q > 0.0 ? 1 : -1;
    if (last != 0 && sg != last) {
      ++s.sign_changes;
      if (!s.change_time) s.change_time = arc.t[j];
    }
    last = sg;
  }
  s.q_T = arc.p.back()[1];
  s.p_T = arc.p.back()[0];
  s.pass = s.sign_changes == 1 && s.p_T > 0.0 && s.q_T < 0.0;
  return s;
}

ExampleReport run_example(const Problem& p, const TwoSphereParams& prm, const PenaltyLevel& level, int grid_points,
                          int bang_bang_grid) {
  ExampleReport r;
  OptimizeOptions oo;
  oo.run.integrator.report_dt = 1e-2;
  oo.grid_points = grid_points;
  r.optimum = optimize_switching(p, level, {0.5 * p.horizon, 0.995 * p.horizon}, oo);
  r.bang_bang = bang_bang_dominance(p, level, bang_bang_grid, oo.run);

  r.run = simulate_switching(p, level, r.optimum.t_star);
  r.arcs = check_arc_formulas(prm, r.run.traj, r.run.contact, 10.0 / level.gamma);
  r.fit = fit_terminal_multipliers(p, r.run.traj);
  r.arc = certificate_adjoint(p, r.run.traj, r.fit);
  r.sign = q_sign_pattern(r.arc);
  r.mp = certify(p, r.run.traj, r.arc);
  r.mp.nu = r.fit.nu;

  const double cap = level.xi_cap();
  const ArcCheck& a = r.arcs;
  r.checks = {{"contact_ordered", r.run.contact.ordered(p.horizon)},
              {"golden_agrees_with_grid", r.optimum.agree},
              {"bang_bang_dominance", r.bang_bang.pass},
              {"q_sign_pattern", r.sign.pass},
              {"intersection_formula",
               a.intersection_nodes > 0 && a.intersection_formula <= 5e-2 && a.intersection_gap <= 5e-2 * cap},
              {"single_sphere_formula", a.single_nodes > 0 && a.single_formula <= 5e-2 && a.single_xi2 <= 1e-3}};
  r.verdict = std::all_of(r.checks.begin(), r.checks.end(), [](const auto& c) { return c.second; });
  return r;
}

}  // namespace sweepmp
