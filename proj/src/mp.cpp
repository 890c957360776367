#include "sweepmp/mp.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "sweepmp/errors.hpp"

namespace sweepmp {

const ConditionResult& MPReport::condition(std::string_view name) const {
  for (const ConditionResult& c : conditions)
    if (c.name == name) return c;
  throw PreconditionError("no condition named '" + std::string(name) + "'");
}

// Normal cones ---------------------------------------------------------

NormalCone initial_normal_cone(const InitialSet& set, const Vec& x0, double tol) {
  NormalCone cone;
  switch (set.kind) {
    case InitialSet::Kind::Point:
    case InitialSet::Kind::Points:
      // Isolated points: the normal cone is the whole space.
      cone.whole_space = true;
      break;
    case InitialSet::Kind::Ball: {
      const Vec d = x0 - set.center;
      if (d.norm() >= set.radius - tol && d.norm() > 0.0) cone.generators.push_back(d / d.norm());
      break;
    }
  }
  return cone;
}

NormalCone terminal_normal_cone(const Problem& p, const Vec& xT, double active_tol) {
  NormalCone cone;
  if (!p.terminal) return cone;
  const auto add = [&](const Vec& g, const std::string& what) {
    if (g.norm() < 1e-12) throw UnsupportedGeometry("active " + what + " has a vanishing gradient at x(T)");
    cone.generators.push_back(g);
  };
  for (int j = 0; j < p.terminal->count(); ++j)
    if (p.terminal->value(j, xT) >= -active_tol) add(p.terminal->gradient(j, xT), "terminal inequality");
  if (p.terminal->within_moving_set())
    for (int i = 0; i < p.set.count(); ++i)
      if (p.set.raw_value(i, p.horizon, xT) >= -active_tol)
        add(p.set.raw_jet(i, p.horizon, xT, false).grad, "moving-set constraint");
  return cone;
}

double cone_distance(const NormalCone& cone, const Vec& v) {
  if (cone.whole_space) return 0.0;
  const std::size_t k = cone.generators.size();
  if (k == 0) return v.norm();
  if (k > 12) throw UnsupportedGeometry("too many active normals for the exact cone projection");
  // Exact NNLS by enumerating supports: the optimum is an unconstrained least
  // squares fit on some support with non-negative coefficients.
  double best = v.norm();
  for (std::uint32_t mask = 1; mask < (1u << k); ++mask) {
    std::vector<std::size_t> cols;
    for (std::size_t a = 0; a < k; ++a)
      if (mask & (1u << a)) cols.push_back(a);
    Eigen::MatrixXd A(v.size(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) A.col(static_cast<Eigen::Index>(c)) = cone.generators[cols[c]];
    const Eigen::VectorXd w = A.completeOrthogonalDecomposition().solve(Eigen::VectorXd(v));
    if ((w.array() < -1e-14).any()) continue;
    best = std::min(best, (Eigen::VectorXd(v) - A * w.cwiseMax(0.0)).norm());
  }
  return best;
}

// Maximization ---------------------------------------------------------

namespace {

// Per-node data shared by the residual and the terminal fit.
struct NodeScan {
  std::vector<std::size_t> nodes;
  std::vector<double> weight;  // 1 or 1 / band_relaxation
  std::vector<Vec> u_hat;
};

bool switching_node(const Trajectory& tr, std::size_t j) {
  const auto differs = [&](std::size_t a, std::size_t b) { return (tr.u[a] - tr.u[b]).cwiseAbs().maxCoeff() > 0.0; };
  if (j > 0 && differs(j, j - 1)) return true;
  if (j + 1 < tr.size() && differs(j, j + 1)) return true;
  return false;
}

bool in_band(const Problem& p, double t, const Vec& x) {
  const double beta = p.set.a1().beta;
  for (int i = 0; i < p.set.count(); ++i)
    if (std::abs(p.set.raw_value(i, t, x)) < beta) return true;
  return false;
}

NodeScan scan_nodes(const Problem& p, const Trajectory& tr, const ControlSignal* reference, double relax,
                    bool skip_switches) {
  NodeScan s;
  const std::size_t N = tr.size();
  for (std::size_t j = 0; j < N; ++j) {
    if (skip_switches && switching_node(tr, j)) continue;
    s.nodes.push_back(j);
    s.weight.push_back(in_band(p, tr.t[j], tr.x[j]) ? 1.0 / relax : 1.0);
    if (reference) {
      const double a = j + 1 < N ? tr.t[j] : tr.t[j - 1];
      const double b = j + 1 < N ? tr.t[j + 1] : tr.t[j];
      s.u_hat.push_back(reference->on(a, b));
    } else {
      s.u_hat.push_back(tr.u[j]);
    }
  }
  return s;
}

}  // namespace

double maximization_residual(const Problem& p, const Trajectory& tr, const AdjointArc& arc, int ugrid_resolution,
                             const MaximizationOptions& opt) {
  if (tr.t != arc.t) throw DimensionMismatch("trajectory and adjoint grids differ");
  const auto grid = p.controls.grid(ugrid_resolution);
  const NodeScan scan = scan_nodes(p, tr, opt.reference, opt.band_relaxation, opt.skip_switches);
  const std::size_t N = tr.size();
  double sup = 0.0;
  for (std::size_t a = 0; a < scan.nodes.size(); ++a) {
    const std::size_t j = scan.nodes[a];
    const double t = tr.t[j];
    const Vec& uh = scan.u_hat[a];
    Vec uk = tr.u[j];
    if (opt.previous) uk = opt.previous->on(j + 1 < N ? t : tr.t[j - 1], j + 1 < N ? tr.t[j + 1] : t);
    const auto H = [&](const Vec& u) {
      double h = arc.p[j].dot(p.dynamics.eval(t, tr.x[j], u));
      if (opt.alpha != 0.0) h -= opt.alpha * arc.lambda * (u - uh).norm();
      if (opt.eps != 0.0) h -= opt.eps * arc.lambda * (u - uk).norm();
      return h;
    };
    const double base = H(uh);
    double best = base;
    for (const Vec& u : grid) best = std::max(best, H(u));
    sup = std::max(sup, (best - base) * scan.weight[a]);
  }
  return sup;
}

// Terminal fit ---------------------------------------------------------

namespace {

AdjointArc raw_arc(const Problem& p, const Trajectory& tr, double lambda, const Vec& pT) {
  AdjointOptions o;
  o.normalization_tolerance = std::numeric_limits<double>::infinity();
  return integrate_adjoint(p, tr, {lambda, pT}, o);
}

double golden_min(const std::function<double(double)>& f, double a, double b, int iters) {
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = f(c), fd = f(d);
  for (int k = 0; k < iters; ++k) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = f(d);
    }
  }
  return fc <= fd ? c : d;
}

}  // namespace

TerminalFit fit_terminal_multipliers(const Problem& p, const Trajectory& tr, const ToleranceSet& tol) {
  const Vec xT = tr.x.back();
  const Vec gphi = p.cost.gradient(xT);
  TerminalFit fit;
  fit.corollary = !p.terminal;
  if (fit.corollary) {
    fit.terminal = {1.0, -gphi};
    const AdjointArc arc = raw_arc(p, tr, 1.0, -gphi);
    MaximizationOptions mo;
    mo.band_relaxation = tol.band_relaxation;
    fit.residual = maximization_residual(p, tr, arc, tol.control_grid, mo) / (1.0 + gphi.norm());
    return fit;
  }

  fit.normals = terminal_normal_cone(p, xT, tol.active).generators;
  const std::size_t k = fit.normals.size();
  std::vector<AdjointArc> basis;
  basis.push_back(raw_arc(p, tr, 0.0, -gphi));
  for (const Vec& nrm : fit.normals) basis.push_back(raw_arc(p, tr, 0.0, -nrm));

  // Pairings <P_b(t_j), f(t_j, x_j, u) - f(t_j, x_j, u_hat_j)> per node and grid control.
  const auto grid = p.controls.grid(tol.control_grid);
  const NodeScan scan = scan_nodes(p, tr, nullptr, tol.band_relaxation, true);
  const std::size_t G = grid.size();
  std::vector<std::vector<double>> pair(k + 1, std::vector<double>(scan.nodes.size() * G));
  for (std::size_t a = 0; a < scan.nodes.size(); ++a) {
    const std::size_t j = scan.nodes[a];
    const Vec f0 = p.dynamics.eval(tr.t[j], tr.x[j], scan.u_hat[a]);
    for (std::size_t g = 0; g < G; ++g) {
      const Vec D = (p.dynamics.eval(tr.t[j], tr.x[j], grid[g]) - f0) * scan.weight[a];
      for (std::size_t b = 0; b <= k; ++b) pair[b][a * G + g] = basis[b].p[j].dot(D);
    }
  }
  const auto objective = [&](double lambda, const std::vector<double>& nu) {
    Vec pT = -lambda * gphi;
    for (std::size_t b = 0; b < k; ++b) pT -= nu[b] * fit.normals[b];
    const double N = lambda + pT.norm();
    if (!(N > 1e-300)) return std::numeric_limits<double>::infinity();
    double sup = 0.0;
    for (std::size_t q = 0; q < pair[0].size(); ++q) {
      double v = lambda * pair[0][q];
      for (std::size_t b = 0; b < k; ++b) v += nu[b] * pair[b + 1][q];
      sup = std::max(sup, v);
    }
    return sup / N;
  };

  double best = std::numeric_limits<double>::infinity();
  double best_lambda = 1.0;
  std::vector<double> best_nu(k, 0.0);
  for (double lambda : {1.0, 0.75, 0.5, 0.25, 0.0}) {
    std::vector<double> nu(k, lambda == 0.0 ? 1.0 : 0.0);
    double val = objective(lambda, nu);
    for (int pass = 0; pass < (k > 0 ? 3 : 0); ++pass) {
      for (std::size_t b = 0; b < k; ++b) {
        // Log scan over nu_b in {0} U [1e-4, 1e4], then golden refinement.
        const auto at = [&](double v) {
          std::vector<double> trial = nu;
          trial[b] = v;
          return objective(lambda, trial);
        };
        double arg = nu[b];
        double argval = val;
        int arg_e = -1000;
        if (double v0 = at(0.0); v0 < argval) {
          argval = v0;
          arg = 0.0;
        }
        for (int e = -40; e <= 40; ++e) {
          const double v = std::pow(10.0, 0.1 * e);
          if (const double fv = at(v); fv < argval) {
            argval = fv;
            arg = v;
            arg_e = e;
          }
        }
        if (arg_e > -1000) {
          const double lo = 0.1 * (arg_e - 1), hi = 0.1 * (arg_e + 1);
          const double e_star = golden_min([&](double e) { return at(std::pow(10.0, e)); }, lo, hi, 40);
          if (const double fv = at(std::pow(10.0, e_star)); fv < argval) {
            argval = fv;
            arg = std::pow(10.0, e_star);
          }
        }
        nu[b] = arg;
        val = argval;
      }
    }
    if (val < best * (1.0 - 1e-12) || !std::isfinite(best)) {
      best = val;
      best_lambda = lambda;
      best_nu = nu;
    }
  }

  Vec pT = -best_lambda * gphi;
  for (std::size_t b = 0; b < k; ++b) pT -= best_nu[b] * fit.normals[b];
  const double N = best_lambda + pT.norm();
  if (!(N > 0.0)) throw PreconditionError("terminal fit produced trivial multipliers");
  fit.terminal = {best_lambda / N, pT / N};
  for (double v : best_nu) fit.nu.push_back(v / N);
  fit.residual = best;
  return fit;
}

AdjointArc certificate_adjoint(const Problem& p, const Trajectory& tr, const TerminalFit& fit) {
  if (fit.corollary) return raw_arc(p, tr, fit.terminal.lambda, fit.terminal.pT);
  return integrate_adjoint(p, tr, fit.terminal);
}

// Certificate ----------------------------------------------------------

MPReport certify(const Problem& p, const Trajectory& tr, const AdjointArc& arc, const ToleranceSet& tol) {
  if (tr.t != arc.t) throw DimensionMismatch("trajectory and adjoint grids differ");
  if (!(tr.gamma > 0.0)) throw PreconditionError("certify needs a penalized trajectory");
  const std::size_t N = tr.size();
  const int I = p.set.count();

  MPReport rep;
  rep.corollary = !p.terminal;
  rep.gamma = tr.gamma;
  rep.lambda = arc.lambda;
  rep.normalization = arc.lambda + arc.p.back().norm();
  const double scale = rep.normalization > 0.0 ? 1.0 / rep.normalization : 0.0;
  rep.pT = arc.p.back() * scale;
  const auto add = [&](std::string name, double residual, double tolerance, bool pass) {
    rep.conditions.push_back({std::move(name), residual, tolerance, pass});
  };

  // a) nontriviality
  {
    const double r = rep.corollary ? 0.0
                     : rep.normalization > 0.0
                         ? std::abs(arc.lambda * scale + arc.p.back().norm() * scale - 1.0)
                         : 1.0;
    add("nontriviality", r, tol.nontriviality, r <= tol.nontriviality);
  }

  // b) dynamics: stored x' against f - sum xi grad psi recomputed from the problem
  {
    double sup = 0.0, fmax = 0.0;
    for (std::size_t j = 0; j < N; ++j) {
      const Vec f = p.dynamics.eval(tr.t[j], tr.x[j], tr.u[j]);
      fmax = std::max(fmax, f.cwiseAbs().maxCoeff());
      Vec r = tr.xdot[j] - f;
      for (int i = 0; i < I; ++i) {
        const double xi = tr.xi[j][static_cast<std::size_t>(i)];
        if (xi != 0.0) r += xi * p.set.jet(i, tr.t[j], tr.x[j], false).grad;
      }
      sup = std::max(sup, r.norm());
    }
    const double t = tol.dynamics * (1.0 + fmax);
    add("dynamics", sup, t, sup <= t);
  }

  // c) integration by parts against z(t) = t^k e_a, k <= 2
  {
    double worst = 0.0;
    for (int a = 0; a < p.n; ++a) {
      for (int k = 0; k <= 2; ++k) {
        const auto z = [&](double t) { return std::pow(t, k); };
        double lhs = 0.0;
        for (std::size_t j = 0; j + 1 < N; ++j) lhs += z(0.5 * (tr.t[j] + tr.t[j + 1])) * (arc.p[j + 1][a] - arc.p[j][a]);
        std::vector<double> rhs(N), mag(N);
        for (std::size_t j = 0; j < N; ++j) {
          const double t = tr.t[j];
          const Vec& pj = arc.p[j];
          double v = -(p.dynamics.jacobian(t, tr.x[j], tr.u[j]).transpose() * pj)[a];
          for (int i = 0; i < I; ++i) {
            const auto ii = static_cast<std::size_t>(i);
            const double xi = tr.xi[j][ii];
            if (xi == 0.0) continue;
            const ConstraintJet jt = p.set.jet(i, t, tr.x[j], true);
            v += xi * (jt.hess * pj)[a];
            v += jt.grad[a] * arc.density[j][ii];
          }
          rhs[j] = z(t) * v;
          mag[j] = std::abs(z(t)) * arc.pdot[j].norm();
        }
        const double defect = std::abs(lhs - trapezoid(tr.t, rhs));
        worst = std::max(worst, defect / (rep.normalization + trapezoid(tr.t, mag)));
      }
    }
    add("integration_by_parts", worst, tol.ibp, worst <= tol.ibp);
  }

  // d) complementarity
  {
    const MultiplierRecord rec = extract_multipliers(tr, arc);
    double worst = 0.0;
    for (double c : rec.complementarity) {
      rep.complementarity.push_back(c * scale);
      worst = std::max(worst, c * scale);
    }
    const double t = tol.complementarity > 0.0 ? tol.complementarity : 4.0 / tr.gamma;
    add("complementarity", worst, t, worst <= t);

    // e) measure nonnegativity
    const double m = rec.measure_min * scale * scale;
    add("measure_nonnegativity", m, tol.measure, m >= tol.measure);
  }

  // f) maximization
  {
    MaximizationOptions mo;
    mo.band_relaxation = tol.band_relaxation;
    const double r = maximization_residual(p, tr, arc, tol.control_grid, mo) * scale;
    add("maximization", r, tol.maximization, r <= tol.maximization);
  }

  // g) transversality
  {
    const double lam = arc.lambda * scale;
    const Vec x0 = tr.x.front(), xT = tr.x.back();
    const double d0 = cone_distance(initial_normal_cone(p.initial, x0), arc.p.front() * scale);
    const Vec v = -arc.p.back() * scale - lam * p.cost.gradient(xT);
    const double dT = cone_distance(terminal_normal_cone(p, xT, tol.active), v);
    const double r = std::max(d0, dT);
    add("transversality", r, tol.transversality, r <= tol.transversality);
  }

  rep.verdict = std::all_of(rep.conditions.begin(), rep.conditions.end(), [](const auto& c) { return c.pass; });
  return rep;
}

}  // namespace sweepmp
