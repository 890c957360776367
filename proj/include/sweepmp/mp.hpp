#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "sweepmp/adjoint.hpp"
#include "sweepmp/problem.hpp"
#include "sweepmp/sweep.hpp"

namespace sweepmp {

struct ToleranceSet {
  double nontriviality = 1e-9;
  /// Dynamics residual tolerance is dynamics * (1 + max |f|).
  double dynamics = 1e-6;
  /// Integration-by-parts defect relative to N + int |z||p'| dt.
  double ibp = 5e-3;
  /// Complementarity tolerance; 0 selects 4 / gamma (1e-2 at gamma = 400).
  double complementarity = 0.0;
  double measure = -1e-12;
  double maximization = 1e-6;
  double transversality = 1e-6;
  /// Box controls are checked on this many points per axis.
  int control_grid = 21;
  /// Maximization gaps at nodes inside the band |psi_i| < beta are divided by
  /// this factor before comparison.
  double band_relaxation = 1e3;
  /// Terminal inequalities with g_j >= -active are treated as active.
  double active = 1e-3;
};

struct ConditionResult {
  std::string name;
  double residual = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct MPReport {
  bool corollary = false;  // free endpoint, lambda fixed to 1
  double lambda = 1.0;
  Vec pT;
  std::vector<double> nu;  // terminal normal-cone weights (normalized)
  double normalization = 1.0;  // N = lambda + |p(T)| before normalization
  double gamma = 0.0;
  std::vector<double> complementarity;  // per constraint, normalized
  std::vector<ConditionResult> conditions;
  bool verdict = false;

  const ConditionResult& condition(std::string_view name) const;
};

/// A closed convex cone: the whole space, or the conical hull of generators.
struct NormalCone {
  bool whole_space = false;
  std::vector<Vec> generators;
};

NormalCone initial_normal_cone(const InitialSet& set, const Vec& x0, double tol = 1e-9);
/// Active outward normals of the terminal set at xT (and of C(T) when the
/// terminal set is intersected with it). Without a terminal set the cone is {0}.
NormalCone terminal_normal_cone(const Problem& problem, const Vec& xT, double active_tol);
/// Euclidean distance from v to the cone (exact non-negative least squares).
double cone_distance(const NormalCone& cone, const Vec& v);

struct MaximizationOptions {
  /// Per-k form: subtract alpha * lambda |u - u_ref| and eps * lambda |u - u_k|.
  double alpha = 0.0;
  double eps = 0.0;
  const ControlSignal* reference = nullptr;  // u_ref; defaults to the trajectory's control
  const ControlSignal* previous = nullptr;   // u_k
  double band_relaxation = 1.0;
  /// Skip nodes within one grid step of a control discontinuity.
  bool skip_switches = true;
};

/// sup over nodes of max_u H(u) - H(u_hat) with H(u) = <p, f(t, x, u)> (minus
/// the optional per-k penalty terms). Not normalized.
double maximization_residual(const Problem& problem, const Trajectory& traj, const AdjointArc& arc,
                             int ugrid_resolution, const MaximizationOptions& options = {});

struct TerminalFit {
  bool corollary = false;
  TerminalData terminal;   // normalized unless corollary
  std::vector<double> nu;  // weights of the active terminal normals
  std::vector<Vec> normals;
  double residual = 0.0;   // normalized maximization residual of the fit
};

/// Terminal adjoint data for the certificate. Free endpoint: lambda = 1 and
/// p(T) = -grad phi. Otherwise p(T) = -lambda grad phi - sum_j nu_j n_j, with
/// lambda from {0, .25, .5, .75, 1} and nu fitted to minimize the normalized
/// maximization residual (the adjoint is linear in the terminal data).
TerminalFit fit_terminal_multipliers(const Problem& problem, const Trajectory& traj, const ToleranceSet& tol = {});

/// Adjoint arc for a fitted terminal condition (unnormalized in the corollary case).
AdjointArc certificate_adjoint(const Problem& problem, const Trajectory& traj, const TerminalFit& fit);

/// Residuals of the Maximum Principle conditions a) to g). All residuals are
/// divided by N = lambda + |p(T)|, so verdicts are invariant under scaling of
/// the multipliers.
MPReport certify(const Problem& problem, const Trajectory& traj, const AdjointArc& arc,
                 const ToleranceSet& tol = {});

}  // namespace sweepmp
