#pragma once

#include <vector>

#include "sweepmp/ode.hpp"
#include "sweepmp/problem.hpp"
#include "sweepmp/sweep.hpp"

namespace sweepmp {

/// Terminal adjoint data (lambda, p(T)), normalized so lambda + |p(T)| = 1.
struct TerminalData {
  double lambda = 1.0;
  Vec pT;
};

struct AdjointArc {
  std::vector<double> t;
  std::vector<Vec> p;
  std::vector<Vec> pdot;
  /// <grad psi_tilde_i, p> per node and constraint.
  std::vector<std::vector<double>> grad_dot_p;
  /// |grad psi_tilde_i|^2 per node and constraint (0 where xi_i = 0).
  std::vector<std::vector<double>> grad_norm2;
  /// Measure densities d_i = gamma^2 e^{gamma(psi_tilde_i - sigma)} <grad psi_tilde_i, p>.
  std::vector<std::vector<double>> density;
  double lambda = 1.0;
  double gamma = 0.0;
  double sigma = 0.0;
  /// Nodes j where |p_{j+1} - p_j| exceeds ten times the median step change.
  std::vector<std::size_t> jumps;
  OdeStats stats;

  std::size_t size() const noexcept { return t.size(); }
};

struct AdjointOptions {
  double rtol = 1e-10;
  double atol = 1e-13;
  /// Reject terminal data with |lambda + |pT| - 1| above this.
  double normalization_tolerance = 1e-9;
  bool force_implicit = false;
};

/// The linear adjoint matrix A(t) with p' = A p:
/// A = -(df/dx)^T + sum_i xi_i (hess psi_tilde_i + gamma grad grad^T).
Mat adjoint_matrix(const Problem& problem, const PenaltyLevel& level, double t, const Vec& x, const Vec& u);

/// Backward integration of the adjoint system along a penalized trajectory.
/// The state between nodes is the cubic Hermite interpolant built from the
/// node values and the penalized right-hand side.
AdjointArc integrate_adjoint(const Problem& problem, const Trajectory& traj, const TerminalData& terminal,
                             const AdjointOptions& options = {});

/// Forward re-integration of the adjoint system from p(0); returns p at each node.
std::vector<Vec> integrate_adjoint_forward(const Problem& problem, const Trajectory& traj, const Vec& p0,
                                           const AdjointOptions& options = {});

struct MultiplierRecord {
  std::vector<std::vector<double>> xi;
  std::vector<std::vector<double>> density;
  /// Per constraint: trapezoid integral of xi_i |<grad psi_i, p>|.
  std::vector<double> complementarity;
  /// Per constraint: trapezoid integral of <grad psi_i, p> d_i.
  std::vector<double> measure_integral;
  /// Smallest node value of <grad psi_i, p> d_i over all i.
  double measure_min = 0.0;
};

MultiplierRecord extract_multipliers(const Trajectory& traj, const AdjointArc& arc);

struct DiagnosticsReport {
  double gamma = 0.0;
  double lambda = 0.0;
  double normalization = 0.0;  // lambda + |p(T)|
  double p_sup = 0.0;
  std::vector<double> xi_grad_p_L1;
  double weighted_L1 = 0.0;
  double adjoint_var_L1 = 0.0;
  double density_L1 = 0.0;
  std::size_t jump_count = 0;
};

DiagnosticsReport diagnostics(const Trajectory& traj, const AdjointArc& arc);

/// Trapezoid rule on a (possibly non-uniform) grid.
double trapezoid(const std::vector<double>& t, const std::vector<double>& values);

}  // namespace sweepmp
