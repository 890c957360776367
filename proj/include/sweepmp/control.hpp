#pragma once

#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "sweepmp/adjoint.hpp"
#include "sweepmp/mp.hpp"
#include "sweepmp/problem.hpp"
#include "sweepmp/sweep.hpp"

namespace sweepmp {

/// Two intersecting unit spheres centred at (0, 0, -h) and (0, 0, h), drift
/// x' = sigma_drift y, y' = u, and the terminal face delta y - y2 x <= delta y2.
struct TwoSphereParams {
  double h = 0.5;
  double sigma_drift = 0.05;
  double delta = 0.1;
  double x0 = -0.6;
  double z0 = 0.2;
  double T = 2.75;
  double beta = 0.05;
  double rho = 0.9;

  double y1() const;  // sqrt(1 - x0^2 - (z0 + h)^2)
  double y2() const;  // sqrt(1 - h^2)
  /// Throws InvalidParameters naming the first failing inequality.
  void check() const;
};

/// Gradient bound used for the example: 0.9 * 2 sqrt(1 - beta), the smallest
/// sphere gradient inside the band times the usual safety factor.
double two_sphere_eta(const TwoSphereParams& params);

Problem build_two_sphere(const TwoSphereParams& params);

struct ContactTimes {
  double threshold = 0.0;
  std::optional<double> t1;  // first xi_1 > threshold
  std::optional<double> t2;  // first time both exceed it
  std::optional<double> t3;  // last time any exceeds it

  bool ordered(double horizon) const {
    return t1 && t2 && t3 && 0.0 < *t1 && *t1 < *t2 && *t2 < *t3 && *t3 < horizon;
  }
};

/// Contact detection from multiplier thresholds; `fraction` scales mu/eta^2.
ContactTimes detect_contact(const Trajectory& traj, double fraction = 0.05);

struct SwitchRun {
  double t_switch = 0.0;
  Trajectory traj;
  double objective = 0.0;  // phi(x(T))
  bool feasible = false;
  double terminal_violation = 0.0;
  ContactTimes contact;
};

struct SwitchOptions {
  IntegratorOptions integrator;
  double feasibility_tol = 1e-6;
  /// Endpoint inflation eps_k of the perturbed problem (0 by default).
  double terminal_inflation = 0.0;
  double contact_fraction = 0.05;
};

/// u = +1 on [0, t_switch], -1 afterwards (component 0 of a scalar control).
ControlSignal switching_control(double t_switch);

SwitchRun simulate_switching(const Problem& problem, const PenaltyLevel& level, double t_switch,
                             const SwitchOptions& options = {});

/// Run of an arbitrary control, with the same feasibility and contact logic.
SwitchRun simulate_control(const Problem& problem, const PenaltyLevel& level, const ControlSignal& control,
                           const SwitchOptions& options = {});

struct SwitchOptimum {
  double t_star = 0.0;
  double objective = 0.0;
  double grid_t_star = 0.0;
  double grid_objective = 0.0;
  bool agree = false;  // |t_star - grid_t_star| <= agreement
  double agreement = 1e-2;
  /// (t_switch, objective, feasible) of every evaluation: golden first, then the grid.
  std::vector<std::tuple<double, double, bool>> trace;
};

struct OptimizeOptions {
  SwitchOptions run;
  double width = 1e-3;
  int grid_points = 200;
  double agreement = 1e-2;
};

/// Golden section on t -> phi(x(T)) under the order (feasible first, then
/// smaller violation or smaller cost), cross-checked by a uniform grid scan.
/// Throws NoFeasibleSwitch when no grid point of the bracket is feasible.
SwitchOptimum optimize_switching(const Problem& problem, const PenaltyLevel& level, std::pair<double, double> bracket,
                                 const OptimizeOptions& options = {});

struct BangBangReport {
  double best_single = 0.0;
  double best_single_t = 0.0;
  double best_double = 0.0;
  std::pair<double, double> best_double_t{0.0, 0.0};
  double best_double_first = 0.0;  // first control value of the best two-switch control
  std::size_t feasible_single = 0;
  std::size_t feasible_double = 0;
  double slack = 1e-3;
  /// Single switching is not beaten by two switches by more than slack
  /// (objectives are costs, so "beaten" means a smaller cost).
  bool pass = false;
};

/// Compares single-switch controls on a `grid`-point grid of (0, T) with the
/// two-switch controls 1 -> -1 -> 1 and -1 -> 1 -> -1 on the grid x grid.
BangBangReport bang_bang_dominance(const Problem& problem, const PenaltyLevel& level, int grid = 30,
                                   const SwitchOptions& options = {});

/// phi(x(T)) + |x(0) - ref_x0|^2 + alpha int |u - u_ref| dt, the last term
/// integrated exactly over the merged breakpoints.
double penalized_objective(const Problem& problem, const Trajectory& traj, double alpha,
                           const ControlSignal& ref_control, const Vec& ref_x0);

struct ArcCheck {
  std::size_t intersection_nodes = 0;
  double intersection_formula = 0.0;  // max |xi_1 - (sigma x y + u y) / (4 (1 - h^2))|
  double intersection_gap = 0.0;      // max |xi_1 - xi_2|
  std::size_t single_nodes = 0;
  double single_formula = 0.0;  // max |xi_1 - (sigma x y + u y) / 2|
  double single_xi2 = 0.0;      // max xi_2
  double trim = 0.0;
};

/// Boundary-arc formulas on [t2 + trim, t3 - trim] and [t1 + trim, t2 - trim].
ArcCheck check_arc_formulas(const TwoSphereParams& params, const Trajectory& traj, const ContactTimes& contact,
                            double trim);

struct SignPattern {
  int sign_changes = 0;
  double q_T = 0.0;
  double p_T = 0.0;
  std::optional<double> change_time;
  bool pass = false;  // exactly one change, p(T) > 0, q(T) < 0
};

/// Sign structure of q (adjoint component 1), ignoring |q| < dead_band.
SignPattern q_sign_pattern(const AdjointArc& arc, double dead_band = 1e-3);

struct ExampleReport {
  SwitchOptimum optimum;
  BangBangReport bang_bang;
  SwitchRun run;  // full-resolution run at t_star
  ArcCheck arcs;
  TerminalFit fit;
  AdjointArc arc;
  SignPattern sign;
  MPReport mp;
  /// Structural checks in a fixed order: contact ordering, golden vs grid,
  /// bang-bang dominance, sign pattern of q, intersection and single-sphere arcs.
  std::vector<std::pair<std::string, bool>> checks;
  bool verdict = false;
};

/// The full two-sphere study at one penalty level. Scans use a 1e-2
/// reporting grid since they only need x(T).
ExampleReport run_example(const Problem& problem, const TwoSphereParams& params, const PenaltyLevel& level,
                          int grid_points = 200, int bang_bang_grid = 30);

}  // namespace sweepmp
