#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sweepmp/moving_set.hpp"
#include "sweepmp/ode.hpp"
#include "sweepmp/problem.hpp"

namespace sweepmp {

/// mu(gamma) = log(mu / (eta^2 gamma)) / gamma.
double mu_of_gamma(double mu, double eta, double gamma);

/// One level of the penalty schedule.
struct PenaltyLevel {
  double gamma = 0.0;
  double sigma = 0.0;
  double mu = 1.0;   // the constant mu
  double eta = 1.0;  // gradient bound from A1

  double mu_k() const { return mu_of_gamma(mu, eta, gamma); }
  /// Upper bound on every multiplier: gamma e^{gamma mu_k} = mu / eta^2.
  double xi_cap() const { return mu / (eta * eta); }
};

struct MuEstimate {
  double mu = 1.0;
  std::size_t samples = 0;
  // The maximizing sample.
  double t = 0.0;
  Vec x;
  Vec u;
  int constraint = -1;
};

/// Sampled max over (t, u, x) and i of |grad psi_i| |f| + |d_t psi_i|, plus 1,
/// on the capped constraints. Points x are drawn from the ball of the bounding
/// radius restricted to { max_i psi_i <= beta }, with half of them steered
/// onto random levels inside the band.
MuEstimate estimate_mu(const Problem& problem, std::size_t samples, std::uint64_t seed = 1);

struct InclusionCheck {
  bool holds = true;
  std::size_t samples = 0;
  int worst_k = -1;
  /// max over k and samples of (psi - sigma_k) - mu_k; must be < 0.
  double worst_margin = -1e300;
  double t = 0.0;
  Vec x;
};

struct PenaltySchedule {
  double mu = 1.0;
  double eta = 1.0;
  std::vector<double> gammas;
  std::vector<double> sigmas;
  std::vector<double> mus;  // mu_k
  InclusionCheck inclusion;
  /// Levels whose mu_k <= -beta (band analysis not applicable).
  std::vector<int> below_band;

  std::size_t size() const noexcept { return gammas.size(); }
  PenaltyLevel level(std::size_t k) const { return {gammas.at(k), sigmas.at(k), mu, eta}; }

  /// Explicit gamma/sigma lists. The inclusion C(t) in int C^k(t) is sampled
  /// and reported but not enforced.
  static PenaltySchedule from_lists(const MovingSet& set, double mu, double eta, std::vector<double> gammas,
                                    std::vector<double> sigmas, const SamplingPlan& plan);
};

/// Schedule with sigma_k = c_margin / gamma_k. Throws ScheduleInfeasible if the
/// sampled inclusion C(t) in int C^k(t) fails or some mu_k <= -beta.
PenaltySchedule build_schedule(const MovingSet& set, double mu, double eta, std::vector<double> gammas,
                               double c_margin, const SamplingPlan& plan);

/// Samples the inclusion margin for given levels.
InclusionCheck check_inclusion(const MovingSet& set, double mu, double eta, const std::vector<double>& gammas,
                               const std::vector<double>& sigmas, const SamplingPlan& plan);

struct Trajectory {
  std::vector<double> t;
  std::vector<Vec> x;
  std::vector<Vec> u;     // value on [t_j, t_{j+1}) (last node repeats)
  std::vector<Vec> xdot;  // right-hand side at the node with u_j
  std::vector<std::vector<double>> xi;  // per node, per constraint

  double gamma = 0.0;  // 0 for catching-up trajectories
  double sigma = 0.0;
  double mu_k = 0.0;
  double xi_cap = 0.0;

  double max_invariance_excess = -1e300;  // max (psi_tilde - sigma) - mu_k
  double max_xi = 0.0;
  double cross_term = 0.0;  // max over nodes of sum over inactive i of e^{gamma(psi_tilde - sigma)}
  OdeStats stats;

  std::size_t size() const noexcept { return t.size(); }
  /// Linear interpolation of the state.
  Vec state_at(double time) const;
};

struct IntegratorOptions {
  double rtol = 1e-9;
  double atol = 1e-11;
  /// Reporting grid spacing; 0 selects min(1e-3, 0.1 / gamma).
  double report_dt = 0.0;
  /// Throw on invariance or multiplier-cap violations.
  bool enforce = true;
  bool force_implicit = false;
};

/// Reporting grid 0 = t_0 < ... < t_N = T with spacing dt, merged with the
/// control breakpoints.
std::vector<double> make_grid(double horizon, double dt, const std::vector<double>& breaks);

/// Penalized dynamics x' = f - sum_i xi_i grad psi_tilde_i with
/// xi_i = gamma e^{gamma (psi_tilde_i - sigma)}. Multipliers are reported as
/// zero where psi_i <= -2 beta, since their gradient factor vanishes there.
Trajectory integrate_penalized(const Problem& problem, const ControlSignal& control, const PenaltyLevel& level,
                               const IntegratorOptions& options = {}, const std::optional<Vec>& x0 = {});

/// f(t, x, u) - sum_i xi_i grad psi_tilde_i.
Vec penalized_rhs(const Problem& problem, const PenaltyLevel& level, double t, const Vec& x, const Vec& u);

/// Multipliers xi_i at (t, x), zero where psi_i <= -2 beta.
std::vector<double> penalty_multipliers(const Problem& problem, const PenaltyLevel& level, double t, const Vec& x);

/// Moreau catching-up: x_{j+1} = proj_{C(t_{j+1})}(x_j + dt f(t_j, x_j, u_j)).
/// Multipliers are the projection multipliers divided by the step.
Trajectory catching_up(const Problem& problem, const ControlSignal& control, double dt,
                       const std::optional<Vec>& x0 = {});

/// sup_j |a(s_j) - b(s_j)| over the nodes s_j of the coarser trajectory.
double sup_distance(const Trajectory& a, const Trajectory& b);

struct ConvergenceReport {
  std::vector<double> gammas;
  std::vector<double> sigmas;
  std::vector<double> sup_errors;
  std::vector<double> max_xi;
  std::vector<double> max_invariance_excess;
  std::vector<double> cross_terms;
  double dt_oracle = 0.0;
  double tolerance = 0.0;
  double slack = 0.1;
  bool non_increasing = false;
  bool final_within_tolerance = false;
  bool verdict = false;
  bool inclusion_holds = true;
  std::vector<std::string> warnings;
};

/// Penalized runs for each schedule level against one catching-up oracle.
ConvergenceReport convergence_sweep(const Problem& problem, const ControlSignal& control,
                                    const PenaltySchedule& schedule, double dt_oracle, double tolerance,
                                    const IntegratorOptions& options = {});

/// e_{k+1} <= (1 + slack) e_k for all k.
bool non_increasing(const std::vector<double>& values, double slack);

}  // namespace sweepmp
