#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sweepmp/expr.hpp"
#include "sweepmp/types.hpp"

namespace sweepmp {

/// Constraint-qualification constants: band half-width, gradient lower bound
/// and Gram diagonal-dominance factor.
struct A1Constants {
  double beta = 0.05;
  double eta = 1.0;
  double rho = 0.9;

  /// Throws InvalidParameters unless beta > 0, eta > 0 and 0 < rho < 1.
  void check() const;
};

/// The C^2 cap h: identity above -beta, constant -2*beta below -2*beta, and a
/// quintic blend in between matching value, slope and curvature at both ends.
class CapFunction {
 public:
  explicit CapFunction(double beta);

  double beta() const noexcept { return beta_; }
  double value(double z) const noexcept;
  double d1(double z) const noexcept;
  double d2(double z) const noexcept;

 private:
  double beta_;
};

/// Derivative jet of a capped constraint h(psi(t, x)).
struct ConstraintJet {
  double raw = 0.0;    // psi before capping
  double value = 0.0;  // h(psi)
  Vec grad;            // grad_x h(psi)
  Mat hess;            // hess_x h(psi); empty unless requested
  double dt = 0.0;     // d/dt h(psi)
};

/// The moving set C(t) = { x : psi_i(t, x) <= 0 } with constraints written in
/// the variables t, x1..xn. Immutable after construction.
class MovingSet {
 public:
  MovingSet(std::vector<Expr> constraints, int dim, A1Constants a1, double bounding_radius);

  int dim() const noexcept { return dim_; }
  int count() const noexcept { return static_cast<int>(constraints_.size()); }
  const A1Constants& a1() const noexcept { return a1_; }
  const CapFunction& cap() const noexcept { return cap_; }
  double bounding_radius() const noexcept { return radius_; }
  const Expr& constraint(int i) const { return constraints_.at(static_cast<std::size_t>(i)); }
  const std::vector<std::string>& variables() const noexcept { return vars_; }

  double raw_value(int i, double t, const Vec& x) const;
  double value(int i, double t, const Vec& x) const { return cap_.value(raw_value(i, t, x)); }

  /// Jet of the capped constraint via the chain rule. Below -2*beta the
  /// gradient, Hessian and time derivative are exactly zero.
  ConstraintJet jet(int i, double t, const Vec& x, bool with_hessian = true) const;

  /// Jet of the raw (uncapped) constraint.
  ConstraintJet raw_jet(int i, double t, const Vec& x, bool with_hessian = true) const;

  /// Indices whose capped value lies in (-2*beta, beta].
  std::vector<int> active_indices(double t, const Vec& x) const;

  /// max_i psi_i(t, x) (raw).
  double max_raw(double t, const Vec& x) const;
  bool contains(double t, const Vec& x, double tol = 0.0) const { return max_raw(t, x) <= tol; }

 private:
  struct Compiled {
    CompiledExpr value;
    std::vector<CompiledExpr> grad;
    std::vector<CompiledExpr> hess;  // packed upper triangle, row major
    CompiledExpr dt;
  };

  void fill_args(double t, const Vec& x, double* args) const;

  int dim_;
  A1Constants a1_;
  CapFunction cap_;
  double radius_;
  std::vector<Expr> constraints_;
  std::vector<std::string> vars_;
  std::vector<Compiled> compiled_;
};

/// Minimum-norm Gauss-Newton from x towards psi_idx(t, .) = target. Returns
/// nothing if the iteration stalls or leaves twice the bounding radius.
std::optional<Vec> steer_to_levels(const MovingSet& set, double t, Vec x, const std::vector<int>& idx,
                                   const std::vector<double>& target);

// A1 validation ----------------------------------------------------------

struct SamplingPlan {
  std::size_t count = 100000;
  std::uint64_t seed = 1;
  double horizon = 1.0;
  /// Fraction of samples steered onto constraint level sets inside the band.
  double targeted_fraction = 0.75;
  /// Slack allowed below zero in the pairwise inner-product check.
  double inner_tolerance = 1e-12;
};

struct A1Sample {
  double t = 0.0;
  Vec x;
  std::vector<int> indices;  // constraints involved (0-based)
  double value = 0.0;        // offending quantity
};

struct A1Report {
  std::size_t samples = 0;
  std::size_t band_samples = 0;  // (sample, i) pairs with capped psi in [-beta, beta]
  std::size_t pair_samples = 0;  // (sample, i, j) triples with i, j active
  std::uint64_t seed = 0;

  double min_band_gradient = 0.0;  // worst |grad psi_i| in the band (+inf if none)
  double min_pair_inner = 0.0;     // worst <grad psi_i, grad psi_j> (+inf if none)
  double max_dominance = 0.0;      // worst sum_j |<gi,gj>| / |gi|^2
  double max_flat_gradient = 0.0;  // largest capped gradient below -2*beta (must be 0)

  bool gradient_ok = true;
  bool inner_ok = true;
  bool dominance_ok = true;
  bool flat_ok = true;
  bool pass = true;

  std::optional<A1Sample> gradient_violation;
  std::optional<A1Sample> inner_violation;
  std::optional<A1Sample> dominance_violation;
  std::optional<A1Sample> flat_violation;

  /// 0.9 times the sampled minimum band gradient norm.
  double suggested_eta = 0.0;
};

/// Checks the constraint qualification by sampling [0, T] x (ball of the
/// bounding radius). The band gradient bound and the inner-product sign are
/// evaluated on the capped functions (identical to the raw ones wherever the
/// bound applies); diagonal dominance uses the raw gradients, because the
/// capped gradient vanishes at -2*beta and no rho < 1 can bound the ratio
/// there.
A1Report validate_a1(const MovingSet& set, const SamplingPlan& plan);

// Projection -------------------------------------------------------------

struct ProjectionOptions {
  int max_iterations = 100;
  double kkt_tolerance = 1e-10;
  double feasibility_tolerance = 1e-9;
};

struct ProjectionResult {
  Vec point;
  /// One multiplier per constraint: y - x = sum_i m_i grad psi_i(t, x).
  std::vector<double> multipliers;
  int iterations = 0;
  double kkt_residual = 0.0;
  bool used_fallback = false;
};

/// Euclidean projection of y onto C(t). Returns y itself when y is in C(t).
/// Throws ProjectionFailure when neither the active-set Newton iteration nor
/// the alternating-projection fallback reaches the tolerances.
ProjectionResult project(const MovingSet& set, double t, const Vec& y,
                         const ProjectionOptions& options = {});

}  // namespace sweepmp
