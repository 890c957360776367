#pragma once

#include <cstddef>
#include <functional>

#include "sweepmp/types.hpp"

namespace sweepmp {

/// x' = F(t, x).
using OdeRhs = std::function<void(double t, const Vec& x, Vec& dx)>;
/// dF/dx at (t, x); only needed by the linearly implicit fallback.
using OdeJacobian = std::function<void(double t, const Vec& x, Mat& J)>;

struct OdeOptions {
  double rtol = 1e-9;
  double atol = 1e-11;
  /// Step ceiling; the integrator never takes a step longer than this.
  double h_max = 1e-2;
  std::size_t max_steps = 50'000'000;
  /// Switch to the linearly implicit scheme when the explicit controller
  /// rejects more than half of its attempts (after a short warm-up), or
  /// when it is stuck on its stability boundary below a step of 1e-5.
  bool allow_implicit = true;
  bool force_implicit = false;
};

struct OdeStats {
  std::size_t steps = 0;
  std::size_t rejected = 0;
  std::size_t implicit_steps = 0;
  bool implicit_used = false;
};

/// Adaptive Dormand-Prince 5(4) stepper that integrates exactly from t0 to t1
/// (t1 may be smaller than t0). `h` carries the step size between calls.
/// Throws StepUnderflow when the step collapses.
class Stepper {
 public:
  Stepper(OdeRhs rhs, OdeJacobian jac, OdeOptions options);

  void advance(double t0, double t1, Vec& x);
  const OdeStats& stats() const noexcept { return stats_; }
  void set_h_max(double h_max) noexcept { opt_.h_max = h_max; }
  bool implicit_mode() const noexcept { return implicit_; }

 private:
  bool dopri_step(double t, double h, const Vec& x, Vec& out, double& err);
  void implicit_advance(double t0, double t1, Vec& x);
  Vec implicit_euler(double t, double h, const Vec& x);

  OdeRhs rhs_;
  OdeJacobian jac_;
  OdeOptions opt_;
  OdeStats stats_;
  double h_ = 0.0;
  bool implicit_ = false;
  std::size_t window_attempts_ = 0;
  std::size_t window_rejects_ = 0;
  double h_lambda_ = 0.0;
  int stiff_run_ = 0;
  int calm_run_ = 0;
};

}  // namespace sweepmp
