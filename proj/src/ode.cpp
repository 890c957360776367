#include "sweepmp/ode.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "sweepmp/errors.hpp"

namespace sweepmp {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

double error_norm(const Vec& err, const Vec& x0, const Vec& x1, double atol, double rtol) {
  double s = 0.0;
  for (int k = 0; k < err.size(); ++k) {
    const double sc = atol + rtol * std::max(std::abs(x0[k]), std::abs(x1[k]));
    s += (err[k] / sc) * (err[k] / sc);
  }
  return std::sqrt(s / static_cast<double>(err.size()));
}

}  // namespace

Stepper::Stepper(OdeRhs rhs, OdeJacobian jac, OdeOptions options)
    : rhs_(std::move(rhs)), jac_(std::move(jac)), opt_(options), implicit_(options.force_implicit) {
  if (implicit_ && !jac_) throw InvalidParameters("implicit integration needs a Jacobian");
  if (implicit_) stats_.implicit_used = true;
}

bool Stepper::dopri_step(double t, double h, const Vec& x, Vec& out, double& err) {
  const int n = static_cast<int>(x.size());
  Vec k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n);
  rhs_(t, x, k1);
  rhs_(t + c2 * h, x + h * a21 * k1, k2);
  rhs_(t + c3 * h, x + h * (a31 * k1 + a32 * k2), k3);
  rhs_(t + c4 * h, x + h * (a41 * k1 + a42 * k2 + a43 * k3), k4);
  rhs_(t + c5 * h, x + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4), k5);
  const Vec y6 = x + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
  rhs_(t + h, y6, k6);
  out = x + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
  rhs_(t + h, out, k7);
  // Estimate of |h lambda| from the last two stages (Hairer-Wanner).
  const double den = (out - y6).squaredNorm();
  h_lambda_ = den > 0.0 ? std::abs(h) * std::sqrt((k7 - k6).squaredNorm() / den) : 0.0;
  const Vec e = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
  if (!out.allFinite() || !e.allFinite()) {
    err = std::numeric_limits<double>::infinity();
    return false;
  }
  err = error_norm(e, x, out, opt_.atol, opt_.rtol);
  return err <= 1.0;
}

void Stepper::advance(double t0, double t1, Vec& x) {
  if (implicit_) return implicit_advance(t0, t1, x);
  const double span = std::abs(t1 - t0);
  if (span == 0.0) return;
  const double dir = t1 > t0 ? 1.0 : -1.0;
  if (h_ <= 0.0) h_ = std::min(opt_.h_max, span);
  double t = t0;
  Vec next;
  while (dir * (t1 - t) > 0.0) {
    if (++stats_.steps > opt_.max_steps) throw StepUnderflow("step budget exhausted");
    const double remaining = std::abs(t1 - t);
    double h = std::min({h_, opt_.h_max, remaining});
    // Avoid a sliver of a last step.
    if (remaining - h < 1e-3 * h) h = remaining;
    double err = 0.0;
    const bool ok = dopri_step(t, dir * h, x, next, err);
    ++window_attempts_;
    if (ok) {
      t = (h == remaining) ? t1 : t + dir * h;
      x = next;
      // Fifteen boundary steps at a tiny step size, not interrupted by six
      // ordinary ones: the explicit scheme is stiffness-bound.
      if (h_lambda_ > 3.25 && h < 1e-5) {
        ++stiff_run_;
        calm_run_ = 0;
      } else if (++calm_run_ >= 6) {
        stiff_run_ = 0;
      }
      if (opt_.allow_implicit && jac_ && stiff_run_ >= 15 && t != t1) {
        implicit_ = true;
        stats_.implicit_used = true;
        return implicit_advance(t, t1, x);
      }
      const double fac = err > 0.0 ? 0.9 * std::pow(err, -0.2) : 5.0;
      h_ = std::min(opt_.h_max, h * std::clamp(fac, 0.2, 5.0));
    } else {
      ++stats_.rejected;
      ++window_rejects_;
      const double fac = std::isfinite(err) ? 0.9 * std::pow(err, -0.2) : 0.1;
      h_ = h * std::clamp(fac, 0.1, 0.9);
      if (h_ < 1e-14 * std::max(1.0, std::abs(t)))
        throw StepUnderflow("step size underflow at t = " + std::to_string(t));
    }
    if (window_attempts_ >= 40) {
      if (opt_.allow_implicit && jac_ && 2 * window_rejects_ > window_attempts_) {
        implicit_ = true;
        stats_.implicit_used = true;
        return implicit_advance(t, t1, x);
      }
      window_attempts_ = window_rejects_ = 0;
    }
  }
}

// Linearly implicit Euler, one Newton iteration per step.
Vec Stepper::implicit_euler(double t, double h, const Vec& x) {
  const int n = static_cast<int>(x.size());
  Vec f(n);
  Mat J(n, n);
  rhs_(t + h, x, f);
  jac_(t + h, x, J);
  const Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n) - h * Eigen::MatrixXd(J);
  const Eigen::VectorXd d = A.partialPivLu().solve(Eigen::VectorXd(h * f));
  return x + Vec(d);
}

// Step doubling gives an error estimate and a Richardson-extrapolated,
// second-order result.
void Stepper::implicit_advance(double t0, double t1, Vec& x) {
  const double span = std::abs(t1 - t0);
  if (span == 0.0) return;
  const double dir = t1 > t0 ? 1.0 : -1.0;
  if (h_ <= 0.0) h_ = std::min(opt_.h_max, span);
  double t = t0;
  while (dir * (t1 - t) > 0.0) {
    if (++stats_.steps > opt_.max_steps) throw StepUnderflow("step budget exhausted");
    const double remaining = std::abs(t1 - t);
    double h = std::min({h_, opt_.h_max, remaining});
    if (remaining - h < 1e-3 * h) h = remaining;
    const double sh = dir * h;
    const Vec full = implicit_euler(t, sh, x);
    const Vec half = implicit_euler(t + 0.5 * sh, 0.5 * sh, implicit_euler(t, 0.5 * sh, x));
    const Vec out = 2.0 * half - full;
    double err = (out.allFinite() && full.allFinite())
                     ? error_norm(half - full, x, out, opt_.atol, opt_.rtol)
                     : std::numeric_limits<double>::infinity();
    if (err <= 1.0) {
      ++stats_.implicit_steps;
      t = (h == remaining) ? t1 : t + sh;
      x = out;
      const double fac = err > 0.0 ? 0.9 / std::sqrt(err) : 4.0;
      h_ = std::min(opt_.h_max, h * std::clamp(fac, 0.2, 4.0));
    } else {
      ++stats_.rejected;
      const double fac = std::isfinite(err) ? 0.9 / std::sqrt(err) : 0.1;
      h_ = h * std::clamp(fac, 0.1, 0.9);
      if (h_ < 1e-14 * std::max(1.0, std::abs(t)))
        throw StepUnderflow("implicit step size underflow at t = " + std::to_string(t));
    }
  }
}

}  // namespace sweepmp
