#include "sweepmp/moving_set.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "sweepmp/errors.hpp"
#include "sweepmp/rng.hpp"

namespace sweepmp {

void A1Constants::check() const {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw InvalidParameters("beta must be positive");
  if (!(eta > 0.0) || !std::isfinite(eta)) throw InvalidParameters("eta must be positive");
  if (!(rho > 0.0 && rho < 1.0)) throw InvalidParameters("rho must lie in (0, 1)");
}

// Cap ------------------------------------------------------------------

CapFunction::CapFunction(double beta) : beta_(beta) {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw InvalidParameters("cap beta must be positive");
}

// On [-2b, -b] with s = (z + 2b) / b: h = -2b + b q(s), q = 6s^3 - 8s^4 + 3s^5.
double CapFunction::value(double z) const noexcept {
  if (z >= -beta_) return z;
  if (z <= -2.0 * beta_) return -2.0 * beta_;
  const double s = (z + 2.0 * beta_) / beta_;
  const double q = s * s * s * (6.0 + s * (-8.0 + 3.0 * s));
  return -2.0 * beta_ + beta_ * q;
}

double CapFunction::d1(double z) const noexcept {
  if (z >= -beta_) return 1.0;
  if (z <= -2.0 * beta_) return 0.0;
  const double s = (z + 2.0 * beta_) / beta_;
  return s * s * (18.0 + s * (-32.0 + 15.0 * s));
}

double CapFunction::d2(double z) const noexcept {
  if (z >= -beta_ || z <= -2.0 * beta_) return 0.0;
  const double s = (z + 2.0 * beta_) / beta_;
  return s * (36.0 + s * (-96.0 + 60.0 * s)) / beta_;
}

// Moving set -----------------------------------------------------------

MovingSet::MovingSet(std::vector<Expr> constraints, int dim, A1Constants a1, double bounding_radius)
    : dim_(dim), a1_(a1), cap_(a1.beta), radius_(bounding_radius), constraints_(std::move(constraints)) {
  a1_.check();
  if (dim_ < 1 || dim_ > kMaxDim)
    throw DimensionMismatch("state dimension must lie in [1, " + std::to_string(kMaxDim) + "]");
  if (constraints_.empty()) throw InvalidParameters("moving set needs at least one constraint");
  if (!(radius_ > 0.0)) throw InvalidParameters("bounding radius must be positive");

  vars_.push_back("t");
  for (int k = 1; k <= dim_; ++k) vars_.push_back("x" + std::to_string(k));

  for (const Expr& e : constraints_) {
    for (const std::string& v : e.free_variables()) {
      if (std::find(vars_.begin(), vars_.end(), v) == vars_.end())
        throw UnknownVariable(v, 0);
    }
    Compiled c;
    c.value = CompiledExpr(e, vars_);
    c.dt = CompiledExpr(e.diff("t"), vars_);
    for (int a = 0; a < dim_; ++a) {
      const Expr ga = e.diff(vars_[static_cast<std::size_t>(a + 1)]);
      c.grad.emplace_back(ga, vars_);
      for (int b = a; b < dim_; ++b) c.hess.emplace_back(ga.diff(vars_[static_cast<std::size_t>(b + 1)]), vars_);
    }
    compiled_.push_back(std::move(c));
  }
}

void MovingSet::fill_args(double t, const Vec& x, double* args) const {
  if (x.size() != dim_) throw DimensionMismatch("state has wrong dimension");
  args[0] = t;
  for (int k = 0; k < dim_; ++k) args[k + 1] = x[k];
}

double MovingSet::raw_value(int i, double t, const Vec& x) const {
  double args[kMaxDim + 1];
  fill_args(t, x, args);
  return compiled_.at(static_cast<std::size_t>(i)).value({args, static_cast<std::size_t>(dim_ + 1)});
}

double MovingSet::max_raw(double t, const Vec& x) const {
  double m = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < count(); ++i) m = std::max(m, raw_value(i, t, x));
  return m;
}

ConstraintJet MovingSet::raw_jet(int i, double t, const Vec& x, bool with_hessian) const {
  double args[kMaxDim + 1];
  fill_args(t, x, args);
  const std::span<const double> a{args, static_cast<std::size_t>(dim_ + 1)};
  const Compiled& c = compiled_.at(static_cast<std::size_t>(i));
  ConstraintJet j;
  j.raw = c.value(a);
  j.value = j.raw;
  j.dt = c.dt(a);
  j.grad.resize(dim_);
  for (int k = 0; k < dim_; ++k) j.grad[k] = c.grad[static_cast<std::size_t>(k)](a);
  if (with_hessian) {
    j.hess.resize(dim_, dim_);
    std::size_t idx = 0;
    for (int p = 0; p < dim_; ++p)
      for (int q = p; q < dim_; ++q) {
        const double h = c.hess[idx++](a);
        j.hess(p, q) = h;
        j.hess(q, p) = h;
      }
  }
  return j;
}

ConstraintJet MovingSet::jet(int i, double t, const Vec& x, bool with_hessian) const {
  const double raw = raw_value(i, t, x);
  if (raw <= -2.0 * a1_.beta) {
    ConstraintJet j;
    j.raw = raw;
    j.value = -2.0 * a1_.beta;
    j.grad = Vec::Zero(dim_);
    if (with_hessian) j.hess = Mat::Zero(dim_, dim_);
    return j;
  }
  ConstraintJet j = raw_jet(i, t, x, with_hessian);
  if (raw >= -a1_.beta) return j;
  const double h1 = cap_.d1(raw);
  const double h2 = cap_.d2(raw);
  j.value = cap_.value(raw);
  if (with_hessian) j.hess = h2 * j.grad * j.grad.transpose() + h1 * j.hess;
  j.grad *= h1;
  j.dt *= h1;
  return j;
}

std::vector<int> MovingSet::active_indices(double t, const Vec& x) const {
  std::vector<int> out;
  for (int i = 0; i < count(); ++i) {
    const double v = raw_value(i, t, x);
    if (v > -2.0 * a1_.beta && v <= a1_.beta) out.push_back(i);
  }
  return out;
}

// A1 validation --------------------------------------------------------

std::optional<Vec> steer_to_levels(const MovingSet& set, double t, Vec x, const std::vector<int>& idx,
                         const std::vector<double>& target) {
  const int n = set.dim();
  const int k = static_cast<int>(idx.size());
  for (int it = 0; it < 40; ++it) {
    Eigen::MatrixXd G(k, n);
    Eigen::VectorXd r(k);
    for (int a = 0; a < k; ++a) {
      const ConstraintJet j = set.raw_jet(idx[static_cast<std::size_t>(a)], t, x, false);
      G.row(a) = j.grad.transpose();
      r[a] = j.raw - target[static_cast<std::size_t>(a)];
    }
    if (r.cwiseAbs().maxCoeff() < 1e-12) return x;
    const Eigen::MatrixXd GG = G * G.transpose();
    Eigen::FullPivLU<Eigen::MatrixXd> lu(GG);
    if (lu.rank() < k) return std::nullopt;
    const Eigen::VectorXd step = G.transpose() * lu.solve(r);
    if (!step.allFinite()) return std::nullopt;
    x -= Vec(step);
    if (x.norm() > 2.0 * set.bounding_radius()) return std::nullopt;
  }
  return std::nullopt;
}

namespace {

void record(std::optional<A1Sample>& slot, double t, const Vec& x, std::vector<int> idx, double v) {
  if (slot) return;
  slot = A1Sample{t, x, std::move(idx), v};
}

}  // namespace

A1Report validate_a1(const MovingSet& set, const SamplingPlan& plan) {
  const int n = set.dim();
  const int m = set.count();
  const A1Constants& a1 = set.a1();
  const double beta = a1.beta;
  const double r = set.bounding_radius();
  const double inf = std::numeric_limits<double>::infinity();

  A1Report rep;
  rep.seed = plan.seed;
  rep.min_band_gradient = inf;
  rep.min_pair_inner = inf;

  Rng rng(plan.seed);
  std::vector<Vec> raw_grad(static_cast<std::size_t>(m));
  std::vector<double> raw(static_cast<std::size_t>(m));

  for (std::size_t s = 0; s < plan.count; ++s) {
    const double t = plan.horizon * rng.uniform();
    Vec x = uniform_in_ball(rng, n, r);

    if (rng.uniform() < plan.targeted_fraction) {
      std::vector<int> idx{static_cast<int>(rng.below(static_cast<std::uint64_t>(m)))};
      if (m >= 2 && rng.uniform() < 0.5) {
        int other = static_cast<int>(rng.below(static_cast<std::uint64_t>(m - 1)));
        if (other >= idx[0]) ++other;
        idx.push_back(other);
      }
      std::vector<double> target;
      for (std::size_t a = 0; a < idx.size(); ++a) target.push_back(-2.0 * beta + 3.0 * beta * (1.0 - rng.uniform()));
      if (auto y = steer_to_levels(set, t, x, idx, target); y && y->norm() <= r) x = *y;
    }
    ++rep.samples;

    std::vector<int> active;
    for (int i = 0; i < m; ++i) {
      ConstraintJet j = set.raw_jet(i, t, x, false);
      raw[static_cast<std::size_t>(i)] = j.raw;
      raw_grad[static_cast<std::size_t>(i)] = j.grad;
      const double gn = j.grad.norm();

      if (j.raw >= -beta && j.raw <= beta) {
        ++rep.band_samples;
        rep.min_band_gradient = std::min(rep.min_band_gradient, gn);
        if (!(gn > a1.eta)) {
          rep.gradient_ok = false;
          record(rep.gradient_violation, t, x, {i}, gn);
        }
      }
      if (j.raw <= -2.0 * beta) {
        const double flat = set.jet(i, t, x, false).grad.norm();
        rep.max_flat_gradient = std::max(rep.max_flat_gradient, flat);
        if (flat != 0.0) {
          rep.flat_ok = false;
          record(rep.flat_violation, t, x, {i}, flat);
        }
      }
      if (j.raw > -2.0 * beta && j.raw <= beta) active.push_back(i);
    }

    for (std::size_t a = 0; a < active.size(); ++a) {
      const Vec& gi = raw_grad[static_cast<std::size_t>(active[a])];
      for (std::size_t b = a + 1; b < active.size(); ++b) {
        ++rep.pair_samples;
        const double ip = gi.dot(raw_grad[static_cast<std::size_t>(active[b])]);
        rep.min_pair_inner = std::min(rep.min_pair_inner, ip);
        if (ip < -plan.inner_tolerance) {
          rep.inner_ok = false;
          record(rep.inner_violation, t, x, {active[a], active[b]}, ip);
        }
      }
      if (active.size() < 2) continue;
      double off = 0.0;
      for (std::size_t b = 0; b < active.size(); ++b)
        if (b != a) off += std::abs(gi.dot(raw_grad[static_cast<std::size_t>(active[b])]));
      const double diag = gi.squaredNorm();
      const double ratio = diag > 0.0 ? off / diag : (off > 0.0 ? inf : 0.0);
      rep.max_dominance = std::max(rep.max_dominance, ratio);
      if (ratio > a1.rho) {
        rep.dominance_ok = false;
        record(rep.dominance_violation, t, x, active, ratio);
      }
    }
  }

  rep.pass = rep.gradient_ok && rep.inner_ok && rep.dominance_ok && rep.flat_ok;
  rep.suggested_eta = std::isfinite(rep.min_band_gradient) ? 0.9 * rep.min_band_gradient : 0.0;
  return rep;
}

// Projection -----------------------------------------------------------

namespace {

struct KktState {
  Vec x;
  std::vector<double> lambda;  // aligned with the working set
  int iterations = 0;
};

double kkt_merit(const MovingSet& set, double t, const Vec& y, const Vec& x, const std::vector<int>& work,
                 const Eigen::VectorXd& lam) {
  Vec r = x - y;
  double feas = 0.0;
  for (std::size_t a = 0; a < work.size(); ++a) {
    const ConstraintJet j = set.raw_jet(work[a], t, x, false);
    r += lam[static_cast<Eigen::Index>(a)] * j.grad;
    feas += j.raw * j.raw;
  }
  return std::sqrt(r.squaredNorm() + feas);
}

// Newton's method on x - y + sum lambda_i grad psi_i = 0, psi_W = 0.
std::optional<KktState> newton_kkt(const MovingSet& set, double t, const Vec& y, const Vec& x0,
                                   const std::vector<int>& work, std::vector<double> lam0,
                                   const ProjectionOptions& opt) {
  const int n = set.dim();
  const int w = static_cast<int>(work.size());
  Vec x = x0;
  Eigen::VectorXd lam(w);
  for (int a = 0; a < w; ++a) lam[a] = lam0[static_cast<std::size_t>(a)];

  for (int it = 0; it < opt.max_iterations; ++it) {
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n + w, n + w);
    Eigen::VectorXd F(n + w);
    J.topLeftCorner(n, n).setIdentity();
    Vec r = x - y;
    double feas = 0.0;
    for (int a = 0; a < w; ++a) {
      const ConstraintJet j = set.raw_jet(work[static_cast<std::size_t>(a)], t, x, true);
      r += lam[a] * j.grad;
      J.topLeftCorner(n, n) += lam[a] * Eigen::MatrixXd(j.hess);
      J.block(0, n + a, n, 1) = Eigen::VectorXd(j.grad);
      J.block(n + a, 0, 1, n) = Eigen::VectorXd(j.grad).transpose();
      F[n + a] = j.raw;
      feas = std::max(feas, std::abs(j.raw));
    }
    F.head(n) = Eigen::VectorXd(r);
    if (r.cwiseAbs().maxCoeff() <= opt.kkt_tolerance && feas <= 0.1 * opt.feasibility_tolerance) {
      KktState s{x, std::vector<double>(lam.data(), lam.data() + w), it};
      return s;
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(J);
    if (lu.rank() < n + w) return std::nullopt;
    const Eigen::VectorXd d = lu.solve(-F);
    if (!d.allFinite()) return std::nullopt;

    const double m0 = F.norm();
    double alpha = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      const Vec xn = x + Vec(alpha * d.head(n));
      const Eigen::VectorXd ln = lam + alpha * d.tail(w);
      double mn;
      try {
        mn = kkt_merit(set, t, y, xn, work, ln);
      } catch (const DomainError&) {
        mn = std::numeric_limits<double>::infinity();
      }
      if (mn <= (1.0 - 1e-4 * alpha) * m0 || (alpha == 1.0 && m0 < 1e-8 && mn < 10.0 * m0)) {
        x = xn;
        lam = ln;
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) return std::nullopt;
  }
  return std::nullopt;
}

// Least-squares multipliers for y - x = G^T lambda over the working set.
std::vector<double> ls_multipliers(const MovingSet& set, double t, const Vec& y, const Vec& x,
                                   const std::vector<int>& work) {
  if (work.empty()) return {};
  Eigen::MatrixXd G(set.dim(), static_cast<Eigen::Index>(work.size()));
  for (std::size_t a = 0; a < work.size(); ++a)
    G.col(static_cast<Eigen::Index>(a)) = Eigen::VectorXd(set.raw_jet(work[a], t, x, false).grad);
  const Eigen::VectorXd l = G.completeOrthogonalDecomposition().solve(Eigen::VectorXd(y - x));
  return {l.data(), l.data() + l.size()};
}

std::optional<KktState> active_set_newton(const MovingSet& set, double t, const Vec& y,
                                          const ProjectionOptions& opt, std::vector<int>& work) {
  const int m = set.count();
  Vec x = y;
  std::vector<double> lam(work.size(), 0.0);
  int total = 0;
  for (int outer = 0; outer < 4 * m + 10; ++outer) {
    auto res = newton_kkt(set, t, y, x, work, lam, opt);
    if (!res) return std::nullopt;
    total += res->iterations;
    x = res->x;
    lam = res->lambda;

    auto neg = std::min_element(lam.begin(), lam.end());
    if (neg != lam.end() && *neg < -opt.kkt_tolerance) {
      const auto pos = neg - lam.begin();
      work.erase(work.begin() + pos);
      lam.erase(lam.begin() + pos);
      continue;
    }
    int worst = -1;
    double worst_v = opt.feasibility_tolerance;
    for (int i = 0; i < m; ++i) {
      if (std::find(work.begin(), work.end(), i) != work.end()) continue;
      const double v = set.raw_value(i, t, x);
      if (v > worst_v) {
        worst_v = v;
        worst = i;
      }
    }
    if (worst >= 0) {
      work.push_back(worst);
      lam.push_back(0.0);
      continue;
    }
    res->iterations = total;
    return res;
  }
  return std::nullopt;
}

Vec project_single(const MovingSet& set, int i, double t, const Vec& z, const ProjectionOptions& opt) {
  if (set.raw_value(i, t, z) <= 0.0) return z;
  auto r = newton_kkt(set, t, z, z, {i}, {0.0}, opt);
  if (!r) throw ProjectionFailure("single-constraint projection did not converge");
  return r->x;
}

// Dykstra's alternating projections, followed by a Newton polish.
std::optional<KktState> dykstra(const MovingSet& set, double t, const Vec& y, const ProjectionOptions& opt,
                                std::vector<int>& work) {
  const int m = set.count();
  Vec x = y;
  std::vector<Vec> inc(static_cast<std::size_t>(m), Vec::Zero(set.dim()));
  int it = 0;
  for (; it < 5000; ++it) {
    const Vec before = x;
    for (int i = 0; i < m; ++i) {
      const Vec z = x + inc[static_cast<std::size_t>(i)];
      x = project_single(set, i, t, z, opt);
      inc[static_cast<std::size_t>(i)] = z - x;
    }
    if ((x - before).cwiseAbs().maxCoeff() < 1e-14 && set.max_raw(t, x) <= opt.feasibility_tolerance) break;
  }
  work.clear();
  for (int i = 0; i < m; ++i)
    if (set.raw_value(i, t, x) > -1e-7) work.push_back(i);
  std::vector<double> lam = ls_multipliers(set, t, y, x, work);
  if (auto polished = newton_kkt(set, t, y, x, work, lam, opt)) {
    const bool nonneg = std::all_of(polished->lambda.begin(), polished->lambda.end(),
                                    [&](double v) { return v >= -opt.kkt_tolerance; });
    if (nonneg && set.max_raw(t, polished->x) <= opt.feasibility_tolerance) {
      polished->iterations += it;
      return polished;
    }
  }
  return KktState{x, lam, it};
}

}  // namespace

ProjectionResult project(const MovingSet& set, double t, const Vec& y, const ProjectionOptions& opt) {
  const int m = set.count();
  if (y.size() != set.dim()) throw DimensionMismatch("projection input has wrong dimension");
  if (!y.allFinite()) throw ProjectionFailure("projection input is not finite");

  ProjectionResult out;
  out.multipliers.assign(static_cast<std::size_t>(m), 0.0);
  std::vector<int> work;
  for (int i = 0; i < m; ++i)
    if (set.raw_value(i, t, y) > 0.0) work.push_back(i);
  if (work.empty()) {
    out.point = y;
    return out;
  }

  std::optional<KktState> res;
  try {
    res = active_set_newton(set, t, y, opt, work);
  } catch (const DomainError&) {
    res.reset();
  }
  if (!res) {
    out.used_fallback = true;
    res = dykstra(set, t, y, opt, work);
  }

  out.point = res->x;
  out.iterations = res->iterations;
  for (std::size_t a = 0; a < work.size(); ++a)
    out.multipliers[static_cast<std::size_t>(work[a])] = std::max(0.0, res->lambda[a]);

  Vec r = out.point - y;
  double comp = 0.0;
  for (int i = 0; i < m; ++i) {
    const double mi = out.multipliers[static_cast<std::size_t>(i)];
    if (mi == 0.0) continue;
    const ConstraintJet j = set.raw_jet(i, t, out.point, false);
    r += mi * j.grad;
    comp = std::max(comp, std::abs(mi * j.raw));
  }
  out.kkt_residual = std::max(r.cwiseAbs().maxCoeff(), comp);
  const double viol = set.max_raw(t, out.point);
  const double scale = std::max(1.0, y.cwiseAbs().maxCoeff());
  if (viol > opt.feasibility_tolerance)
    throw ProjectionFailure("projection infeasible: max constraint " + std::to_string(viol));
  if (out.kkt_residual > opt.kkt_tolerance * scale * 10.0)
    throw ProjectionFailure("projection KKT residual " + std::to_string(out.kkt_residual));
  return out;
}

}  // namespace sweepmp
