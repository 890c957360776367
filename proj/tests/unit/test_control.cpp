#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "sweepmp/control.hpp"
#include "sweepmp/errors.hpp"

using namespace sweepmp;
using testing::vec;

namespace {

PenaltyLevel example_level(const Problem& p) { return {400.0, 1.0 / 400, 3.896, p.set.a1().eta}; }

SwitchOptions coarse() {
  SwitchOptions o;
  o.integrator.report_dt = 1e-2;
  return o;
}

}  // namespace

TEST_CASE("two-sphere parameters") {
  const TwoSphereParams p;
  CHECK_NOTHROW(p.check());
  CHECK(p.y1() == doctest::Approx(std::sqrt(1 - 0.36 - 0.49)));
  CHECK(p.y2() == doctest::Approx(std::sqrt(0.75)));
  CHECK(two_sphere_eta(p) == doctest::Approx(1.7544229820656134));
  TwoSphereParams bad = p;
  bad.h = 1.2;  // spheres no longer intersect
  CHECK_THROWS_AS(bad.check(), InvalidParameters);
  bad = p;
  bad.x0 = 0.9;  // start point off the sphere
  CHECK_THROWS_AS(bad.check(), InvalidParameters);
}

TEST_CASE("built problem agrees with the fixture") {
  const Problem built = build_two_sphere(TwoSphereParams{});
  const ProblemFile file = testing::load("two_sphere");
  const Problem& fp = file.problem;
  REQUIRE(fp.set.count() == built.set.count());
  CHECK(fp.horizon == built.horizon);
  CHECK(fp.set.a1().eta == doctest::Approx(built.set.a1().eta));
  CHECK(fp.set.a1().beta == built.set.a1().beta);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> d(-1.5, 1.5);
  for (int s = 0; s < 100; ++s) {
    const Vec x = vec({d(rng), d(rng), d(rng)});
    const Vec u = vec({d(rng) / 1.5});
    const double t = std::abs(d(rng));
    CHECK((fp.dynamics.eval(t, x, u) - built.dynamics.eval(t, x, u)).norm() <= 1e-12);
    for (int i = 0; i < fp.set.count(); ++i) CHECK(fp.set.raw_value(i, t, x) == doctest::Approx(built.set.raw_value(i, t, x)));
    CHECK(fp.terminal->max_violation(x) == doctest::Approx(built.terminal->max_violation(x)));
    CHECK(fp.cost.value(x) == doctest::Approx(built.cost.value(x)));
  }
}

TEST_CASE("switching controls and the exact control penalty") {
  const ControlSignal s = switching_control(1.0);
  CHECK(s.at(0.5)[0] == 1.0);
  CHECK(s.at(1.5)[0] == -1.0);
  const Problem p = build_two_sphere(TwoSphereParams{});
  Trajectory tr;
  tr.t = {0.0, p.horizon};
  const Vec x0 = vec({-0.6, TwoSphereParams{}.y1(), 0.2});
  tr.x = {x0, vec({0.25, 0.0, 0.0})};
  tr.u = {vec({1.0}), vec({1.0})};
  CHECK(penalized_objective(p, tr, 0.1, ControlSignal::constant(vec({1.0})), x0) == doctest::Approx(-0.25));
  // The reference switches to -1 at t = 1, so |u - u_ref| = 2 on (1, T].
  const double J = penalized_objective(p, tr, 0.1, ControlSignal::switching(1.0, vec({1.0}), vec({-1.0})), x0);
  CHECK(J == doctest::Approx(-0.25 + 0.1 * 2 * (p.horizon - 1.0)));
  CHECK(penalized_objective(p, tr, 0.0, s, x0 + vec({0.0, 0.0, 0.1})) == doctest::Approx(-0.24));
  CHECK_THROWS_AS(simulate_switching(p, example_level(p), 3.0), InvalidParameters);
}

TEST_CASE("contact detection and sign counting on synthetic data") {
  Trajectory tr;
  tr.xi_cap = 1.0;
  for (int j = 0; j <= 10; ++j) {
    const double t = j * 0.1;
    tr.t.push_back(t);
    tr.xi.push_back({t >= 0.2 && t <= 0.8 ? 0.5 : 0.0, t >= 0.4 && t <= 0.6 ? 0.5 : 0.0});
  }
  const ContactTimes c = detect_contact(tr, 0.05);
  CHECK(c.t1 == doctest::Approx(0.2));
  CHECK(c.t2 == doctest::Approx(0.4));
  CHECK(c.t3 == doctest::Approx(0.8));
  CHECK(c.ordered(1.0));

  AdjointArc arc;
  for (int j = 0; j <= 10; ++j) {
    arc.t.push_back(j * 0.1);
    arc.p.push_back(vec({1.0, 0.5 - j * 0.1, 0.0}));
  }
  const SignPattern s = q_sign_pattern(arc);
  CHECK(s.sign_changes == 1);
  CHECK(s.pass);
  CHECK(*s.change_time == doctest::Approx(0.5).epsilon(0.11));
}

TEST_CASE("two-sphere run at the reported switching time") {
  const Problem p = build_two_sphere(TwoSphereParams{});
  const SwitchRun r = simulate_switching(p, example_level(p), 2.43765, coarse());
  CHECK(r.feasible);
  CHECK(r.contact.ordered(p.horizon));
  const SwitchRun early = simulate_switching(p, example_level(p), 1.0, coarse());
  CHECK_FALSE(early.feasible);
  CHECK(early.terminal_violation > 0.0);
  const ArcCheck a = check_arc_formulas(TwoSphereParams{}, r.traj, r.contact, 0.05);
  CHECK(a.intersection_nodes > 0);
  CHECK(a.single_nodes > 0);
  CHECK(a.intersection_formula <= 2e-2);
  CHECK(a.single_formula <= 2e-2);
}

TEST_CASE("switching optimization") {
  const Problem p = build_two_sphere(TwoSphereParams{});
  OptimizeOptions o;
  o.run = coarse();
  o.grid_points = 40;
  o.agreement = 2e-2;
  const SwitchOptimum opt = optimize_switching(p, example_level(p), {0.5 * p.horizon, 0.995 * p.horizon}, o);
  CHECK(opt.agree);
  CHECK(opt.t_star == doctest::Approx(2.4377).epsilon(5e-3));
  CHECK_THROWS_AS(optimize_switching(p, example_level(p), {0.2, 0.6}, o), NoFeasibleSwitch);
}
