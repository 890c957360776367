#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "helpers.hpp"
#include "sweepmp/errors.hpp"
#include "sweepmp/sweep.hpp"

using namespace sweepmp;
using testing::vec;

namespace {

double wall_error(const Trajectory& tr) {
  double e = 0.0;
  for (std::size_t j = 0; j < tr.size(); ++j) e = std::max(e, std::abs(tr.x[j][0] - std::min(tr.t[j], 1.0)));
  return e;
}

const ControlSignal kNone = ControlSignal::constant(Vec(0));

}  // namespace

TEST_CASE("mu(gamma) and the multiplier cap") {
  const PenaltyLevel l{200.0, 1.0 / 200.0, 2.0, 0.1};
  CHECK(l.mu_k() == doctest::Approx(std::log(2.0 / (0.01 * 200.0)) / 200.0));
  CHECK(l.gamma * std::exp(l.gamma * l.mu_k()) == doctest::Approx(l.xi_cap()));
  CHECK(l.xi_cap() == doctest::Approx(200.0));
}

TEST_CASE("reporting grid merges breakpoints") {
  const auto g = make_grid(1.0, 0.25, {0.3, 0.5, 1.0});
  CHECK(g == std::vector<double>{0.0, 0.25, 0.3, 0.5, 0.75, 1.0});
  CHECK_THROWS_AS(make_grid(1.0, 0.0, {}), InvalidParameters);
}

TEST_CASE("catching-up reproduces the analytic wall solutions") {
  const ProblemFile wall = testing::load("wall_1d");
  const Trajectory a = catching_up(wall.problem, kNone, 1e-3);
  CHECK(wall_error(a) <= 2e-3);
  CHECK(a.xi.back()[0] == doctest::Approx(1.0));  // reaction balances f = 1
  const ProblemFile mw = testing::load("moving_wall");
  const Trajectory b = catching_up(mw.problem, kNone, 1e-3);
  double e = 0.0;
  for (std::size_t j = 0; j < b.size(); ++j) e = std::max(e, std::abs(b.x[j][0] - b.t[j]));
  CHECK(e <= 2e-3);
}

TEST_CASE("penalized wall: steady state, invariance and convergence") {
  const ProblemFile wall = testing::load("wall_1d");
  double prev = 1e300;
  for (double g : {50.0, 100.0, 200.0, 400.0}) {
    const PenaltyLevel l{g, 1.0 / g, 2.0, 0.1};
    const Trajectory tr = integrate_penalized(wall.problem, kNone, l);
    // On the wall xi = 1, so psi - sigma = log(1 / gamma) / gamma.
    CHECK(tr.x.back()[0] == doctest::Approx(1.0 + 1.0 / g + std::log(1.0 / g) / g).epsilon(1e-6));
    CHECK(tr.max_invariance_excess <= 1e-9);
    CHECK(tr.max_xi <= l.xi_cap() * (1 + 1e-6));
    const double err = wall_error(tr);
    CHECK(err < prev);
    prev = err;
  }
  CHECK(prev <= 2e-2);
}

TEST_CASE("penalized run guards") {
  const ProblemFile wall = testing::load("wall_1d");
  SUBCASE("start outside the inflated set") {
    CHECK_THROWS_AS(integrate_penalized(wall.problem, kNone, {100.0, 0.01, 2.0, 0.1}, {}, vec({1.5})), PreconditionError);
  }
  SUBCASE("a too-small mu breaks the cap") {
    CHECK_THROWS_AS(integrate_penalized(wall.problem, kNone, {100.0, 0.01, 0.5, 1.0}), InvarianceViolation);
    IntegratorOptions o;
    o.enforce = false;
    const Trajectory tr = integrate_penalized(wall.problem, kNone, {100.0, 0.01, 0.5, 1.0}, o);
    CHECK(tr.max_xi > 0.5);
  }
}

TEST_CASE("uniqueness at desk scale") {
  const ProblemFile f = testing::load("two_sphere");
  const PenaltyLevel l{200.0, 1.0 / 200.0, 3.9, f.problem.set.a1().eta};
  const ControlSignal u = *f.control;
  const Vec x0 = f.problem.initial.representative();
  const Trajectory a = integrate_penalized(f.problem, u, l, {}, x0);
  const Trajectory b = integrate_penalized(f.problem, u, l, {}, x0 + vec({1e-6, 0.0, 0.0}));
  CHECK((a.x.back() - b.x.back()).norm() <= 1e-4);
}

TEST_CASE("schedules") {
  const ProblemFile wall = testing::load("wall_1d");
  SamplingPlan plan;
  plan.count = 5000;
  plan.horizon = 2.0;
  const PenaltySchedule s = build_schedule(wall.problem.set, 2.0, 0.1, {25, 50, 100, 200, 400}, 1.0, plan);
  CHECK(s.inclusion.holds);
  CHECK(s.sigmas[2] == doctest::Approx(0.01));
  CHECK(s.mus[4] == doctest::Approx(mu_of_gamma(2.0, 0.1, 400.0)));
  // Past gamma = e mu / eta^2 the inclusion with sigma = 1 / gamma is lost.
  CHECK_THROWS_AS(build_schedule(wall.problem.set, 2.0, 0.1, {1000.0}, 1.0, plan), ScheduleInfeasible);
  const PenaltySchedule r = PenaltySchedule::from_lists(wall.problem.set, 2.0, 0.1, {1000.0}, {0.001}, plan);
  CHECK_FALSE(r.inclusion.holds);
}

TEST_CASE("helpers") {
  CHECK(non_increasing({1.0, 0.5, 0.52, 0.1}, 0.1));
  CHECK_FALSE(non_increasing({1.0, 0.5, 0.6}, 0.1));
  Trajectory a, b;
  a.t = {0.0, 1.0};
  a.x = {vec({0.0}), vec({1.0})};
  b.t = {0.0, 0.5, 1.0};
  b.x = {vec({0.0}), vec({0.75}), vec({1.0})};
  CHECK(sup_distance(a, b) == doctest::Approx(0.0));
  CHECK(a.state_at(0.25)[0] == doctest::Approx(0.25));
}
