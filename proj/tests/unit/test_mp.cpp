#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "sweepmp/errors.hpp"
#include "sweepmp/mp.hpp"

using namespace sweepmp;
using testing::vec;

namespace {

Trajectory interior_run(const ProblemFile& f, const ControlSignal& u) {
  IntegratorOptions io;
  io.report_dt = 1e-2;
  return integrate_penalized(f.problem, u, {200.0, 0.005, 5.0, f.problem.set.a1().eta}, io);
}

}  // namespace

TEST_CASE("cone distance") {
  NormalCone quad;
  quad.generators = {vec({1.0, 0.0}), vec({0.0, 1.0})};
  CHECK(cone_distance(quad, vec({1.0, 1.0})) == doctest::Approx(0.0));
  CHECK(cone_distance(quad, vec({1.0, -2.0})) == doctest::Approx(2.0));
  CHECK(cone_distance(quad, vec({-1.0, -1.0})) == doctest::Approx(std::sqrt(2.0)));
  NormalCone ray;
  ray.generators = {vec({1.0, 1.0})};
  CHECK(cone_distance(ray, vec({2.0, 0.0})) == doctest::Approx(std::sqrt(2.0)));
  CHECK(cone_distance(NormalCone{}, vec({3.0, 4.0})) == doctest::Approx(5.0));
  NormalCone all;
  all.whole_space = true;
  CHECK(cone_distance(all, vec({3.0, 4.0})) == 0.0);
}

TEST_CASE("endpoint normal cones") {
  const ProblemFile f = testing::load("interior");
  CHECK(initial_normal_cone(f.problem.initial, vec({-0.5, 0.0})).whole_space);
  const NormalCone free_end = terminal_normal_cone(f.problem, vec({0.5, 0.0}), 1e-3);
  CHECK_FALSE(free_end.whole_space);
  CHECK(free_end.generators.empty());
}

TEST_CASE("free endpoint: corollary certificate on an interior arc") {
  const ProblemFile f = testing::load("interior");
  const Trajectory tr = interior_run(f, *f.control);
  const TerminalFit fit = fit_terminal_multipliers(f.problem, tr);
  CHECK(fit.corollary);
  CHECK(fit.terminal.lambda == 1.0);
  CHECK((fit.terminal.pT - vec({0.0, 1.0})).norm() <= 1e-12);
  const MPReport r = certify(f.problem, tr, certificate_adjoint(f.problem, tr, fit));
  CHECK(r.verdict);
  CHECK(r.normalization == doctest::Approx(2.0));
  for (const auto& c : r.conditions) CHECK_MESSAGE(c.pass, c.name);
  CHECK_THROWS_AS(r.condition("nope"), PreconditionError);

  SUBCASE("verdicts do not depend on the scale of the multipliers") {
    const AdjointArc half = integrate_adjoint(f.problem, tr, {0.5, vec({0.0, 0.5})});
    const MPReport h = certify(f.problem, tr, half);
    for (const auto& c : r.conditions) {
      CHECK(h.condition(c.name).pass == c.pass);
      CHECK(h.condition(c.name).residual == doctest::Approx(c.residual).epsilon(1e-6).scale(1e-9));
    }
  }
}

TEST_CASE("maximization residual detects the wrong control") {
  const ProblemFile f = testing::load("interior");
  const Trajectory good = interior_run(f, *f.control);
  const Trajectory bad = interior_run(f, ControlSignal::constant(vec({-1.0})));
  const TerminalData td{1.0, vec({0.0, 1.0})};
  AdjointOptions loose;
  loose.normalization_tolerance = 10.0;
  // p1(t) = 0.5 (T - t) > 0, so u = 1 maximizes p1 u and u = -1 loses 2 p1(0) = 1.
  CHECK(maximization_residual(f.problem, good, integrate_adjoint(f.problem, good, td, loose), 21) <= 1e-9);
  CHECK(maximization_residual(f.problem, bad, integrate_adjoint(f.problem, bad, td, loose), 21) ==
        doctest::Approx(1.0).epsilon(1e-6));
  const TerminalFit fit = fit_terminal_multipliers(f.problem, bad);
  CHECK_FALSE(certify(f.problem, bad, certificate_adjoint(f.problem, bad, fit)).condition("maximization").pass);
}

TEST_CASE("wall certificate with an active constraint") {
  const ProblemFile f = testing::load("wall_1d");
  const ControlSignal none = ControlSignal::constant(Vec(0));
  const Trajectory tr = integrate_penalized(f.problem, none, {400.0, 1.0 / 400, 2.0, 0.1});
  const MPReport r = certify(f.problem, tr, certificate_adjoint(f.problem, tr, fit_terminal_multipliers(f.problem, tr)));
  for (const auto& c : r.conditions) CHECK_MESSAGE(c.pass, c.name << " residual " << c.residual);
  CHECK(r.verdict);
}
