#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "sweepmp/control.hpp"
#include "sweepmp/errors.hpp"
#include "sweepmp/moving_set.hpp"
#include "sweepmp/rng.hpp"

using namespace sweepmp;
using testing::vec;

namespace {

MovingSet make_set(std::vector<const char*> src, int n, A1Constants a1 = {}, double r = 3.0) {
  const auto vars = variable_names(n);
  std::vector<Expr> e;
  for (const char* s : src) e.push_back(parse(s, vars));
  return MovingSet(e, n, a1, r);
}

SamplingPlan quick_plan(double horizon = 1.0) {
  SamplingPlan p;
  p.count = 20000;
  p.horizon = horizon;
  return p;
}

}  // namespace

TEST_CASE("cap is C2 and matches the identity above -beta") {
  const CapFunction h(0.1);
  CHECK(h.value(0.3) == 0.3);
  CHECK(h.value(-0.1) == doctest::Approx(-0.1));
  CHECK(h.value(-0.25) == doctest::Approx(-0.2));
  for (double z : {-0.1, -0.2}) {
    const double e = 1e-9;
    CHECK(h.value(z - e) == doctest::Approx(h.value(z + e)).epsilon(1e-8));
    CHECK(h.d1(z - e) == doctest::Approx(h.d1(z + e)).epsilon(1e-6));
    CHECK(std::abs(h.d2(z - e) - h.d2(z + e)) < 1e-5);
  }
  // Monotone and matching its own derivatives in the blend.
  for (double z = -0.199; z < -0.101; z += 0.004) {
    CHECK(h.d1(z) > 0.0);
    const double e = 1e-6;
    CHECK(h.d1(z) == doctest::Approx((h.value(z + e) - h.value(z - e)) / (2 * e)).epsilon(1e-6));
    CHECK(h.d2(z) == doctest::Approx((h.d1(z + e) - h.d1(z - e)) / (2 * e)).epsilon(1e-5));
  }
  CHECK_THROWS_AS(CapFunction(0.0), InvalidParameters);
}

TEST_CASE("capped jets follow the chain rule") {
  const MovingSet s = make_set({"x1^2 + x2^2 - 1 - 0.1*t"}, 2, {0.1, 0.5, 0.9});
  // Point in the blend region: raw psi = -0.15.
  const Vec x = vec({std::sqrt(0.85), 0.0});
  const ConstraintJet j = s.jet(0, 0.0, x);
  const CapFunction& h = s.cap();
  CHECK(j.raw == doctest::Approx(-0.15));
  CHECK(j.value == doctest::Approx(h.value(-0.15)));
  CHECK(j.grad[0] == doctest::Approx(h.d1(-0.15) * 2 * x[0]));
  CHECK(j.dt == doctest::Approx(-0.1 * h.d1(-0.15)));
  CHECK(j.hess(0, 0) == doctest::Approx(h.d2(-0.15) * 4 * x[0] * x[0] + h.d1(-0.15) * 2));
  CHECK(j.hess(1, 1) == doctest::Approx(h.d1(-0.15) * 2));
  // Flat below -2 beta.
  const ConstraintJet deep = s.jet(0, 0.0, vec({0.1, 0.1}));
  CHECK(deep.grad.norm() == 0.0);
  CHECK(deep.hess.norm() == 0.0);
  CHECK(deep.value == doctest::Approx(-0.2));
  CHECK(s.active_indices(0.0, vec({1.0, 0.0})) == std::vector<int>{0});
  CHECK(s.active_indices(0.0, vec({0.0, 0.0})).empty());
}

TEST_CASE("A1 validator on the shipped geometries") {
  SUBCASE("two spheres pass") {
    const Problem p = build_two_sphere({});
    const A1Report r = validate_a1(p.set, quick_plan(p.horizon));
    CHECK(r.pass);
    CHECK(r.band_samples > 1000);
    CHECK(r.pair_samples > 100);
    // Raw gradient norm is 2 sqrt(1 + psi) >= 2 sqrt(1 - beta) in the band.
    CHECK(r.min_band_gradient >= 2 * std::sqrt(0.95) - 1e-9);
    CHECK(r.min_pair_inner > 0.0);
  }
  SUBCASE("acute wedge fails the inner-product check only") {
    const MovingSet s = make_set({"x2 - 0.3*x1", "neg(x2) - 0.3*x1"}, 2, {0.05, 0.5, 0.9});
    const A1Report r = validate_a1(s, quick_plan());
    CHECK_FALSE(r.pass);
    CHECK_FALSE(r.inner_ok);
    CHECK(r.gradient_ok);
    CHECK(r.flat_ok);
    CHECK(r.min_pair_inner == doctest::Approx(0.09 - 1.0));
    REQUIRE(r.inner_violation);
    CHECK(r.inner_violation->indices.size() == 2);
  }
  SUBCASE("nearly parallel constraints fail dominance") {
    const MovingSet s = make_set({"x1 - 1", "x1 + 0.05*x2 - 1"}, 2, {0.05, 0.5, 0.9});
    const A1Report r = validate_a1(s, quick_plan());
    CHECK(r.inner_ok);
    CHECK_FALSE(r.dominance_ok);
  }
  SUBCASE("vanishing gradient on the boundary fails the band bound") {
    const MovingSet s = make_set({"x1^3"}, 1, {0.05, 0.1, 0.9});
    const A1Report r = validate_a1(s, quick_plan());
    CHECK_FALSE(r.gradient_ok);
    CHECK(r.suggested_eta < 0.1);
  }
  SUBCASE("deterministic for a fixed seed") {
    const MovingSet s = make_set({"x1^2 + x2^2 - 1"}, 2);
    const A1Report a = validate_a1(s, quick_plan());
    const A1Report b = validate_a1(s, quick_plan());
    CHECK(a.min_band_gradient == b.min_band_gradient);
    CHECK(a.band_samples == b.band_samples);
  }
}

TEST_CASE("projection against closed forms") {
  SUBCASE("half-plane") {
    const MovingSet s = make_set({"x1 + x2 - 1"}, 2);
    const ProjectionResult r = project(s, 0.0, vec({2.0, 2.0}));
    CHECK(r.point[0] == doctest::Approx(0.5));
    CHECK(r.point[1] == doctest::Approx(0.5));
    // y - x = m grad psi with grad = (1, 1).
    CHECK(r.multipliers[0] == doctest::Approx(1.5));
  }
  SUBCASE("ball") {
    const MovingSet s = make_set({"x1^2 + x2^2 + x3^2 - 4"}, 3);
    const Vec y = vec({3.0, -4.0, 12.0});
    const ProjectionResult r = project(s, 0.0, y);
    CHECK((r.point - 2.0 * y / 13.0).norm() < 1e-9);
  }
  SUBCASE("lens corner of two discs") {
    const MovingSet s = make_set({"x1^2 + (x2 + 0.5)^2 - 1", "x1^2 + (x2 - 0.5)^2 - 1"}, 2);
    const ProjectionResult r = project(s, 0.0, vec({2.0, 0.0}));
    CHECK(r.point[0] == doctest::Approx(std::sqrt(0.75)).epsilon(1e-9));
    CHECK(std::abs(r.point[1]) < 1e-9);
    CHECK(r.multipliers[0] > 0.0);
    CHECK(r.multipliers[1] == doctest::Approx(r.multipliers[0]));
  }
  SUBCASE("feasible points are returned unchanged") {
    const MovingSet s = make_set({"x1^2 + x2^2 - 1"}, 2);
    const Vec y = vec({0.2, 0.3});
    const ProjectionResult r = project(s, 0.0, y);
    CHECK(r.point == y);
    CHECK(r.multipliers[0] == 0.0);
  }
  SUBCASE("moving wall") {
    const MovingSet s = make_set({"t - x1"}, 1);
    CHECK(project(s, 0.7, vec({0.2})).point[0] == doctest::Approx(0.7));
  }
}

TEST_CASE("projection is a projection on random points") {
  const Problem p = build_two_sphere({});
  Rng rng(3);
  for (int k = 0; k < 200; ++k) {
    const Vec y = uniform_in_ball(rng, 3, 1.8);
    const ProjectionResult r = project(p.set, 0.0, y);
    CHECK(p.set.max_raw(0.0, r.point) <= 1e-9);
    // Variational inequality against feasible samples: <y - x, z - x> <= 0.
    for (int j = 0; j < 20; ++j) {
      const Vec z = uniform_in_ball(rng, 3, 0.5);
      if (!p.set.contains(0.0, z)) continue;
      CHECK((y - r.point).dot(z - r.point) <= 1e-8);
    }
  }
}

TEST_CASE("steering reaches requested levels") {
  const MovingSet s = make_set({"x1^2 + x2^2 - 1"}, 2);
  const auto x = steer_to_levels(s, 0.0, vec({0.3, 0.4}), {0}, {0.02});
  REQUIRE(x);
  CHECK(s.raw_value(0, 0.0, *x) == doctest::Approx(0.02).epsilon(1e-9));
}
