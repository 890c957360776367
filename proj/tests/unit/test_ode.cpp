#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "sweepmp/errors.hpp"
#include "sweepmp/ode.hpp"

using namespace sweepmp;
using testing::vec;

TEST_CASE("exponential decay and oscillator against closed forms") {
  OdeOptions o;
  Stepper decay([](double, const Vec& x, Vec& d) { d = -2.0 * x; }, [](double, const Vec&, Mat& J) { J = Mat::Constant(1, 1, -2.0); }, o);
  Vec x = vec({1.0});
  decay.advance(0.0, 1.5, x);
  CHECK(x[0] == doctest::Approx(std::exp(-3.0)).epsilon(1e-8));

  Stepper osc(
      [](double, const Vec& y, Vec& d) {
        d.resize(2);
        d << y[1], -y[0];
      },
      [](double, const Vec&, Mat& J) {
        J.resize(2, 2);
        J << 0, 1, -1, 0;
      },
      o);
  Vec y = vec({1.0, 0.0});
  osc.advance(0.0, 2.0, y);
  CHECK(y[0] == doctest::Approx(std::cos(2.0)).epsilon(1e-8));
  CHECK(y[1] == doctest::Approx(-std::sin(2.0)).epsilon(1e-8));
  // Backwards recovers the start.
  osc.advance(2.0, 0.0, y);
  CHECK(y[0] == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(std::abs(y[1]) < 1e-8);
}

TEST_CASE("time-dependent right-hand side") {
  Stepper s([](double t, const Vec&, Vec& d) { d = vec({std::cos(t)}); }, [](double, const Vec&, Mat& J) { J = Mat::Zero(1, 1); },
            OdeOptions{});
  Vec x = vec({0.0});
  s.advance(0.0, 3.0, x);
  CHECK(x[0] == doctest::Approx(std::sin(3.0)).epsilon(1e-9));
}

TEST_CASE("stiff problem switches to the implicit stepper") {
  OdeOptions o;
  o.h_max = 1.0;
  const double lam = -1e6;
  Stepper s([&](double t, const Vec& x, Vec& d) { d = vec({lam * (x[0] - std::cos(t))}); },
            [&](double, const Vec&, Mat& J) { J = Mat::Constant(1, 1, lam); }, o);
  Vec x = vec({1.0});
  s.advance(0.0, 1.0, x);
  // The solution hugs cos(t) with lag of order 1/|lam|.
  CHECK(x[0] == doctest::Approx(std::cos(1.0)).epsilon(1e-5));
  CHECK(s.stats().implicit_used);
}

TEST_CASE("forced implicit mode is accurate on smooth problems") {
  OdeOptions o;
  o.force_implicit = true;
  o.rtol = 1e-8;
  o.atol = 1e-10;
  Stepper s([](double, const Vec& x, Vec& d) { d = -x; }, [](double, const Vec&, Mat& J) { J = -Mat::Identity(1, 1); }, o);
  Vec x = vec({1.0});
  s.advance(0.0, 1.0, x);
  CHECK(x[0] == doctest::Approx(std::exp(-1.0)).epsilon(1e-6));
}
