#include <doctest.h>

#include <string>

#include <cmath>

#include "helpers.hpp"
#include "sweepmp/errors.hpp"
#include "sweepmp/problem.hpp"

using namespace sweepmp;
using testing::vec;

TEST_CASE("variable naming") {
  CHECK(variable_names(2) == std::vector<std::string>{"t", "x1", "x2"});
  CHECK(variable_names(1, 2) == std::vector<std::string>{"t", "x1", "u1", "u2"});
}

TEST_CASE("dynamics evaluation and Jacobian") {
  const auto vars = variable_names(2, 1);
  const Dynamics f({parse("x2*u1 + t", vars), parse("sin(x1)", vars)}, 2, 1);
  const Vec v = f.eval(0.5, vec({0.3, 2.0}), vec({-1.0}));
  CHECK(v[0] == doctest::Approx(-1.5));
  CHECK(v[1] == doctest::Approx(std::sin(0.3)));
  const Mat J = f.jacobian(0.5, vec({0.3, 2.0}), vec({-1.0}));
  CHECK(J(0, 0) == 0.0);
  CHECK(J(0, 1) == -1.0);
  CHECK(J(1, 0) == doctest::Approx(std::cos(0.3)));
  CHECK_THROWS_AS(Dynamics({parse("x1", vars)}, 2, 1), DimensionMismatch);
  CHECK_THROWS_AS(f.eval(0.0, vec({1.0}), vec({0.0})), DimensionMismatch);
}

TEST_CASE("control sets") {
  const ControlSet box = ControlSet::box(vec({-1.0, 0.0}), vec({1.0, 2.0}));
  CHECK(box.dim() == 2);
  CHECK(box.contains(vec({0.5, 2.0})));
  CHECK_FALSE(box.contains(vec({1.5, 1.0})));
  const auto g = box.grid(3);
  CHECK(g.size() == 9);
  bool has_vertex = false;
  for (const Vec& u : g) has_vertex = has_vertex || (u[0] == 1.0 && u[1] == 2.0);
  CHECK(has_vertex);
  const ControlSet fin = ControlSet::finite({vec({-1.0}), vec({1.0})});
  CHECK(fin.grid(21).size() == 2);
  CHECK(fin.contains(vec({1.0})));
  CHECK_FALSE(fin.contains(vec({0.0})));
  const ControlSet none = ControlSet::box(Vec(0), Vec(0));
  CHECK(none.grid(21).size() == 1);
  CHECK_THROWS_AS(ControlSet::box(vec({1.0}), vec({0.0})), InvalidParameters);
}

TEST_CASE("endpoint sets") {
  InitialSet ball;
  ball.kind = InitialSet::Kind::Ball;
  ball.center = vec({1.0, 1.0});
  ball.radius = 0.5;
  CHECK(ball.contains(vec({1.3, 1.3})));
  CHECK_FALSE(ball.contains(vec({1.5, 1.5})));
  CHECK(ball.representative() == ball.center);

  const auto x = std::vector<std::string>{"x1", "x2"};
  const TerminalSet ts({parse("x1 - 1", x), parse("neg(x2)", x)}, false, 2);
  CHECK(ts.max_violation(vec({0.5, 0.5})) == 0.0);
  CHECK(ts.max_violation(vec({1.5, -0.25})) == doctest::Approx(0.5));
  CHECK(ts.gradient(0, vec({0.0, 0.0}))[0] == 1.0);
}

TEST_CASE("control signals are left-continuous at breaks") {
  const ControlSignal u = ControlSignal::switching(1.0, vec({1.0}), vec({-1.0}));
  CHECK(u.at(0.0)[0] == 1.0);
  CHECK(u.at(1.0)[0] == 1.0);
  CHECK(u.at(1.0 + 1e-12)[0] == -1.0);
  CHECK(u.on(1.0, 2.0)[0] == -1.0);
  CHECK_THROWS_AS(ControlSignal({1.0, 0.5}, {vec({0}), vec({0}), vec({0})}), InvalidParameters);
  CHECK_THROWS_AS(ControlSignal({1.0}, {vec({0})}), DimensionMismatch);
}

TEST_CASE("problem consistency check on fixtures") {
  for (const char* name : {"two_sphere", "wall_1d", "moving_wall", "interior"}) {
    const ProblemFile f = testing::load(name);
    const ProblemCheck c = check_problem(f.problem, 2000, 1);
    CHECK_MESSAGE(c.initial_inside, name);
    CHECK_MESSAGE(c.terminal_inside, name);
    if (std::string(name) == "wall_1d") CHECK(c.max_speed == 1.0);
    if (std::string(name) == "moving_wall") CHECK(c.max_speed == 0.0);
  }
}
