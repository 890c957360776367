#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "sweepmp/adjoint.hpp"
#include "sweepmp/errors.hpp"

using namespace sweepmp;
using testing::vec;

TEST_CASE("adjoint matrix is minus the transposed Jacobian of the penalized field") {
  const ProblemFile f = testing::load("two_sphere");
  const PenaltyLevel l{100.0, 0.01, 3.9, f.problem.set.a1().eta};
  const Vec u = vec({1.0});
  // A point near the intersection circle so both penalty terms are live.
  for (const Vec& x : {vec({-0.3, 0.8, 0.0}), vec({0.1, 0.86, 0.02}), vec({-0.6, 0.3, 0.2})}) {
    const Mat A = adjoint_matrix(f.problem, l, 0.5, x, u);
    const double h = 1e-7;
    for (int j = 0; j < 3; ++j) {
      Vec e = Vec::Zero(3);
      e[j] = h;
      const Vec col = (penalized_rhs(f.problem, l, 0.5, x + e, u) - penalized_rhs(f.problem, l, 0.5, x - e, u)) / (2 * h);
      for (int i = 0; i < 3; ++i) CHECK(A(j, i) == doctest::Approx(-col[i]).epsilon(1e-5).scale(1.0));
    }
  }
}

TEST_CASE("interior arc: closed-form adjoint") {
  const ProblemFile f = testing::load("interior");
  const PenaltyLevel l{100.0, 0.01, 5.0, f.problem.set.a1().eta};
  IntegratorOptions io;
  io.report_dt = 1e-2;
  const Trajectory tr = integrate_penalized(f.problem, *f.control, l, io);
  const TerminalData td{0.5, vec({0.3, -0.4})};
  const AdjointArc arc = integrate_adjoint(f.problem, tr, td);
  // A = -(df/dx)^T = [[0, -0.5], [0, 0]] away from the wall.
  const double T = f.problem.horizon;
  for (std::size_t j = 0; j < arc.size(); ++j) {
    CHECK(arc.p[j][1] == doctest::Approx(-0.4));
    CHECK(arc.p[j][0] == doctest::Approx(0.3 - 0.2 * (T - arc.t[j])).epsilon(1e-8));
  }
  const auto fwd = integrate_adjoint_forward(f.problem, tr, arc.p.front());
  CHECK((fwd.back() - arc.p.back()).norm() <= 1e-8);
  CHECK(arc.jumps.empty());
  CHECK_THROWS_AS(integrate_adjoint(f.problem, tr, {1.0, vec({1.0, 0.0})}), PreconditionError);
}

TEST_CASE("wall: multipliers, densities and bounds") {
  const ProblemFile f = testing::load("wall_1d");
  const ControlSignal none = ControlSignal::constant(Vec(0));
  std::vector<double> bounds;
  for (double g : {50.0, 100.0, 200.0, 400.0}) {
    const PenaltyLevel l{g, 1.0 / g, 2.0, 0.1};
    const Trajectory tr = integrate_penalized(f.problem, none, l);
    const AdjointArc arc = integrate_adjoint(f.problem, tr, {0.5, vec({-0.5})});
    const MultiplierRecord rec = extract_multipliers(tr, arc);
    CHECK(rec.measure_min >= -1e-12);
    const DiagnosticsReport d = diagnostics(tr, arc);
    CHECK(d.normalization == doctest::Approx(1.0));
    bounds.push_back(d.weighted_L1);
  }
  for (double b : bounds) CHECK(b <= 2 * bounds.front());
}

TEST_CASE("trapezoid") {
  CHECK(trapezoid({0.0, 0.5, 2.0}, {0.0, 0.5, 2.0}) == doctest::Approx(2.0));
  CHECK_THROWS_AS(trapezoid({0.0, 1.0}, {1.0}), DimensionMismatch);
}
