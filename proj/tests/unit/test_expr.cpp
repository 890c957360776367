#include <doctest.h>

#include <cmath>
#include <vector>

#include "sweepmp/errors.hpp"
#include "sweepmp/expr.hpp"
#include "sweepmp/rng.hpp"

using namespace sweepmp;

namespace {

const std::vector<std::string> kVars{"t", "x1", "x2", "x3"};

Expr P(const char* s) { return parse(s, kVars); }

double ev(const Expr& e, double t, double x1, double x2 = 0.0, double x3 = 0.0) {
  return eval(e, Env{{"t", t}, {"x1", x1}, {"x2", x2}, {"x3", x3}});
}

}  // namespace

TEST_CASE("precedence and associativity") {
  CHECK(ev(P("1 + 2*3"), 0, 0) == 7.0);
  CHECK(ev(P("(1 + 2)*3"), 0, 0) == 9.0);
  CHECK(ev(P("8 - 3 - 2"), 0, 0) == 3.0);
  CHECK(ev(P("8 / 4 / 2"), 0, 0) == 1.0);
  CHECK(ev(P("2^3"), 0, 0) == 8.0);
  CHECK(ev(P("-x1^2"), 0, 2.0) == -4.0);
  CHECK(ev(P("x1^0"), 0, 5.0) == 1.0);
  CHECK(ev(P("1.5e2"), 0, 0) == 150.0);
}

TEST_CASE("functions") {
  CHECK(ev(P("exp(0)"), 0, 0) == 1.0);
  CHECK(ev(P("log(exp(2))"), 0, 0) == doctest::Approx(2.0));
  CHECK(ev(P("sqrt(x1)"), 0, 9.0) == 3.0);
  CHECK(ev(P("sin(x1)^2 + cos(x1)^2"), 0, 0.7) == doctest::Approx(1.0));
  CHECK(ev(P("neg(x1)"), 0, 3.0) == -3.0);
}

TEST_CASE("exact derivatives against closed forms") {
  const Expr e = P("sin(x1) * x1^3");
  const double x = 0.8;
  CHECK(ev(e.diff("x1"), 0, x) == doctest::Approx(std::cos(x) * x * x * x + 3 * x * x * std::sin(x)).epsilon(1e-14));
  CHECK(e.diff("x2").is_zero());

  const Expr s = P("x1^2 + x2^2 + (x3 + 0.5)^2 - 1");
  CHECK(ev(s.diff("x3"), 0, 0.1, 0.2, 0.3) == doctest::Approx(2 * (0.3 + 0.5)));
  CHECK(ev(s.diff("x3").diff("x3"), 0, 0, 0, 0) == 2.0);
  CHECK(s.diff("x1").diff("x2").is_zero());

  const Expr q = P("sqrt(x1) / x2 + log(x1*x2) - t*exp(x1)");
  CHECK(ev(q.diff("x1"), 2.0, 1.5, 2.5) ==
        doctest::Approx(0.5 / std::sqrt(1.5) / 2.5 + 1 / 1.5 - 2.0 * std::exp(1.5)));
  CHECK(ev(q.diff("t"), 2.0, 1.5, 2.5) == doctest::Approx(-std::exp(1.5)));
}

TEST_CASE("derivatives agree with central differences at random points") {
  const std::vector<const char*> sources{"x1*x2 - sin(x3)*t", "exp(x1/3)*cos(x2) + x3^4", "log(1 + x1^2) - sqrt(4 + x2^2)",
                                         "(x1 - t)^3 / (2 + x2^2)", "neg(x1*x2*x3) + t^2"};
  Rng rng(7);
  for (const char* src : sources) {
    const Expr e = P(src);
    for (int k = 0; k < 50; ++k) {
      double v[4];
      for (double& a : v) a = 2.0 * rng.uniform() - 1.0;
      for (int a = 0; a < 4; ++a) {
        const double h = 1e-6;
        double up[4], dn[4];
        std::copy(v, v + 4, up);
        std::copy(v, v + 4, dn);
        up[a] += h;
        dn[a] -= h;
        const double fd = (ev(e, up[0], up[1], up[2], up[3]) - ev(e, dn[0], dn[1], dn[2], dn[3])) / (2 * h);
        const double d = ev(e.diff(kVars[static_cast<std::size_t>(a)]), v[0], v[1], v[2], v[3]);
        CHECK(std::abs(d - fd) <= 1e-6 * std::max(1.0, std::abs(d)));
      }
    }
  }
}

TEST_CASE("compiled evaluation matches tree evaluation") {
  const Expr e = P("exp(x1/3)*cos(x2) + x3^4 - t/(1 + x1^2)");
  const CompiledExpr c(e, kVars);
  const double v[4] = {0.3, -0.4, 1.2, 0.9};
  CHECK(c(v) == doctest::Approx(ev(e, v[0], v[1], v[2], v[3])).epsilon(1e-15));
  const CompiledExpr z(P("x1^2").diff("x2"), kVars);
  CHECK(z.is_zero());
  CHECK(CompiledExpr()(v) == 0.0);
}

TEST_CASE("printing round-trips") {
  const Expr e = P("x1^2 - 3*(x2 + t)/exp(x3) + neg(x1)");
  const Expr back = parse(e.str(), kVars);
  CHECK(ev(back, 0.4, 1.1, -0.2, 0.6) == doctest::Approx(ev(e, 0.4, 1.1, -0.2, 0.6)).epsilon(1e-15));
}

TEST_CASE("errors carry positions") {
  CHECK_THROWS_AS(P("1 +"), ParseError);
  CHECK_THROWS_AS(P("x1^1.5"), ParseError);
  CHECK_THROWS_AS(P("(x1"), ParseError);
  try {
    P("x1 + x4");
    FAIL("expected UnknownVariable");
  } catch (const UnknownVariable& e) {
    CHECK(e.name() == "x4");
    CHECK(e.offset() == 5);
  }
  CHECK_THROWS_AS(P("tan(x1)"), UnknownFunction);
  CHECK_THROWS_AS(ev(P("log(x1)"), 0, -1.0), DomainError);
  CHECK_THROWS_AS(ev(P("1/x1"), 0, 0.0), DomainError);
  CHECK_THROWS_AS(eval(P("x1"), Env{}), UnboundVariable);
}
