#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "bbsox/poly.hpp"

using namespace bbsox;

namespace {

Eigen::VectorXd vec3(double a, double b, double c) {
  Eigen::VectorXd v(3);
  v << a, b, c;
  return v;
}

}  // namespace

TEST_CASE("constant and variable constructors") {
  Polynomial c = Polynomial::constant(3, 2.5);
  Polynomial x2 = Polynomial::variable(3, 1);
  Eigen::VectorXd x = vec3(1.0, -4.0, 7.0);
  CHECK(c.eval(x) == doctest::Approx(2.5));
  CHECK(x2.eval(x) == doctest::Approx(-4.0));
  CHECK(c.is_constant());
  CHECK(!x2.is_constant());
  CHECK(x2.degree() == 1);
}

TEST_CASE("parser handles precedence, powers, and unary minus") {
  auto vars = default_var_names(3);
  Polynomial p = parse_polynomial("x1^2*x2 - 3*x3", vars);
  Eigen::VectorXd x = vec3(2.0, 5.0, 1.0);
  CHECK(p.eval(x) == doctest::Approx(2.0 * 2.0 * 5.0 - 3.0));

  Polynomial q = parse_polynomial("-(x1 + 2)*(x1 - 2)", vars);
  CHECK(q.eval(x) == doctest::Approx(-(2.0 + 2.0) * (2.0 - 2.0)));
  CHECK(q.eval(vec3(3, 0, 0)) == doctest::Approx(-5.0));

  Polynomial r = parse_polynomial("0.5*(x1^2 + x2^2)", vars);
  CHECK(r.eval(x) == doctest::Approx(0.5 * (4.0 + 25.0)));
}

TEST_CASE("parse errors carry position information") {
  auto vars = default_var_names(2);
  CHECK_THROWS_AS(parse_polynomial("x1 + ", vars), ParseError);
  CHECK_THROWS_AS(parse_polynomial("x3", vars), ParseError);
  CHECK_THROWS_AS(parse_polynomial("x1 ^ -2", vars), ParseError);
  CHECK_THROWS_AS(parse_polynomial("(x1 + x2", vars), ParseError);
  try {
    parse_polynomial("x1 + %", vars, 7);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line == 7);
    CHECK(e.column > 0);
  }
}

TEST_CASE("derivatives are exact") {
  auto vars = default_var_names(3);
  Polynomial p = parse_polynomial("x1^3*x2 - 2*x2^2*x3 + 4*x1", vars);
  Polynomial d1 = p.derivative(0);
  Polynomial d2 = p.derivative(1);
  Polynomial d3 = p.derivative(2);
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int i = 0; i < 20; ++i) {
    Eigen::VectorXd x = vec3(u(rng), u(rng), u(rng));
    CHECK(d1.eval(x) == doctest::Approx(3 * x[0] * x[0] * x[1] + 4).epsilon(1e-12));
    CHECK(d2.eval(x) == doctest::Approx(x[0] * x[0] * x[0] - 4 * x[1] * x[2]).epsilon(1e-12));
    CHECK(d3.eval(x) == doctest::Approx(-2 * x[1] * x[1]).epsilon(1e-12));
  }
}

TEST_CASE("pow and arithmetic agree with pointwise evaluation") {
  auto vars = default_var_names(2);
  Polynomial a = parse_polynomial("x1 + x2", vars);
  Polynomial b = parse_polynomial("x1 - x2", vars);
  Polynomial prod = a * b;
  Polynomial cube = a.pow(3);
  std::mt19937 rng(12);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int i = 0; i < 20; ++i) {
    Eigen::VectorXd x(2);
    x << u(rng), u(rng);
    const double s = x[0] + x[1], d = x[0] - x[1];
    CHECK(prod.eval(x) == doctest::Approx(s * d).epsilon(1e-12));
    CHECK(cube.eval(x) == doctest::Approx(s * s * s).epsilon(1e-12));
  }
}

TEST_CASE("to_string output reparses to the same polynomial") {
  auto vars = default_var_names(3);
  std::mt19937 rng(13);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::uniform_int_distribution<int> e(0, 2);
  for (int trial = 0; trial < 10; ++trial) {
    Polynomial p(3);
    for (int t = 0; t < 5; ++t)
      p.add_term({e(rng), e(rng), e(rng)}, u(rng));
    Polynomial q = parse_polynomial(p.to_string(vars), vars);
    for (int i = 0; i < 10; ++i) {
      Eigen::VectorXd x = vec3(u(rng), u(rng), u(rng));
      CHECK(q.eval(x) == doctest::Approx(p.eval(x)).epsilon(1e-12));
    }
  }
}

TEST_CASE("zero polynomial renders and evaluates as zero") {
  Polynomial z(2);
  CHECK(z.is_zero());
  Eigen::VectorXd x(2);
  x << 1.0, 2.0;
  CHECK(z.eval(x) == 0.0);
  auto vars = default_var_names(2);
  Polynomial q = parse_polynomial(z.to_string(vars), vars);
  CHECK(q.is_zero());
}
