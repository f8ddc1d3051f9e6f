#include <doctest.h>

#include <array>
#include <cmath>
#include <vector>

#include "magtomo/expr.hpp"

using namespace magtomo;

TEST_SUITE_BEGIN("expr");

TEST_CASE("parse and evaluate basic expressions") {
  auto e = parse_expression("0.1*x + y^2 - sin(x*y)");
  double x = 0.3, y = -0.7;
  double expected = 0.1 * x + y * y - std::sin(x * y);
  CHECK(eval_real(e, x, y) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("complex constants and functions") {
  auto e = parse_expression("exp(i*(1-x^2-y^2)^2)");
  Complex v = eval_expr(e, 0.2, 0.1);
  double g = (1 - 0.04 - 0.01) * (1 - 0.04 - 0.01);
  CHECK(std::abs(v - std::exp(Complex(0, g))) < 1e-14);
  CHECK(std::abs(std::abs(v) - 1.0) < 1e-14);
}

TEST_CASE("derivatives match central finite differences") {
  const char* cases[] = {
      "log(2/(1+x^2+y^2))", "0.1*x", "exp(0.3*x)*sin(2*y)", "x^3*y - y^2/(2+x)",
      "sqrt(1+x^2)", "tan(0.3*x+0.1*y)", "conj_free", // placeholder replaced below
  };
  const double h = 1e-5;
  for (const char* text : cases) {
    std::string s = text;
    if (s == "conj_free") s = "(1-x^2-y^2)^2*cos(x)";
    auto e = parse_expression(s);
    auto ex = diff(e, 0);
    auto ey = diff(e, 1);
    for (auto pt : std::vector<std::array<double, 2>>{{0.3, -0.2}, {0.0, 0.5}, {-0.4, -0.4}}) {
      double x = pt[0], y = pt[1];
      double fdx = (eval_real(e, x + h, y) - eval_real(e, x - h, y)) / (2 * h);
      double fdy = (eval_real(e, x, y + h) - eval_real(e, x, y - h)) / (2 * h);
      CHECK(eval_real(ex, x, y) == doctest::Approx(fdx).epsilon(1e-8));
      CHECK(eval_real(ey, x, y) == doctest::Approx(fdy).epsilon(1e-8));
    }
  }
}

TEST_CASE("second derivatives are exact for polynomials") {
  auto e = parse_expression("x^2*y + 3*y^2");
  auto exx = diff(diff(e, 0), 0);
  auto exy = diff(diff(e, 0), 1);
  auto eyy = diff(diff(e, 1), 1);
  CHECK(eval_real(exx, 0.7, -0.2) == doctest::Approx(2 * -0.2));
  CHECK(eval_real(exy, 0.7, -0.2) == doctest::Approx(2 * 0.7));
  CHECK(eval_real(eyy, 0.7, -0.2) == doctest::Approx(6.0));
}

TEST_CASE("conjugation differentiates through") {
  auto e = conj_expr(parse_expression("exp(i*x*y)"));
  auto ex = diff(e, 0);
  double x = 0.4, y = 0.6, h = 1e-6;
  Complex fd = (eval_expr(e, x + h, y) - eval_expr(e, x - h, y)) / (2 * h);
  CHECK(std::abs(eval_expr(ex, x, y) - fd) < 1e-8);
}

TEST_CASE("parse errors carry a position") {
  CHECK_THROWS_AS(parse_expression("0.1*x + "), ExprParseError);
  CHECK_THROWS_AS(parse_expression("sin(x"), ExprParseError);
  CHECK_THROWS_AS(parse_expression("x + z"), ExprParseError);
  CHECK_THROWS_AS(parse_expression("frob(x)"), ExprParseError);
  try {
    parse_expression("x + z");
  } catch (const ExprParseError& err) {
    CHECK(err.position == 4);
  }
}

TEST_CASE("tape evaluation agrees with tree evaluation") {
  auto e1 = parse_expression("exp(0.2*x)*(1-x^2-y^2)^2");
  auto e2 = diff(e1, 0);
  auto tape = ExprTape::compile({e1, e2});
  EvalScratch scratch;
  Complex out[2];
  for (double x : {-0.5, 0.0, 0.8}) {
    for (double y : {-0.3, 0.6}) {
      tape.eval(x, y, out, scratch);
      CHECK(std::abs(out[0] - eval_expr(e1, x, y)) < 1e-15);
      CHECK(std::abs(out[1] - eval_expr(e2, x, y)) < 1e-15);
    }
  }
}

TEST_CASE("integer powers at the origin of log") {
  // (1-x^2-y^2)^2 must evaluate to exactly zero on the boundary circle.
  auto e = parse_expression("(1-x^2-y^2)^2");
  CHECK(eval_real(e, 1.0, 0.0) == 0.0);
  CHECK(eval_real(e, 0.0, -1.0) == 0.0);
}

TEST_SUITE_END();
