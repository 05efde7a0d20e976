#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "generators.hpp"
#include "jsm/expr.hpp"

#include <cmath>

using namespace jsm;

namespace {

const std::set<std::string> kXYZ{"x", "y", "z"};
const Box kCube{{"x", {-1, 1}}, {"y", {-1, 1}}, {"z", {-1, 1}}};

double central_difference(const Expression& e, SamplePoint p, const std::string& v, double h) {
  SamplePoint a = p, b = p;
  a[v] += h;
  b[v] -= h;
  return (e.evaluate(a) - e.evaluate(b)) / (2 * h);
}

}  // namespace

TEST_CASE("parse builds the expected tree shapes") {
  Expression e = parse("cos(pi*x)", {"x"});
  CHECK(e.kind() == Expression::Kind::Cos);
  CHECK(e.args()[0].kind() == Expression::Kind::Prod);
  CHECK(parse("1/2", {}).value() == Rational(1, 2));
  CHECK(parse("0.25", {}).value() == Rational(1, 4));
  CHECK(parse("  x ^ 2 ", {"x"}).kind() == Expression::Kind::Pow);
  CHECK(parse("x^-2", {"x"}).exponent() == -2);
  CHECK(parse("-x + 2*-y", kXYZ).equal(-(var("x")) - 2 * var("y")));
}

TEST_CASE("parse reports undeclared variables and syntax errors with positions") {
  try {
    parse("1/(2*s)*L", {"s"});
    FAIL("expected an undeclared-variable error");
  } catch (const UndeclaredVariable& e) {
    CHECK(e.name() == "L");
    CHECK(e.position() == 8);
  }
  CHECK_THROWS_AS(parse("x +", kXYZ), ParseError);
  CHECK_THROWS_AS(parse("", kXYZ), ParseError);
  CHECK_THROWS_AS(parse("sin x", kXYZ), ParseError);
  CHECK_THROWS_AS(parse("(x", kXYZ), ParseError);
  CHECK_THROWS_AS(parse("x^y", kXYZ), ParseError);
  try {
    parse("x + * y", kXYZ);
    FAIL("expected a syntax error");
  } catch (const ParseError& e) {
    CHECK(e.position() == 4);
  }
}

TEST_CASE("evaluation matches an independent hand computation") {
  Expression e = parse("x^2 + sin(x)*y", {"x", "y"});
  double oracle = 2.0 * 2.0 + std::sin(2.0) * 3.0;
  CHECK(e.evaluate({{"x", 2}, {"y", 3}}) == doctest::Approx(oracle).epsilon(1e-15));
  CHECK(oracle == doctest::Approx(6.727892280477045).epsilon(1e-14));
}

TEST_CASE("differentiate: basic rules") {
  Expression x = var("x"), y = var("y");
  CHECK(differentiate(x * y, "x").equal(y));
  Expression dc = differentiate(cos(Expression::pi() * x), "x");
  CHECK(is_zero(dc + Expression::pi() * sin(Expression::pi() * x), kCube));
  CHECK(differentiate(sin(y), "x").is_literal_zero());
}

TEST_CASE("d/ds of 1/(2s) against finite differences") {
  Expression s = var("s");
  Expression d = differentiate(Expression(1) / (2 * s), "s");
  for (double sv : {0.7, 1.3}) {
    double fd = ((1.0 / (2 * (sv + 1e-6))) - (1.0 / (2 * (sv - 1e-6)))) / 2e-6;
    CHECK(std::abs(d.evaluate({{"s", sv}}) - fd) < 1e-6);
    CHECK(std::abs(d.evaluate({{"s", sv}}) + 1.0 / (2 * sv * sv)) < 1e-12);
  }
}

TEST_CASE("is_zero: identities, and singular boxes raise evaluation errors") {
  Expression x = var("x"), y = var("y"), s = var("s");
  CHECK(is_zero(pow(sin(x), 2) + pow(cos(x), 2) - 1, kCube));
  CHECK(is_zero(x * y - y * x, kCube));
  CHECK_FALSE(is_zero(x * y - y, kCube));
  Expression e = (Expression(1) / s) * s - 1;
  CHECK(is_zero(e, {{"s", {0.5, 2}}}));
  CHECK_THROWS_AS(zero_test(e, {{"s", {-1, 1}}}, {64, 1e-9, kDefaultSeed}), EvaluationError);
  CHECK_THROWS_AS(zero_test(log(x), {{"x", {-1, 1}}}), EvaluationError);
  CHECK_THROWS_AS(zero_test(x + y, {{"x", {0, 1}}}), std::invalid_argument);
}

TEST_CASE("zero_test is deterministic and reports the worst point") {
  Expression x = var("x");
  auto a = zero_test(x, {{"x", {0, 1}}});
  auto b = zero_test(x, {{"x", {0, 1}}});
  CHECK_FALSE(a.zero);
  CHECK(a.max_abs == b.max_abs);
  CHECK(a.witness == b.witness);
  CHECK(std::abs(a.witness.at("x") - a.max_abs) < 1e-15);
  auto c = zero_test(x, {{"x", {0, 1}}}, {64, 1e-9, 7});
  CHECK(c.witness != a.witness);
}

TEST_CASE("sample points cover the box and depend on the seed") {
  Box box{{"a", {-2, 3}}, {"b", {0.5, 2}}};
  auto pts = sample_points(box, 64, kDefaultSeed);
  REQUIRE(pts.size() == 64);
  double lo = 1e9, hi = -1e9;
  for (const auto& p : pts) {
    CHECK(p.at("a") >= -2);
    CHECK(p.at("a") <= 3);
    CHECK(p.at("b") >= 0.5);
    CHECK(p.at("b") <= 2);
    lo = std::min(lo, p.at("a"));
    hi = std::max(hi, p.at("a"));
  }
  CHECK(hi - lo > 4.5);
}

TEST_CASE("substitute is simultaneous and leaves unbound variables alone") {
  Expression x = var("x"), y = var("y"), u = var("u"), t = var("t");
  CHECK(substitute(x + y, {{"x", u * t}}).equal(u * t + y));
  Expression sw = substitute(x - 2 * y, {{"x", y}, {"y", x}});
  CHECK(sw.equal(y - 2 * x));
  Expression X = u * u + sin(t);
  Expression composed = substitute(cos(Expression::pi() * x), {{"x", X}});
  CHECK(composed.equal(cos(Expression::pi() * X)));
  Box ut{{"u", {-1, 1}}, {"t", {-1, 1}}};
  Expression chain = -Expression::pi() * sin(Expression::pi() * X) * differentiate(X, "u");
  CHECK(is_zero(differentiate(composed, "u") - chain, ut));
}

TEST_CASE("printing re-parses to the same normalized tree") {
  testgen::ExprGen gen(11, {"x", "y", "z"});
  for (int i = 0; i < 200; ++i) {
    Expression e = gen.smooth(4);
    Expression back = parse(e.to_string(), kXYZ);
    INFO(e.to_string());
    CHECK(normalize(back).equal(normalize(e)));
    CHECK(is_zero(back - e, kCube));
  }
  Expression q = parse("(1/2)*x/(y^2 + 1) - 3*sin(-z)", kXYZ);
  CHECK(parse(q.to_string(), kXYZ).equal(q));
}

TEST_CASE("normalize is idempotent") {
  testgen::ExprGen gen(5, {"x", "y", "z"});
  for (int i = 0; i < 200; ++i) {
    Expression n = normalize(gen.smooth(4));
    CHECK(normalize(n).equal(n));
  }
}

TEST_CASE("quotients are kept as first-class nodes") {
  Expression s = var("s");
  Expression e = (Expression(1) / s) * s;
  CHECK_FALSE(e.is_literal_one());
  CHECK(e.kind() == Expression::Kind::Prod);
  Expression p = pow(s, -1) * s;
  CHECK_FALSE(p.is_literal_one());
  CHECK((s * s).equal(pow(s, 2)));
  CHECK((Expression(3) / s + Expression(1) / s).equal(4 * (Expression(1) / s)));
}

TEST_CASE("property: product rule on 100 random pairs") {
  testgen::ExprGen gen(2024, {"x", "y", "z"});
  for (int i = 0; i < 100; ++i) {
    Expression a = gen.smooth(3), b = gen.smooth(3);
    std::string v = std::string(1, "xyz"[i % 3]);
    Expression lhs = differentiate(a * b, v);
    Expression rhs = a * differentiate(b, v) + b * differentiate(a, v);
    CHECK(is_zero(lhs - rhs, kCube));
  }
}

TEST_CASE("property: mixed partials commute") {
  testgen::ExprGen gen(77, {"x", "y", "z"});
  for (int i = 0; i < 100; ++i) {
    Expression e = gen.smooth(4);
    Expression dxy = differentiate(differentiate(e, "x"), "y");
    Expression dyx = differentiate(differentiate(e, "y"), "x");
    CHECK(is_zero(dxy - dyx, kCube));
  }
}

TEST_CASE("property: derivatives agree with central differences") {
  testgen::ExprGen gen(99, {"x", "y", "z"});
  auto pts = sample_points(kCube, 8, 3);
  for (int i = 0; i < 100; ++i) {
    Expression e = gen.smooth(3);
    for (const char* v : {"x", "y", "z"}) {
      Expression d = differentiate(e, v);
      for (const auto& p : pts) {
        double exact = d.evaluate(p);
        double fd = central_difference(e, p, v, 1e-5);
        CHECK(std::abs(exact - fd) <= 1e-5 * std::max(1.0, std::abs(exact)));
      }
    }
  }
}
