#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace jsm {

using Rational = boost::multiprecision::cpp_rational;
using SamplePoint = std::map<std::string, double>;

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t position, const std::string& message);
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

class UndeclaredVariable : public ParseError {
 public:
  UndeclaredVariable(std::size_t position, std::string name);
  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

// Raised on log of a non-positive value or a denominator below 1e-12 in magnitude.
class EvaluationError : public std::runtime_error {
 public:
  EvaluationError(const std::string& what, SamplePoint point);
  const SamplePoint& point() const { return point_; }

 private:
  SamplePoint point_;
};

struct Node;

class Expression {
 public:
  // Negation is carried as the coefficient -1 of a Prod node.
  enum class Kind { Const, Pi, Var, Sum, Prod, Pow, Quot, Sin, Cos, Exp, Log };

  Expression();  // the constant 0
  Expression(int value);
  Expression(long long value);
  explicit Expression(const Rational& value);

  static Expression rational(long long num, long long den);
  static Expression variable(const std::string& name);
  static Expression pi();

  Kind kind() const;
  const Rational& value() const;      // Const only
  const std::string& name() const;    // Var only
  int exponent() const;               // Pow only
  const std::vector<Expression>& args() const;

  bool is_constant() const { return kind() == Kind::Const; }
  bool is_literal_zero() const;
  bool is_literal_one() const;
  std::uint64_t hash() const;
  std::size_t size() const;

  std::set<std::string> free_variables() const;
  bool depends_on(const std::string& var) const;

  double evaluate(const SamplePoint& point) const;
  std::string to_string() const;

  // Total structural order; equal() is structural identity.
  static int compare(const Expression& a, const Expression& b);
  bool equal(const Expression& other) const { return compare(*this, other) == 0; }

  static Expression make_sum(std::vector<Expression> terms);
  static Expression make_product(std::vector<Expression> factors);
  static Expression make_power(const Expression& base, int exponent);
  static Expression make_quotient(const Expression& num, const Expression& den);
  static Expression make_unary(Kind kind, const Expression& arg);

 private:
  explicit Expression(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  std::shared_ptr<const Node> node_;
  friend struct NodeFactory;
};

Expression operator+(const Expression& a, const Expression& b);
Expression operator-(const Expression& a, const Expression& b);
Expression operator*(const Expression& a, const Expression& b);
Expression operator/(const Expression& a, const Expression& b);
Expression operator-(const Expression& a);
Expression& operator+=(Expression& a, const Expression& b);
Expression& operator-=(Expression& a, const Expression& b);
Expression& operator*=(Expression& a, const Expression& b);

Expression pow(const Expression& base, int exponent);
Expression sin(const Expression& e);
Expression cos(const Expression& e);
Expression exp(const Expression& e);
Expression log(const Expression& e);

Expression var(const std::string& name);

Expression parse(std::string_view text, const std::set<std::string>& allowed_vars);
Expression differentiate(const Expression& e, const std::string& v);
Expression substitute(const Expression& e, const std::map<std::string, Expression>& bindings);
Expression normalize(const Expression& e);

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
};
using Box = std::map<std::string, Interval>;

inline constexpr std::uint64_t kDefaultSeed = 0x1AC0B1;

struct ZeroTestOptions {
  int trials = 64;
  double tol = 1e-9;
  std::uint64_t seed = kDefaultSeed;
};

struct ZeroTestResult {
  bool zero = true;
  double max_abs = 0.0;
  SamplePoint witness;  // point of largest |e|
  double witness_value = 0.0;
};

// Quasi-random points in the box: Halton with a seed-derived rotation, pure in (seed, index).
std::vector<SamplePoint> sample_points(const Box& box, int trials, std::uint64_t seed);

// Also raises EvaluationError when a denominator takes both signs over the samples,
// i.e. when the box contains part of the singular locus.
ZeroTestResult zero_test(const Expression& e, const Box& box, const ZeroTestOptions& opts = {});
bool is_zero(const Expression& e, const Box& box, const ZeroTestOptions& opts = {});

}  // namespace jsm
