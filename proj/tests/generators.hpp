#pragma once

// Hand-rolled random generators for property tests. All generators are
// seeded explicitly so failures reproduce.

#include "jsm/expr.hpp"

#include <random>
#include <string>
#include <vector>

namespace jsm::testgen {

class ExprGen {
 public:
  ExprGen(std::uint64_t seed, std::vector<std::string> vars) : rng_(seed), vars_(std::move(vars)) {}

  // Smooth on all of R^n: quotients divide by 1 + q^2, logs take 2 + sin(q).
  Expression smooth(int depth) {
    if (depth <= 0 || pick(4) == 0) return leaf();
    switch (pick(8)) {
      case 0: return smooth(depth - 1) + smooth(depth - 1);
      case 1: return smooth(depth - 1) * smooth(depth - 1);
      case 2: return smooth(depth - 1) - smooth(depth - 1);
      case 3: return sin(smooth(depth - 1));
      case 4: return cos(smooth(depth - 1));
      case 5: return pow(smooth(depth - 1), 2 + pick(2));
      case 6: {
        Expression q = smooth(depth - 1);
        return smooth(depth - 1) / (Expression(1) + q * q);
      }
      default: return log(Expression(2) + sin(smooth(depth - 1)));
    }
  }

  // Polynomial with small integer coefficients, total degree <= max_degree.
  Expression polynomial(int terms, int max_degree) {
    Expression acc(0);
    for (int t = 0; t < terms; ++t) {
      Expression mono(pick(7) - 3);
      int deg = pick(max_degree + 1);
      for (int d = 0; d < deg; ++d) mono = mono * var(vars_[pick(vars_.size())]);
      acc = acc + mono;
    }
    return acc;
  }

  Expression leaf() {
    if (pick(3) == 0) return Expression::rational(pick(9) - 4, 1 + pick(3));
    return var(vars_[pick(vars_.size())]);
  }

  int pick(std::size_t n) { return static_cast<int>(std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_)); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }

 private:
  std::mt19937_64 rng_;
  std::vector<std::string> vars_;
};

}  // namespace jsm::testgen
