#pragma once

#include "jsm/expr.hpp"

#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace jsm {

class ChartMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class Chart {
 public:
  Chart() = default;
  Chart(std::vector<std::string> names, std::vector<Interval> intervals, std::vector<int> weights = {});

  std::size_t dim() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<Interval>& intervals() const { return intervals_; }
  const std::vector<int>& weights() const { return weights_; }
  bool has_weights() const { return !weights_.empty(); }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  int index(const std::string& name) const;  // throws if absent
  bool contains(const std::string& name) const;
  Expression coordinate(std::size_t i) const { return var(names_.at(i)); }
  Box box() const;
  std::set<std::string> name_set() const;

  Chart with_weights(std::vector<int> weights) const;
  Chart with_interval(const std::string& name, Interval iv) const;

  bool operator==(const Chart& other) const;
  bool operator!=(const Chart& other) const { return !(*this == other); }

 private:
  std::vector<std::string> names_;
  std::vector<Interval> intervals_;
  std::vector<int> weights_;
};

// Doubles a chart with velocity coordinates named <x><suffix>, in the given box.
Chart tangent_chart(const Chart& base, const std::string& suffix = "_dot", Interval velocity = {-1.0, 1.0});

// Base coordinates followed by fiber-linear momenta named <prefix><x>.
Chart cotangent_chart(const Chart& base, const std::string& prefix = "pi_", Interval momentum = {-1.0, 1.0});

using IndexTuple = std::vector<int>;

// Sorts in place; returns the permutation sign, or 0 on a repeated index.
int sort_with_sign(IndexTuple& idx);

enum class Variance { Contravariant, Covariant };

// Alternating tensor with coefficients stored on strictly increasing index tuples.
template <Variance V>
class AlternatingTensor {
 public:
  AlternatingTensor() = default;
  AlternatingTensor(Chart chart, int degree);

  static AlternatingTensor scalar(const Chart& chart, const Expression& f);
  // The wedge of basis elements in the order given, times coef.
  static AlternatingTensor basis(const Chart& chart, IndexTuple idx, const Expression& coef = Expression(1));
  static AlternatingTensor basis(const Chart& chart, const std::vector<std::string>& names,
                                 const Expression& coef = Expression(1));
  static AlternatingTensor basis(const Chart& chart, std::initializer_list<int> idx,
                                 const Expression& coef = Expression(1)) {
    return basis(chart, IndexTuple(idx), coef);
  }
  static AlternatingTensor basis(const Chart& chart, std::initializer_list<const char*> names,
                                 const Expression& coef = Expression(1)) {
    return basis(chart, std::vector<std::string>(names.begin(), names.end()), coef);
  }

  const Chart& chart() const { return chart_; }
  int degree() const { return degree_; }
  const std::map<IndexTuple, Expression>& components() const { return comps_; }

  Expression get(IndexTuple idx) const;
  // Brace-list overloads; a two-element list would otherwise match vector's iterator-pair constructor.
  Expression get(std::initializer_list<int> idx) const { return get(IndexTuple(idx)); }
  Expression get(std::initializer_list<const char*> names) const {
    return get(std::vector<std::string>(names.begin(), names.end()));
  }
  Expression get(const std::vector<std::string>& names) const;
  void set(IndexTuple idx, const Expression& value);
  void add(IndexTuple idx, const Expression& value);
  bool empty() const { return comps_.empty(); }

  template <class F>
  AlternatingTensor map(F&& f) const {
    AlternatingTensor out(chart_, degree_);
    for (const auto& [k, v] : comps_) out.add(k, f(v));
    return out;
  }

  AlternatingTensor operator+(const AlternatingTensor& o) const;
  AlternatingTensor operator-(const AlternatingTensor& o) const;
  AlternatingTensor operator-() const;
  AlternatingTensor operator*(const Expression& f) const;

  // Same components on another chart whose coordinate names include this one's.
  AlternatingTensor embed(const Chart& larger) const;

  std::string to_string() const;

 private:
  Chart chart_;
  int degree_ = 0;
  std::map<IndexTuple, Expression> comps_;
};

using MultivectorField = AlternatingTensor<Variance::Contravariant>;
using DifferentialForm = AlternatingTensor<Variance::Covariant>;

template <Variance V>
AlternatingTensor<V> operator*(const Expression& f, const AlternatingTensor<V>& t) {
  return t * f;
}

extern template class AlternatingTensor<Variance::Contravariant>;
extern template class AlternatingTensor<Variance::Covariant>;

struct SmoothMap {
  Chart source;
  Chart target;
  std::vector<Expression> components;  // one per target coordinate, in source variables

  SmoothMap() = default;
  SmoothMap(Chart source, Chart target, std::vector<Expression> components);
  // Target coordinate bindings as a substitution map.
  std::map<std::string, Expression> bindings() const;
  Expression pull(const Expression& f) const { return substitute(f, bindings()); }
};

SmoothMap compose(const SmoothMap& outer, const SmoothMap& inner);
SmoothMap identity_map(const Chart& chart);

template <Variance V>
AlternatingTensor<V> wedge(const AlternatingTensor<V>& a, const AlternatingTensor<V>& b);

// Coordinate Schouten-Nijenhuis bracket; normalized so that
// <[L,L], df^dg^dh> = 2 * Jacobiator(f,g,h) for a bivector L.
MultivectorField schouten(const MultivectorField& p, const MultivectorField& q);

// <P, df_1 ^ ... ^ df_p>.
Expression contract(const MultivectorField& p, const std::vector<Expression>& fs);
// X(f) for a vector field X.
Expression apply(const MultivectorField& x, const Expression& f);
// P^#(alpha) for a bivector, contracted in the first slot: (P^# alpha)^j = alpha_k P^{kj}.
MultivectorField sharp(const MultivectorField& p, const DifferentialForm& alpha);
// Full pairing of a p-form with a p-vector.
Expression pairing(const DifferentialForm& a, const MultivectorField& p);

DifferentialForm de_rham(const DifferentialForm& a);
DifferentialForm differential(const Chart& chart, const Expression& f);
DifferentialForm interior(const MultivectorField& x, const DifferentialForm& a);
DifferentialForm lie_derivative(const MultivectorField& x, const DifferentialForm& a);
DifferentialForm pullback(const DifferentialForm& a, const SmoothMap& f);

// Complete lift to tangent_chart(P.chart(), suffix).
MultivectorField tangent_lift(const MultivectorField& p, const std::string& suffix = "_dot");

// (h_nu)^* T with coordinate x scaled by nu^{w(x)}: a tensor is homogeneous of degree k
// when the result equals nu^k T. weights defaults to the chart's weights.
template <Variance V>
AlternatingTensor<V> push_scale(const AlternatingTensor<V>& t, const std::string& nu,
                                const std::vector<int>& weights = {});

struct TensorZeroResult {
  bool zero = true;
  double max_abs = 0.0;
  IndexTuple worst;
  SamplePoint witness;
};

template <Variance V>
TensorZeroResult tensor_zero_test(const AlternatingTensor<V>& t, const Box& box, const ZeroTestOptions& opts = {});

template <Variance V>
bool is_zero(const AlternatingTensor<V>& t, const Box& box, const ZeroTestOptions& opts = {}) {
  return tensor_zero_test(t, box, opts).zero;
}

template <Variance V>
bool is_zero(const AlternatingTensor<V>& t, const ZeroTestOptions& opts = {}) {
  return tensor_zero_test(t, t.chart().box(), opts).zero;
}

// push_scale(T) - nu^k T, zero-tested over the chart box extended by nu in nu_range.
template <Variance V>
TensorZeroResult homogeneity_test(const AlternatingTensor<V>& t, int k, const std::vector<int>& weights = {},
                                  Interval nu_range = {0.5, 2.0}, const ZeroTestOptions& opts = {});

}  // namespace jsm
