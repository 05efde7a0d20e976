#include "jsm/geometry.hpp"

#include <algorithm>
#include <sstream>

namespace jsm {

namespace {

void require_same_coords(const Chart& a, const Chart& b, const char* op) {
  if (a.names() != b.names()) throw ChartMismatch(std::string(op) + ": tensors live on different charts");
}

// Sign of moving the removed element at position m of a p-tuple to the right end.
int right_removal_sign(std::size_t p, std::size_t m) { return ((p - 1 - m) % 2 == 0) ? 1 : -1; }

std::string fresh_name(const Chart& chart, std::string base) {
  while (chart.contains(base)) base += "_";
  return base;
}

}  // namespace

Chart::Chart(std::vector<std::string> names, std::vector<Interval> intervals, std::vector<int> weights)
    : names_(std::move(names)), intervals_(std::move(intervals)), weights_(std::move(weights)) {
  if (intervals_.size() != names_.size()) throw std::invalid_argument("chart: one interval per coordinate required");
  if (!weights_.empty() && weights_.size() != names_.size())
    throw std::invalid_argument("chart: weights must be absent or one per coordinate");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i].empty()) throw std::invalid_argument("chart: empty coordinate name");
    if (!seen.insert(names_[i]).second) throw std::invalid_argument("chart: duplicate coordinate '" + names_[i] + "'");
    if (!(intervals_[i].lo < intervals_[i].hi))
      throw std::invalid_argument("chart: empty interval for '" + names_[i] + "'");
    if (!weights_.empty() && weights_[i] != 0 && intervals_[i].lo <= 0 && intervals_[i].hi >= 0)
      throw std::invalid_argument("chart: weighted coordinate '" + names_[i] + "' must have an interval excluding 0");
  }
}

int Chart::index(const std::string& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw std::invalid_argument("chart: no coordinate named '" + name + "'");
  return static_cast<int>(it - names_.begin());
}

bool Chart::contains(const std::string& name) const {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

Box Chart::box() const {
  Box b;
  for (std::size_t i = 0; i < names_.size(); ++i) b[names_[i]] = intervals_[i];
  return b;
}

std::set<std::string> Chart::name_set() const { return {names_.begin(), names_.end()}; }

Chart Chart::with_weights(std::vector<int> weights) const { return Chart(names_, intervals_, std::move(weights)); }

Chart Chart::with_interval(const std::string& name, Interval iv) const {
  auto ivs = intervals_;
  ivs[index(name)] = iv;
  return Chart(names_, ivs, weights_);
}

bool Chart::operator==(const Chart& o) const {
  if (names_ != o.names_ || weights_ != o.weights_) return false;
  for (std::size_t i = 0; i < intervals_.size(); ++i)
    if (intervals_[i].lo != o.intervals_[i].lo || intervals_[i].hi != o.intervals_[i].hi) return false;
  return true;
}

Chart tangent_chart(const Chart& base, const std::string& suffix, Interval velocity) {
  auto names = base.names();
  auto ivs = base.intervals();
  for (std::size_t i = 0; i < base.dim(); ++i) {
    names.push_back(base.name(i) + suffix);
    ivs.push_back(velocity);
  }
  return Chart(names, ivs);
}

Chart cotangent_chart(const Chart& base, const std::string& prefix, Interval momentum) {
  auto names = base.names();
  auto ivs = base.intervals();
  for (std::size_t i = 0; i < base.dim(); ++i) {
    names.push_back(prefix + base.name(i));
    ivs.push_back(momentum);
  }
  return Chart(names, ivs);
}

int sort_with_sign(IndexTuple& idx) {
  int sign = 1;
  // insertion sort; tuples are short
  for (std::size_t i = 1; i < idx.size(); ++i) {
    for (std::size_t j = i; j > 0 && idx[j - 1] >= idx[j]; --j) {
      if (idx[j - 1] == idx[j]) return 0;
      std::swap(idx[j - 1], idx[j]);
      sign = -sign;
    }
  }
  return sign;
}

template <Variance V>
AlternatingTensor<V>::AlternatingTensor(Chart chart, int degree) : chart_(std::move(chart)), degree_(degree) {
  // degree above dim is allowed and always empty
  if (degree < 0) throw std::invalid_argument("tensor degree must be nonnegative");
}

template <Variance V>
AlternatingTensor<V> AlternatingTensor<V>::scalar(const Chart& chart, const Expression& f) {
  AlternatingTensor t(chart, 0);
  t.add({}, f);
  return t;
}

template <Variance V>
AlternatingTensor<V> AlternatingTensor<V>::basis(const Chart& chart, IndexTuple idx, const Expression& coef) {
  AlternatingTensor t(chart, static_cast<int>(idx.size()));
  t.add(std::move(idx), coef);
  return t;
}

template <Variance V>
AlternatingTensor<V> AlternatingTensor<V>::basis(const Chart& chart, const std::vector<std::string>& names,
                                                 const Expression& coef) {
  IndexTuple idx;
  for (const auto& n : names) idx.push_back(chart.index(n));
  return basis(chart, idx, coef);
}

template <Variance V>
Expression AlternatingTensor<V>::get(IndexTuple idx) const {
  if (static_cast<int>(idx.size()) != degree_) throw std::invalid_argument("tensor get: wrong number of indices");
  int sign = sort_with_sign(idx);
  if (sign == 0) return Expression(0);
  auto it = comps_.find(idx);
  if (it == comps_.end()) return Expression(0);
  return sign > 0 ? it->second : -it->second;
}

template <Variance V>
Expression AlternatingTensor<V>::get(const std::vector<std::string>& names) const {
  IndexTuple idx;
  for (const auto& n : names) idx.push_back(chart_.index(n));
  return get(idx);
}

template <Variance V>
void AlternatingTensor<V>::set(IndexTuple idx, const Expression& value) {
  if (static_cast<int>(idx.size()) != degree_) throw std::invalid_argument("tensor set: wrong number of indices");
  for (int i : idx)
    if (i < 0 || i >= static_cast<int>(chart_.dim())) throw std::out_of_range("tensor set: index out of range");
  int sign = sort_with_sign(idx);
  if (sign == 0) {
    if (!value.is_literal_zero()) throw std::invalid_argument("tensor set: repeated index needs a zero value");
    return;
  }
  Expression v = sign > 0 ? value : -value;
  if (v.is_literal_zero())
    comps_.erase(idx);
  else
    comps_[idx] = v;
}

template <Variance V>
void AlternatingTensor<V>::add(IndexTuple idx, const Expression& value) {
  if (static_cast<int>(idx.size()) != degree_) throw std::invalid_argument("tensor add: wrong number of indices");
  for (int i : idx)
    if (i < 0 || i >= static_cast<int>(chart_.dim())) throw std::out_of_range("tensor add: index out of range");
  int sign = sort_with_sign(idx);
  if (sign == 0 || value.is_literal_zero()) return;
  Expression v = sign > 0 ? value : -value;
  auto it = comps_.find(idx);
  if (it == comps_.end()) {
    comps_.emplace(idx, v);
    return;
  }
  it->second = it->second + v;
  if (it->second.is_literal_zero()) comps_.erase(it);
}

template <Variance V>
AlternatingTensor<V> AlternatingTensor<V>::operator+(const AlternatingTensor& o) const {
  require_same_coords(chart_, o.chart_, "tensor +");
  if (degree_ != o.degree_) throw std::invalid_argument("tensor +: degree mismatch");
  AlternatingTensor out = *this;
  for (const auto& [k, v] : o.comps_) out.add(k, v);
  return out;
}

template <Variance V>
AlternatingTensor<V> AlternatingTensor<V>::operator-(const AlternatingTensor& o) const {
  return *this + (-o);
}

template <Variance V>
AlternatingTensor<V> AlternatingTensor<V>::operator-() const {
  return map([](const Expression& e) { return -e; });
}

template <Variance V>
AlternatingTensor<V> AlternatingTensor<V>::operator*(const Expression& f) const {
  return map([&](const Expression& e) { return e * f; });
}

template <Variance V>
AlternatingTensor<V> AlternatingTensor<V>::embed(const Chart& larger) const {
  AlternatingTensor out(larger, degree_);
  for (const auto& [k, v] : comps_) {
    IndexTuple idx;
    for (int i : k) idx.push_back(larger.index(chart_.name(i)));
    out.add(idx, v);
  }
  return out;
}

template <Variance V>
std::string AlternatingTensor<V>::to_string() const {
  if (comps_.empty()) return "0";
  std::ostringstream os;
  bool first = true;
  for (const auto& [k, v] : comps_) {
    if (!first) os << " + ";
    first = false;
    os << "(" << v.to_string() << ")";
    for (std::size_t m = 0; m < k.size(); ++m) {
      os << (m == 0 ? "*" : "^");
      os << (V == Variance::Covariant ? "d" : "D") << chart_.name(k[m]);
    }
  }
  return os.str();
}

template class AlternatingTensor<Variance::Contravariant>;
template class AlternatingTensor<Variance::Covariant>;

SmoothMap::SmoothMap(Chart src, Chart tgt, std::vector<Expression> comps)
    : source(std::move(src)), target(std::move(tgt)), components(std::move(comps)) {
  if (components.size() != target.dim()) throw std::invalid_argument("smooth map: one component per target coordinate");
  auto allowed = source.name_set();
  for (std::size_t i = 0; i < components.size(); ++i)
    for (const auto& v : components[i].free_variables())
      if (!allowed.count(v))
        throw std::invalid_argument("smooth map: component '" + target.name(i) + "' uses non-source variable '" + v +
                                    "'");
}

std::map<std::string, Expression> SmoothMap::bindings() const {
  std::map<std::string, Expression> b;
  for (std::size_t i = 0; i < components.size(); ++i) b[target.name(i)] = components[i];
  return b;
}

SmoothMap compose(const SmoothMap& outer, const SmoothMap& inner) {
  require_same_coords(outer.source, inner.target, "compose");
  std::vector<Expression> comps;
  for (const auto& c : outer.components) comps.push_back(inner.pull(c));
  return SmoothMap(inner.source, outer.target, comps);
}

SmoothMap identity_map(const Chart& chart) {
  std::vector<Expression> comps;
  for (std::size_t i = 0; i < chart.dim(); ++i) comps.push_back(chart.coordinate(i));
  return SmoothMap(chart, chart, comps);
}

template <Variance V>
AlternatingTensor<V> wedge(const AlternatingTensor<V>& a, const AlternatingTensor<V>& b) {
  require_same_coords(a.chart(), b.chart(), "wedge");
  int deg = a.degree() + b.degree();
  AlternatingTensor<V> out(a.chart(), deg);
  for (const auto& [ka, va] : a.components())
    for (const auto& [kb, vb] : b.components()) {
      IndexTuple idx = ka;
      idx.insert(idx.end(), kb.begin(), kb.end());
      out.add(idx, va * vb);
    }
  return out;
}

template MultivectorField wedge(const MultivectorField&, const MultivectorField&);
template DifferentialForm wedge(const DifferentialForm&, const DifferentialForm&);

namespace {

// P with theta_i removed from the right: P <-d/dtheta_i.
MultivectorField right_theta_derivative(const MultivectorField& p, int i) {
  MultivectorField out(p.chart(), p.degree() - 1);
  for (const auto& [k, v] : p.components()) {
    auto it = std::find(k.begin(), k.end(), i);
    if (it == k.end()) continue;
    std::size_t m = static_cast<std::size_t>(it - k.begin());
    IndexTuple rest = k;
    rest.erase(rest.begin() + static_cast<long>(m));
    out.add(rest, right_removal_sign(k.size(), m) > 0 ? v : -v);
  }
  return out;
}

MultivectorField partial(const MultivectorField& p, const std::string& x) {
  return p.map([&](const Expression& e) { return differentiate(e, x); });
}

}  // namespace

MultivectorField schouten(const MultivectorField& p, const MultivectorField& q) {
  require_same_coords(p.chart(), q.chart(), "schouten");
  int dp = p.degree(), dq = q.degree();
  if (dp == 0 && dq == 0) throw std::invalid_argument("schouten: bracket of two functions has degree -1");
  int deg = dp + dq - 1;
  const Chart& c = p.chart();
  MultivectorField out(c, deg);
  int sign = ((dp - 1) * (dq - 1)) % 2 == 0 ? 1 : -1;
  for (std::size_t i = 0; i < c.dim(); ++i) {
    const std::string& x = c.name(i);
    if (dp > 0) out = out + wedge(right_theta_derivative(p, static_cast<int>(i)), partial(q, x));
    if (dq > 0) {
      auto term = wedge(right_theta_derivative(q, static_cast<int>(i)), partial(p, x));
      out = sign > 0 ? out - term : out + term;
    }
  }
  return out;
}

namespace {

Expression determinant(std::vector<std::vector<Expression>> m) {
  std::size_t n = m.size();
  if (n == 0) return Expression(1);
  if (n == 1) return m[0][0];
  if (n == 2) return m[0][0] * m[1][1] - m[0][1] * m[1][0];
  Expression acc(0);
  for (std::size_t col = 0; col < n; ++col) {
    if (m[0][col].is_literal_zero()) continue;
    std::vector<std::vector<Expression>> minor;
    for (std::size_t r = 1; r < n; ++r) {
      std::vector<Expression> row;
      for (std::size_t k = 0; k < n; ++k)
        if (k != col) row.push_back(m[r][k]);
      minor.push_back(row);
    }
    Expression t = m[0][col] * determinant(minor);
    acc = (col % 2 == 0) ? acc + t : acc - t;
  }
  return acc;
}

}  // namespace

Expression contract(const MultivectorField& p, const std::vector<Expression>& fs) {
  if (static_cast<int>(fs.size()) != p.degree()) throw std::invalid_argument("contract: need one function per slot");
  const Chart& c = p.chart();
  std::vector<std::vector<Expression>> grads(fs.size());
  for (std::size_t b = 0; b < fs.size(); ++b)
    for (std::size_t i = 0; i < c.dim(); ++i) grads[b].push_back(differentiate(fs[b], c.name(i)));
  Expression acc(0);
  for (const auto& [k, v] : p.components()) {
    std::vector<std::vector<Expression>> m(k.size());
    for (std::size_t a = 0; a < k.size(); ++a)
      for (std::size_t b = 0; b < fs.size(); ++b) m[a].push_back(grads[b][static_cast<std::size_t>(k[a])]);
    acc = acc + v * determinant(m);
  }
  return acc;
}

Expression apply(const MultivectorField& x, const Expression& f) {
  if (x.degree() != 1) throw std::invalid_argument("apply: need a vector field");
  return contract(x, {f});
}

MultivectorField sharp(const MultivectorField& p, const DifferentialForm& alpha) {
  require_same_coords(p.chart(), alpha.chart(), "sharp");
  if (p.degree() != 2 || alpha.degree() != 1) throw std::invalid_argument("sharp: need a bivector and a 1-form");
  MultivectorField out(p.chart(), 1);
  for (const auto& [ka, a] : alpha.components())
    for (std::size_t j = 0; j < p.chart().dim(); ++j) {
      Expression pk = p.get({ka[0], static_cast<int>(j)});
      if (!pk.is_literal_zero()) out.add({static_cast<int>(j)}, a * pk);
    }
  return out;
}

Expression pairing(const DifferentialForm& a, const MultivectorField& p) {
  require_same_coords(a.chart(), p.chart(), "pairing");
  if (a.degree() != p.degree()) throw std::invalid_argument("pairing: degree mismatch");
  Expression acc(0);
  for (const auto& [k, v] : a.components()) {
    auto it = p.components().find(k);
    if (it != p.components().end()) acc = acc + v * it->second;
  }
  return acc;
}

DifferentialForm de_rham(const DifferentialForm& a) {
  const Chart& c = a.chart();
  DifferentialForm out(c, a.degree() + 1);
  for (const auto& [k, v] : a.components())
    for (std::size_t i = 0; i < c.dim(); ++i) {
      if (std::find(k.begin(), k.end(), static_cast<int>(i)) != k.end()) continue;
      IndexTuple idx{static_cast<int>(i)};
      idx.insert(idx.end(), k.begin(), k.end());
      out.add(idx, differentiate(v, c.name(i)));
    }
  return out;
}

DifferentialForm differential(const Chart& chart, const Expression& f) {
  return de_rham(DifferentialForm::scalar(chart, f));
}

DifferentialForm interior(const MultivectorField& x, const DifferentialForm& a) {
  require_same_coords(x.chart(), a.chart(), "interior");
  if (x.degree() != 1) throw std::invalid_argument("interior: need a vector field");
  if (a.degree() == 0) return DifferentialForm(a.chart(), 0);
  DifferentialForm out(a.chart(), a.degree() - 1);
  for (const auto& [k, v] : a.components())
    for (std::size_t m = 0; m < k.size(); ++m) {
      Expression xm = x.get({k[m]});
      if (xm.is_literal_zero()) continue;
      IndexTuple rest = k;
      rest.erase(rest.begin() + static_cast<long>(m));
      out.add(rest, (m % 2 == 0) ? xm * v : -(xm * v));
    }
  return out;
}

DifferentialForm lie_derivative(const MultivectorField& x, const DifferentialForm& a) {
  DifferentialForm id = interior(x, de_rham(a));
  return a.degree() == 0 ? id : id + de_rham(interior(x, a));
}

DifferentialForm pullback(const DifferentialForm& a, const SmoothMap& f) {
  require_same_coords(a.chart(), f.target, "pullback");
  std::vector<DifferentialForm> dfs;
  for (const auto& comp : f.components) dfs.push_back(differential(f.source, comp));
  DifferentialForm out(f.source, a.degree());
  auto b = f.bindings();
  for (const auto& [k, v] : a.components()) {
    DifferentialForm term = DifferentialForm::scalar(f.source, substitute(v, b));
    for (int i : k) term = wedge(term, dfs[static_cast<std::size_t>(i)]);
    out = out + term;
  }
  return out;
}

MultivectorField tangent_lift(const MultivectorField& p, const std::string& suffix) {
  const Chart& base = p.chart();
  Chart tc = tangent_chart(base, suffix);
  int n = static_cast<int>(base.dim());
  MultivectorField out(tc, p.degree());
  for (const auto& [k, v] : p.components()) {
    Expression dv(0);
    for (int i = 0; i < n; ++i) dv = dv + tc.coordinate(static_cast<std::size_t>(n + i)) * differentiate(v, base.name(static_cast<std::size_t>(i)));
    IndexTuple dotted = k;
    for (int& i : dotted) i += n;
    out.add(dotted, dv);
    for (std::size_t m = 0; m < k.size(); ++m) {
      IndexTuple mixed = dotted;
      mixed[m] = k[m];
      out.add(mixed, v);
    }
  }
  return out;
}

template <Variance V>
AlternatingTensor<V> push_scale(const AlternatingTensor<V>& t, const std::string& nu, const std::vector<int>& weights) {
  const Chart& c = t.chart();
  const std::vector<int>& w = weights.empty() ? c.weights() : weights;
  if (w.empty()) throw std::invalid_argument("push_scale: chart has no weights and none were given");
  if (w.size() != c.dim()) throw std::invalid_argument("push_scale: one weight per coordinate required");
  if (c.contains(nu)) throw std::invalid_argument("push_scale: scaling parameter '" + nu + "' clashes with a coordinate");
  Expression n = var(nu);
  std::map<std::string, Expression> scaled;
  for (std::size_t i = 0; i < c.dim(); ++i)
    if (w[i] != 0) scaled[c.name(i)] = pow(n, w[i]) * c.coordinate(i);
  AlternatingTensor<V> out(c, t.degree());
  for (const auto& [k, v] : t.components()) {
    int total = 0;
    for (int i : k) total += w[static_cast<std::size_t>(i)];
    if (V == Variance::Contravariant) total = -total;
    out.add(k, pow(n, total) * substitute(v, scaled));
  }
  return out;
}

template MultivectorField push_scale(const MultivectorField&, const std::string&, const std::vector<int>&);
template DifferentialForm push_scale(const DifferentialForm&, const std::string&, const std::vector<int>&);

template <Variance V>
TensorZeroResult tensor_zero_test(const AlternatingTensor<V>& t, const Box& box, const ZeroTestOptions& opts) {
  TensorZeroResult res;
  for (const auto& [k, v] : t.components()) {
    ZeroTestResult r = zero_test(v, box, opts);
    if (!r.zero) res.zero = false;
    if (res.worst.empty() || r.max_abs > res.max_abs) {
      res.max_abs = r.max_abs;
      res.worst = k;
      res.witness = r.witness;
    }
  }
  return res;
}

template TensorZeroResult tensor_zero_test(const MultivectorField&, const Box&, const ZeroTestOptions&);
template TensorZeroResult tensor_zero_test(const DifferentialForm&, const Box&, const ZeroTestOptions&);

template <Variance V>
TensorZeroResult homogeneity_test(const AlternatingTensor<V>& t, int k, const std::vector<int>& weights,
                                  Interval nu_range, const ZeroTestOptions& opts) {
  std::string nu = fresh_name(t.chart(), "nu");
  auto diff = push_scale(t, nu, weights) - t * pow(var(nu), k);
  Box box = t.chart().box();
  box[nu] = nu_range;
  return tensor_zero_test(diff, box, opts);
}

template TensorZeroResult homogeneity_test(const MultivectorField&, int, const std::vector<int>&, Interval,
                                           const ZeroTestOptions&);
template TensorZeroResult homogeneity_test(const DifferentialForm&, int, const std::vector<int>&, Interval,
                                           const ZeroTestOptions&);

}  // namespace jsm
