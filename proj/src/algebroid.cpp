#include "jsm/algebroid.hpp"

#include <cmath>
#include <set>

namespace jsm {

namespace {

Chart subchart(const Chart& c, const std::vector<std::size_t>& idx) {
  std::vector<std::string> names;
  std::vector<Interval> ivs;
  for (auto i : idx) {
    names.push_back(c.name(i));
    ivs.push_back(c.intervals()[i]);
  }
  return Chart(names, ivs);
}

Chart append_coordinate(const Chart& c, const std::string& name, Interval iv) {
  auto names = c.names();
  auto ivs = c.intervals();
  names.push_back(name);
  ivs.push_back(iv);
  return Chart(names, ivs);
}

void require_vars(const std::set<std::string>& allowed, const Expression& e, const std::string& what) {
  for (const auto& v : e.free_variables())
    if (!allowed.count(v)) throw std::invalid_argument(what + ": variable '" + v + "' is not a base coordinate");
}

Expression scale_factor(const Expression& nu, int w) {
  if (w == 0) return Expression(1);
  if (w == 1) return nu;
  return pow(nu, w);
}

std::string fresh_name(const std::set<std::string>& taken, std::string base) {
  while (taken.count(base)) base += "_";
  return base;
}

void track(MorphismReport& rep, const TensorZeroResult& r, const std::string& label) {
  if (r.zero) return;
  rep.ok = false;
  if (r.max_abs > rep.max_abs || rep.worst.empty()) {
    rep.max_abs = std::max(rep.max_abs, r.max_abs);
    rep.worst = label;
    rep.point = r.witness;
  }
}

}  // namespace

AlgebroidStructure::AlgebroidStructure(Chart base, Chart fiber, std::vector<std::vector<Expression>> anchor,
                                       std::vector<MultivectorField> c, std::optional<bool> lie)
    : base_(std::move(base)), fiber_(std::move(fiber)), anchor_(std::move(anchor)), structure_(std::move(c)),
      lie_(lie) {
  std::size_t n = fiber_.dim(), m = base_.dim();
  if (anchor_.size() != n) throw std::invalid_argument("algebroid: anchor needs one row per generator");
  for (const auto& row : anchor_)
    if (row.size() != m) throw std::invalid_argument("algebroid: anchor row has the wrong length");
  if (structure_.empty()) structure_.assign(n, MultivectorField(fiber_, 2));
  if (structure_.size() != n) throw std::invalid_argument("algebroid: need one structure bivector per generator");
  auto allowed = base_.name_set();
  for (const auto& row : anchor_)
    for (const auto& e : row) require_vars(allowed, e, "algebroid anchor");
  for (const auto& ck : structure_) {
    if (ck.degree() != 2 || ck.chart().names() != fiber_.names())
      throw ChartMismatch("algebroid: structure functions must be bivectors on the fiber chart");
    for (const auto& [idx, v] : ck.components()) require_vars(allowed, v, "algebroid structure function");
  }
}

Expression AlgebroidStructure::c(std::size_t k, std::size_t i, std::size_t j) const {
  if (i == j) return Expression(0);
  return structure_.at(k).get({static_cast<int>(i), static_cast<int>(j)});
}

Chart AlgebroidStructure::dual_chart() const {
  auto names = base_.names();
  auto ivs = base_.intervals();
  for (std::size_t i = 0; i < fiber_.dim(); ++i) {
    names.push_back(fiber_.name(i));
    ivs.push_back(fiber_.intervals()[i]);
  }
  return Chart(names, ivs);
}

AlgebroidStructure tangent_algebroid(const Chart& base) {
  std::size_t n = base.dim();
  std::vector<std::vector<Expression>> anchor(n, std::vector<Expression>(n, Expression(0)));
  for (std::size_t i = 0; i < n; ++i) anchor[i][i] = Expression(1);
  Chart plain(base.names(), base.intervals());
  return AlgebroidStructure(plain, plain, anchor, {}, true);
}

AlgebroidStructure from_linear_bivector(const MultivectorField& pi, const std::vector<std::string>& fiber) {
  if (pi.degree() != 2) throw std::invalid_argument("from_linear_bivector: expects a bivector");
  const Chart& c = pi.chart();
  std::set<std::string> fset(fiber.begin(), fiber.end());
  if (fset.size() != fiber.size()) throw std::invalid_argument("from_linear_bivector: repeated fiber coordinate");
  std::vector<std::size_t> bidx, fidx;
  for (const auto& f : fiber) fidx.push_back(static_cast<std::size_t>(c.index(f)));
  for (std::size_t i = 0; i < c.dim(); ++i)
    if (!fset.count(c.name(i))) bidx.push_back(i);
  Chart base = subchart(c, bidx), fch = subchart(c, fidx);
  Box box = c.box();
  std::map<std::string, Expression> at_zero;
  for (const auto& f : fiber) at_zero[f] = Expression(0);
  auto label = [&](std::size_t a, std::size_t b) { return "(" + c.name(a) + ", " + c.name(b) + ")"; };

  for (std::size_t a = 0; a < bidx.size(); ++a)
    for (std::size_t b = a + 1; b < bidx.size(); ++b)
      if (!is_zero(pi.get({static_cast<int>(bidx[a]), static_cast<int>(bidx[b])}), box))
        throw NonlinearBivector("from_linear_bivector: component " + label(bidx[a], bidx[b]) +
                                " between base coordinates must vanish");

  std::size_t n = fidx.size();
  std::vector<std::vector<Expression>> anchor(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a : bidx) {
      Expression raw = pi.get({static_cast<int>(fidx[i]), static_cast<int>(a)});
      Expression rho = normalize(substitute(raw, at_zero));
      if (!is_zero(raw - rho, box))
        throw NonlinearBivector("from_linear_bivector: component " + label(fidx[i], a) + " depends on the fiber");
      anchor[i].push_back(rho);
    }

  std::vector<MultivectorField> cs(n, MultivectorField(fch, 2));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      Expression raw = pi.get({static_cast<int>(fidx[i]), static_cast<int>(fidx[j])});
      Expression rebuilt(0);
      for (std::size_t k = 0; k < n; ++k) {
        Expression ck = normalize(substitute(differentiate(raw, fiber[k]), at_zero));
        if (ck.is_literal_zero()) continue;
        cs[k].add({static_cast<int>(i), static_cast<int>(j)}, ck);
        rebuilt = rebuilt + ck * var(fiber[k]);
      }
      if (!is_zero(raw - rebuilt, box))
        throw NonlinearBivector("from_linear_bivector: component " + label(fidx[i], fidx[j]) +
                                " is not linear in the fiber");
    }
  AlgebroidStructure out(base, fch, anchor, cs);
  return AlgebroidStructure(base, fch, anchor, cs, lie_check(out).is_lie);
}

MultivectorField rebuild_bivector(const AlgebroidStructure& a) {
  Chart dual = a.dual_chart();
  int m = static_cast<int>(a.base().dim());
  std::size_t n = a.rank();
  MultivectorField pi(dual, 2);
  for (std::size_t i = 0; i < n; ++i) {
    int xi = m + static_cast<int>(i);
    for (std::size_t b = 0; b < a.base().dim(); ++b) pi.add({xi, static_cast<int>(b)}, a.anchor(i, b));
    for (std::size_t j = i + 1; j < n; ++j) {
      Expression acc(0);
      for (std::size_t k = 0; k < n; ++k) {
        Expression ck = a.c(k, i, j);
        if (!ck.is_literal_zero()) acc = acc + ck * dual.coordinate(static_cast<std::size_t>(m) + k);
      }
      if (!acc.is_literal_zero()) pi.add({xi, m + static_cast<int>(j)}, acc);
    }
  }
  return pi;
}

AlgebroidStructure cotangent_algebroid(const MultivectorField& p, const std::string& suffix) {
  std::vector<std::string> fiber;
  for (const auto& n : p.chart().names()) fiber.push_back(n + suffix);
  return from_linear_bivector(tangent_lift(p, suffix), fiber);
}

namespace {

AlgebroidForm d_function(const AlgebroidStructure& a, const Expression& f) {
  AlgebroidForm out(a.fiber(), 1);
  for (std::size_t i = 0; i < a.rank(); ++i) {
    Expression acc(0);
    for (std::size_t b = 0; b < a.base().dim(); ++b) {
      const Expression& r = a.anchor(i, b);
      if (r.is_literal_zero()) continue;
      Expression df = differentiate(f, a.base().name(b));
      if (!df.is_literal_zero()) acc = acc + r * df;
    }
    if (!acc.is_literal_zero()) out.add({static_cast<int>(i)}, acc);
  }
  return out;
}

AlgebroidForm d_generator(const AlgebroidStructure& a, std::size_t k) {
  // 1/2 c^k_{ji} y^i ^ y^j summed over all (i, j) is c^k_{ji} on each i < j
  AlgebroidForm out(a.fiber(), 2);
  for (std::size_t i = 0; i < a.rank(); ++i)
    for (std::size_t j = i + 1; j < a.rank(); ++j) {
      Expression v = a.c(k, j, i);
      if (!v.is_literal_zero()) out.add({static_cast<int>(i), static_cast<int>(j)}, v);
    }
  return out;
}

}  // namespace

AlgebroidForm algebroid_d(const AlgebroidStructure& a, const AlgebroidForm& w) {
  if (w.chart().names() != a.fiber().names()) throw ChartMismatch("algebroid_d: form is not on the fiber chart");
  if (w.degree() > static_cast<int>(a.rank()))
    throw std::invalid_argument("algebroid_d: degree " + std::to_string(w.degree()) + " exceeds the rank " +
                                std::to_string(a.rank()));
  auto allowed = a.base().name_set();
  AlgebroidForm out(a.fiber(), w.degree() + 1);
  std::vector<AlgebroidForm> dgen;
  for (std::size_t k = 0; k < a.rank(); ++k) dgen.push_back(d_generator(a, k));
  for (const auto& [idx, f] : w.components()) {
    require_vars(allowed, f, "algebroid_d");
    AlgebroidForm mono = AlgebroidForm::basis(a.fiber(), idx);
    out = out + wedge(d_function(a, f), mono);
    // d(y^{i1} ^ ... ^ y^{ip}) = sum_r (-1)^r y^{i1} ^ ... ^ d y^{ir} ^ ... ^ y^{ip}
    for (std::size_t r = 0; r < idx.size(); ++r) {
      AlgebroidForm left = AlgebroidForm::scalar(a.fiber(), r % 2 == 0 ? f : -f);
      for (std::size_t q = 0; q < r; ++q) left = wedge(left, a.generator(static_cast<std::size_t>(idx[q])));
      left = wedge(left, dgen[static_cast<std::size_t>(idx[r])]);
      for (std::size_t q = r + 1; q < idx.size(); ++q) left = wedge(left, a.generator(static_cast<std::size_t>(idx[q])));
      out = out + left;
    }
  }
  return out;
}

LieCheck lie_check(const AlgebroidStructure& a, const ZeroTestOptions& opts) {
  LieCheck out;
  Box box = a.base().box();
  auto consider = [&](const std::string& label, const AlgebroidForm& f) {
    auto r = tensor_zero_test(f, box, opts);
    if (r.zero) return;
    out.is_lie = false;
    if (out.witness.empty() || r.max_abs > out.max_abs) {
      out.witness = label;
      out.form = f;
      out.max_abs = r.max_abs;
      out.point = r.witness;
    }
  };
  for (std::size_t b = 0; b < a.base().dim(); ++b)
    consider(a.base().name(b), algebroid_d(a, d_function(a, a.base().coordinate(b))));
  if (a.rank() >= 2)
    for (std::size_t k = 0; k < a.rank(); ++k) consider("y:" + a.fiber().name(k), algebroid_d(a, d_generator(a, k)));
  return out;
}

bool is_lie(const AlgebroidStructure& a, const ZeroTestOptions& opts) { return lie_check(a, opts).is_lie; }

std::vector<Expression> bracket_coefficients(const AlgebroidStructure& a, std::size_t i, std::size_t j) {
  std::vector<Expression> out;
  for (std::size_t k = 0; k < a.rank(); ++k) out.push_back(a.c(k, j, i));
  return out;
}

VBMorphism::VBMorphism(AlgebroidStructure src, AlgebroidStructure tgt, SmoothMap b, std::vector<AlgebroidForm> f)
    : source(std::move(src)), target(std::move(tgt)), base(std::move(b)), fiber(std::move(f)) {
  if (base.source.names() != source.base().names())
    throw ChartMismatch("morphism: base map does not start on the source base chart");
  if (base.target.names() != target.base().names())
    throw ChartMismatch("morphism: base map does not land on the target base chart");
  if (fiber.size() != target.rank())
    throw std::invalid_argument("morphism: need " + std::to_string(target.rank()) + " fiber rows, got " +
                                std::to_string(fiber.size()));
  auto allowed = source.base().name_set();
  for (const auto& row : fiber) {
    if (row.degree() != 1 || row.chart().names() != source.fiber().names())
      throw ChartMismatch("morphism: fiber rows must be 1-forms on the source fiber chart");
    for (const auto& [idx, v] : row.components()) require_vars(allowed, v, "morphism fiber");
  }
}

VBMorphism tangent_morphism(const Chart& sigma, const AlgebroidStructure& target, const std::vector<Expression>& base,
                            const std::vector<DifferentialForm>& eta) {
  AlgebroidStructure src = tangent_algebroid(sigma);
  std::vector<AlgebroidForm> rows;
  for (const auto& e : eta) {
    if (e.chart().names() != sigma.names()) throw ChartMismatch("tangent_morphism: forms are not on the source chart");
    rows.push_back(e.embed(src.fiber()));
  }
  return VBMorphism(src, target, SmoothMap(src.base(), target.base(), base), rows);
}

VBMorphism identity_morphism(const AlgebroidStructure& a) {
  std::vector<AlgebroidForm> rows;
  for (std::size_t i = 0; i < a.rank(); ++i) rows.push_back(a.generator(i));
  return VBMorphism(a, a, identity_map(a.base()), rows);
}

VBMorphism compose(const VBMorphism& outer, const VBMorphism& inner) {
  if (outer.source.base().names() != inner.target.base().names() ||
      outer.source.fiber().names() != inner.target.fiber().names())
    throw ChartMismatch("compose: inner target is not the outer source");
  std::vector<AlgebroidForm> rows;
  for (const auto& orow : outer.fiber) {
    AlgebroidForm acc(inner.source.fiber(), 1);
    for (std::size_t b = 0; b < inner.fiber.size(); ++b) {
      Expression coef = orow.get({static_cast<int>(b)});
      if (!coef.is_literal_zero()) acc = acc + inner.fiber[b] * inner.base.pull(coef);
    }
    rows.push_back(acc);
  }
  return VBMorphism(inner.source, outer.target, compose(outer.base, inner.base), rows);
}

MorphismReport morphism_check(const VBMorphism& phi, const ZeroTestOptions& opts) {
  MorphismReport rep;
  const auto& src = phi.source;
  const auto& tgt = phi.target;
  Box box = src.base().box();
  std::size_t m = tgt.base().dim(), n = tgt.rank();
  for (std::size_t a = 0; a < m; ++a) {
    AlgebroidForm res = algebroid_d(src, src.function(phi.base.components[a]));
    for (std::size_t i = 0; i < n; ++i) {
      const Expression& r = tgt.anchor(i, a);
      if (!r.is_literal_zero()) res = res - phi.fiber[i] * phi.base.pull(r);
    }
    track(rep, tensor_zero_test(res, box, opts), "anchor " + tgt.base().name(a));
    rep.anchor_residuals.push_back(res);
  }
  for (std::size_t k = 0; k < n; ++k) {
    AlgebroidForm res = src.rank() >= 2 ? algebroid_d(src, phi.fiber[k]) : AlgebroidForm(src.fiber(), 2);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        Expression c = tgt.c(k, j, i);
        if (c.is_literal_zero()) continue;
        res = res - wedge(phi.fiber[i], phi.fiber[j]) * (Expression::rational(1, 2) * phi.base.pull(c));
      }
    track(rep, tensor_zero_test(res, box, opts), "bracket " + tgt.fiber().name(k));
    rep.bracket_residuals.push_back(res);
  }
  Box tbox = tgt.base().box();
  for (const auto& pt : sample_points(box, opts.trials, opts.seed))
    for (std::size_t a = 0; a < m && rep.base_in_box; ++a) {
      double v = phi.base.components[a].evaluate(pt);
      const Interval& iv = tbox.at(tgt.base().name(a));
      if (v < iv.lo || v > iv.hi) rep.base_in_box = false;
    }
  return rep;
}

RxAlgebroid make_rx(const AlgebroidStructure& a, std::vector<int> fiber_weights, std::vector<int> base_weights) {
  if (base_weights.empty()) {
    if (!a.base().has_weights()) throw std::invalid_argument("rx algebroid: missing base weights");
    base_weights = a.base().weights();
  }
  if (base_weights.size() != a.base().dim()) throw std::invalid_argument("rx algebroid: base weights have the wrong size");
  if (fiber_weights.size() != a.rank()) throw std::invalid_argument("rx algebroid: fiber weights have the wrong size");
  return {a, std::move(base_weights), std::move(fiber_weights)};
}

RxAlgebroid cotangent_rx(const HomogeneousPoisson& hp, const std::string& suffix) {
  AlgebroidStructure a = cotangent_algebroid(hp.pi, suffix);
  std::vector<int> base_w(hp.chart.dim(), 0), fiber_w(hp.chart.dim(), 1);
  int si = hp.chart.index(hp.fiber);
  base_w[static_cast<std::size_t>(si)] = 1;
  fiber_w[static_cast<std::size_t>(si)] = 0;
  return make_rx(a, fiber_w, base_w);
}

VBMorphism scale_morphism(const VBMorphism& phi, const RxAlgebroid& target, const Expression& nu) {
  if (phi.target.base().names() != target.algebroid.base().names() ||
      phi.target.fiber().names() != target.algebroid.fiber().names())
    throw ChartMismatch("scale_morphism: morphism does not land in the graded algebroid");
  std::vector<Expression> comps;
  for (std::size_t a = 0; a < phi.base.components.size(); ++a)
    comps.push_back(scale_factor(nu, target.base_weights[a]) * phi.base.components[a]);
  std::vector<AlgebroidForm> rows;
  for (std::size_t k = 0; k < phi.fiber.size(); ++k)
    rows.push_back(phi.fiber[k] * scale_factor(nu, target.fiber_weights[k]));
  return VBMorphism(phi.source, phi.target, SmoothMap(phi.base.source, phi.base.target, comps), rows);
}

namespace {

// The algebroid with one extra base coordinate that no anchor sees.
AlgebroidStructure with_passive_coordinate(const AlgebroidStructure& a, const std::string& name, Interval iv) {
  Chart base = append_coordinate(a.base(), name, iv);
  std::vector<std::vector<Expression>> anchor;
  for (std::size_t i = 0; i < a.rank(); ++i) {
    std::vector<Expression> row;
    for (std::size_t b = 0; b < a.base().dim(); ++b) row.push_back(a.anchor(i, b));
    row.push_back(Expression(0));
    anchor.push_back(row);
  }
  std::vector<MultivectorField> cs;
  for (std::size_t k = 0; k < a.rank(); ++k) {
    MultivectorField ck(a.fiber(), 2);
    for (std::size_t i = 0; i < a.rank(); ++i)
      for (std::size_t j = i + 1; j < a.rank(); ++j) ck.add({static_cast<int>(i), static_cast<int>(j)}, a.c(k, i, j));
    cs.push_back(ck);
  }
  return AlgebroidStructure(base, a.fiber(), anchor, cs);
}

}  // namespace

RxReport rx_check(const RxAlgebroid& a, Interval nu_range, const ZeroTestOptions& opts) {
  const auto& A = a.algebroid;
  if (a.base_weights.size() != A.base().dim() || a.fiber_weights.size() != A.rank())
    throw std::invalid_argument("rx_check: missing weights");
  std::set<std::string> taken = A.base().name_set();
  for (const auto& n : A.fiber().names()) taken.insert(n);
  std::string nu = fresh_name(taken, "nu");
  AlgebroidStructure src = with_passive_coordinate(A, nu, nu_range);
  std::vector<Expression> comps;
  for (std::size_t b = 0; b < A.base().dim(); ++b) comps.push_back(A.base().coordinate(b));
  std::vector<AlgebroidForm> rows;
  for (std::size_t i = 0; i < A.rank(); ++i) rows.push_back(src.generator(i));
  VBMorphism id(src, A, SmoothMap(src.base(), A.base(), comps), rows);
  RxReport rep;
  rep.transport = morphism_check(scale_morphism(id, a, var(nu)), opts);
  rep.ok = rep.transport.ok;
  return rep;
}

AlgebroidStructure canonical_rx_algebroid(const Chart& sigma, const std::string& s, Interval s_range) {
  if (sigma.contains(s)) throw std::invalid_argument("canonical_rx_algebroid: '" + s + "' clashes with Sigma");
  return with_passive_coordinate(tangent_algebroid(sigma), s, s_range);
}

JacobiMorphism lift_phi_to_psi(const VBMorphism& phi, const RxAlgebroid& target, const std::string& s,
                               Interval s_range) {
  const auto& src = phi.source;
  if (src.base().names() != src.fiber().names())
    throw std::invalid_argument("lift_phi_to_psi: the source must be a tangent algebroid");
  if (!rx_check(target).ok) throw std::invalid_argument("lift_phi_to_psi: target is not R^x-graded by these weights");
  AlgebroidStructure csrc = canonical_rx_algebroid(src.base(), s, s_range);
  std::vector<AlgebroidForm> rows;
  for (const auto& r : phi.fiber) rows.push_back(r);
  VBMorphism moved(csrc, phi.target, SmoothMap(csrc.base(), phi.target.base(), phi.base.components), rows);
  return {scale_morphism(moved, target, var(s)), target, s};
}

VBMorphism restrict_to_unit(const JacobiMorphism& psi) {
  const Chart& sigma = psi.psi.source.fiber();
  std::map<std::string, Expression> at_one{{psi.s, Expression(1)}};
  std::vector<Expression> comps;
  for (const auto& c : psi.psi.base.components) comps.push_back(normalize(substitute(c, at_one)));
  std::vector<DifferentialForm> rows;
  for (const auto& r : psi.psi.fiber) rows.push_back(r.map([&](const Expression& e) { return normalize(substitute(e, at_one)); }));
  return tangent_morphism(sigma, psi.psi.target, comps, rows);
}

JacobiMorphismReport jacobi_morphism_check(const JacobiMorphism& psi, const ZeroTestOptions& opts) {
  const auto& P = psi.psi;
  std::set<std::string> taken = P.source.base().name_set();
  std::string nu = fresh_name(taken, "nu");
  Box box = P.source.base().box();
  box[nu] = {0.5, 2.0};
  std::map<std::string, Expression> shifted{{psi.s, var(nu) * var(psi.s)}};
  auto equivariant = [&](const Expression& lhs, int w) {
    return is_zero(substitute(lhs, shifted) - scale_factor(var(nu), w) * lhs, box, opts);
  };
  for (std::size_t a = 0; a < P.base.components.size(); ++a)
    if (!equivariant(P.base.components[a], psi.target.base_weights[a]))
      throw std::invalid_argument("jacobi_morphism_check: base component " + P.target.base().name(a) +
                                  " is not equivariant");
  for (std::size_t k = 0; k < P.fiber.size(); ++k)
    for (const auto& [idx, v] : P.fiber[k].components())
      if (!equivariant(v, psi.target.fiber_weights[k]))
        throw std::invalid_argument("jacobi_morphism_check: fiber row " + P.target.fiber().name(k) +
                                    " is not equivariant");

  JacobiMorphismReport rep;
  rep.unit = morphism_check(restrict_to_unit(psi), opts);
  rep.equivariant = morphism_check(P, opts);
  for (const auto& r : rep.equivariant.anchor_residuals) {
    auto t = tensor_zero_test(r, P.source.base().box(), opts);
    if (!t.zero) rep.anchors_intertwine = false;
    rep.anchor_max_abs = std::max(rep.anchor_max_abs, t.max_abs);
  }
  if (rep.unit.ok != rep.equivariant.ok)
    throw std::logic_error("jacobi_morphism_check: the s = 1 morphism and its R^x lift disagree");
  rep.ok = rep.unit.ok && rep.equivariant.ok;
  return rep;
}

AlgebroidStructure derivation_algebroid(const Chart& base, const std::string& suffix, const std::string& t) {
  std::vector<std::string> names;
  std::vector<Interval> ivs;
  for (const auto& n : base.names()) {
    names.push_back(n + suffix);
    ivs.push_back({-1.0, 1.0});
  }
  names.push_back(t);
  ivs.push_back({-1.0, 1.0});
  Chart fiber(names, ivs);
  std::size_t n = base.dim();
  std::vector<std::vector<Expression>> anchor(n + 1, std::vector<Expression>(n, Expression(0)));
  for (std::size_t i = 0; i < n; ++i) anchor[i][i] = Expression(1);
  return AlgebroidStructure(Chart(base.names(), base.intervals()), fiber, anchor, {}, true);
}

VBMorphism compute_D0phi(const SmoothMap& phi, const std::string& fiber, const ZeroTestOptions& opts) {
  const Chart& tgt = phi.target;
  int si = tgt.index(fiber);
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < tgt.dim(); ++i)
    if (static_cast<int>(i) != si) keep.push_back(i);
  Chart m = subchart(tgt, keep);
  const Expression& s = phi.components[static_cast<std::size_t>(si)];
  bool pos = false, neg = false;
  for (const auto& pt : sample_points(phi.source.box(), opts.trials, opts.seed)) {
    double v = s.evaluate(pt);
    if (std::abs(v) < 1e-12) pos = neg = true;
    (v > 0 ? pos : neg) = true;
  }
  if (pos && neg) throw std::invalid_argument("compute_D0phi: the fiber component vanishes on the sample box");
  std::vector<Expression> x;
  std::vector<DifferentialForm> rows;
  for (auto i : keep) {
    x.push_back(phi.components[i]);
    rows.push_back(differential(phi.source, phi.components[i]));
  }
  rows.push_back(differential(phi.source, s) * (Expression(1) / s));
  return tangent_morphism(phi.source, derivation_algebroid(m), x, rows);
}

std::vector<DifferentialForm> j_sharp_forms(const JacobiPair& j, const std::vector<Expression>& x,
                                            const std::vector<DifferentialForm>& p, const DifferentialForm& z) {
  std::size_t n = j.chart.dim();
  if (x.size() != n || p.size() != n) throw std::invalid_argument("j_sharp_forms: wrong number of components");
  std::map<std::string, Expression> at;
  for (std::size_t i = 0; i < n; ++i) at[j.chart.name(i)] = x[i];
  std::vector<DifferentialForm> out;
  DifferentialForm t(z.chart(), 1);
  for (std::size_t jj = 0; jj < n; ++jj) {
    int jd = static_cast<int>(jj);
    Expression e = substitute(j.e.get({jd}), at);
    DifferentialForm acc = z * e;
    for (std::size_t k = 0; k < n; ++k) {
      Expression lkj = j.lambda.get({static_cast<int>(k), jd});
      if (!lkj.is_literal_zero()) acc = acc + p[k] * substitute(lkj, at);
    }
    out.push_back(acc);
    if (!e.is_literal_zero()) t = t - p[jj] * e;
  }
  out.push_back(t);
  return out;
}

}  // namespace jsm
