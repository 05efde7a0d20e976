#include "jsm/jacobi.hpp"

#include <cmath>
#include <sstream>

namespace jsm {

namespace {

void require_chart_vars(const Chart& c, const Expression& f, const char* op) {
  for (const auto& v : f.free_variables())
    if (!c.contains(v)) throw std::invalid_argument(std::string(op) + ": variable '" + v + "' is not a chart coordinate");
}

std::string fresh(const Chart& c, std::string base) {
  while (c.contains(base)) base += "_";
  return base;
}

bool strictly_inside(const Box& region, const SamplePoint& pt) {
  for (const auto& [name, iv] : region) {
    auto it = pt.find(name);
    if (it == pt.end()) return false;
    if (!(iv.lo < it->second && it->second < iv.hi)) return false;
  }
  return true;
}

SamplePoint eval_map(const std::vector<Expression>& comps, const Chart& target, const SamplePoint& at) {
  SamplePoint out;
  for (std::size_t i = 0; i < comps.size(); ++i) out[target.name(i)] = comps[i].evaluate(at);
  return out;
}

bool close(double a, double b, double tol) { return std::abs(a - b) <= tol * std::max(1.0, std::abs(b)); }

}  // namespace

JacobiPair::JacobiPair(MultivectorField l, MultivectorField e_) : chart(l.chart()), lambda(std::move(l)), e(std::move(e_)) {
  if (lambda.degree() != 2) throw std::invalid_argument("jacobi pair: Lambda must be a bivector");
  if (e.degree() != 1) throw std::invalid_argument("jacobi pair: E must be a vector field");
  if (e.chart().names() != chart.names()) throw ChartMismatch("jacobi pair: Lambda and E live on different charts");
}

JacobiPair::JacobiPair(const Chart& c) : JacobiPair(MultivectorField(c, 2), MultivectorField(c, 1)) {}

Expression bracket(const JacobiPair& j, const Expression& f, const Expression& g) {
  require_chart_vars(j.chart, f, "bracket");
  require_chart_vars(j.chart, g, "bracket");
  return contract(j.lambda, {f, g}) + f * apply(j.e, g) - g * apply(j.e, f);
}

Expression jacobiator(const JacobiPair& j, const Expression& f, const Expression& g, const Expression& h) {
  return bracket(j, f, bracket(j, g, h)) + bracket(j, g, bracket(j, h, f)) + bracket(j, h, bracket(j, f, g));
}

JacobiCheck jacobi_check(const JacobiPair& j, const ZeroTestOptions& opts) {
  JacobiCheck out;
  Box box = j.chart.box();
  out.residual_e = schouten(j.e, j.lambda);
  out.residual_lambda = schouten(j.lambda, j.lambda) + wedge(j.e, j.lambda) * Expression(2);
  out.e_test = tensor_zero_test(out.residual_e, box, opts);
  out.lambda_test = tensor_zero_test(out.residual_lambda, box, opts);
  out.sn_jacobi = out.e_test.zero && out.lambda_test.zero;

  // A Jacobiator of first-order brackets is fixed by its values on 1 and the coordinates.
  std::vector<std::pair<std::string, Expression>> slots{{"1", Expression(1)}};
  for (std::size_t i = 0; i < j.chart.dim(); ++i) slots.emplace_back(j.chart.name(i), j.chart.coordinate(i));
  out.oracle_jacobi = true;
  for (std::size_t a = 0; a < slots.size(); ++a)
    for (std::size_t b = a + 1; b < slots.size(); ++b)
      for (std::size_t c = b + 1; c < slots.size(); ++c) {
        Expression v = jacobiator(j, slots[a].second, slots[b].second, slots[c].second);
        ZeroTestResult r = zero_test(v, box, opts);
        if (r.zero) continue;
        out.oracle_jacobi = false;
        if (!out.witness || r.max_abs > out.witness->max_abs)
          out.witness = JacobiatorWitness{{slots[a].first, slots[b].first, slots[c].first}, v, r.max_abs, r.witness};
      }
  if (out.sn_jacobi != out.oracle_jacobi)
    throw std::logic_error("jacobi_check: Schouten residuals and Jacobiator oracle disagree");
  out.is_jacobi = out.sn_jacobi;
  return out;
}

HomogeneousPoisson poissonize(const JacobiPair& j, const std::string& fiber, Interval s_range) {
  if (j.chart.contains(fiber)) throw std::invalid_argument("poissonize: fiber name '" + fiber + "' clashes");
  auto names = j.chart.names();
  auto ivs = j.chart.intervals();
  names.push_back(fiber);
  ivs.push_back(s_range);
  std::vector<int> w(names.size(), 0);
  w.back() = 1;
  Chart ext(names, ivs, w);
  int si = static_cast<int>(names.size()) - 1;
  Expression s = var(fiber);
  MultivectorField pi(ext, 2);
  for (const auto& [k, v] : j.lambda.components()) pi.add(k, v / s);  // (1/2s) over all (i,j) = (1/s) over i<j
  for (const auto& [k, v] : j.e.components()) pi.add({si, k[0]}, v);
  return {ext, pi, fiber};
}

TensorZeroResult homogeneity_check(const HomogeneousPoisson& hp, const ZeroTestOptions& opts) {
  return homogeneity_test(hp.pi, -1, {}, {0.5, 2.0}, opts);
}

Expression poisson_bracket(const HomogeneousPoisson& hp, const Expression& f, const Expression& g) {
  return contract(hp.pi, {f, g});
}

DerPoint j_sharp(const JacobiPair& j, const JetPoint& pt) {
  std::size_t n = j.chart.dim();
  if (pt.x.size() != n || pt.p.size() != n) throw std::invalid_argument("j_sharp: jet point has the wrong dimension");
  std::map<std::string, Expression> at;
  for (std::size_t i = 0; i < n; ++i) at[j.chart.name(i)] = pt.x[i];
  DerPoint out{pt.x, {}, Expression(0)};
  for (std::size_t jj = 0; jj < n; ++jj) {
    int jd = static_cast<int>(jj);
    Expression acc = substitute(j.e.get({jd}), at) * pt.z;
    for (std::size_t k = 0; k < n; ++k) {
      Expression lkj = j.lambda.get({static_cast<int>(k), jd});
      if (!lkj.is_literal_zero()) acc = acc + substitute(lkj, at) * pt.p[k];
    }
    out.xdot.push_back(acc);
  }
  for (std::size_t k = 0; k < n; ++k) out.t = out.t - substitute(j.e.get({static_cast<int>(k)}), at) * pt.p[k];
  return out;
}

MultivectorField hamiltonian_vf(const JacobiPair& j, const Expression& sigma) {
  require_chart_vars(j.chart, sigma, "hamiltonian_vf");
  MultivectorField out = j.e * sigma;
  return out + sharp(j.lambda, differential(j.chart, sigma));
}

JetSection jet_bracket(const JacobiPair& j, const JetSection& a, const JetSection& b) {
  const auto& L = j.lambda;
  const auto& E = j.e;
  auto la = sharp(L, a.alpha), lb = sharp(L, b.alpha);
  DifferentialForm ab = wedge(a.alpha, b.alpha);
  DifferentialForm form = lie_derivative(la, b.alpha) - lie_derivative(lb, a.alpha) -
                          differential(j.chart, pairing(ab, L)) + lie_derivative(E, b.alpha) * a.f -
                          lie_derivative(E, a.alpha) * b.f - interior(E, ab);
  Expression fn = pairing(wedge(b.alpha, a.alpha), L) + apply(la, b.f) - apply(lb, a.f) + a.f * apply(E, b.f) -
                  b.f * apply(E, a.f);
  return {form, fn};
}

Expression pairing_L(const JetPoint& jet, const DerPoint& der) {
  if (jet.x.size() != der.x.size()) throw std::invalid_argument("pairing_L: base dimension mismatch");
  for (std::size_t i = 0; i < jet.x.size(); ++i)
    if (!jet.x[i].equal(der.x[i])) throw std::invalid_argument("pairing_L: base points differ");
  if (jet.p.size() != der.xdot.size()) throw std::invalid_argument("pairing_L: fiber dimension mismatch");
  Expression acc = der.t * jet.z;
  for (std::size_t i = 0; i < jet.p.size(); ++i) acc = der.xdot[i] * jet.p[i] + acc;
  return acc;
}

AtlasReport atlas_check(const LineBundleAtlas& atlas, const ZeroTestOptions& opts) {
  AtlasReport rep;
  auto fail = [&](int idx, const std::string& what, double mag) {
    if (rep.ok) {
      rep.ok = false;
      rep.failing_overlap = idx;
      rep.failure = what;
    }
    rep.max_abs = std::max(rep.max_abs, mag);
  };
  auto find_chart = [&](const std::string& name) -> const AtlasChart& {
    for (const auto& c : atlas.charts)
      if (c.name == name) return c;
    throw std::invalid_argument("atlas: unknown chart '" + name + "'");
  };
  std::map<std::string, HomogeneousPoisson> hps;
  for (const auto& c : atlas.charts) hps.emplace(c.name, poissonize(c.jacobi, fresh(c.jacobi.chart, "s")));

  for (std::size_t n = 0; n < atlas.overlaps.size(); ++n) {
    const Overlap& o = atlas.overlaps[n];
    find_chart(o.from);  // validates the name
    const AtlasChart& B = find_chart(o.to);
    const Chart& base_b = B.jacobi.chart;
    int idx = static_cast<int>(n);
    std::string tag = "overlap " + std::to_string(n) + " (" + o.from + "->" + o.to + ")";
    if (o.base_map.size() != base_b.dim()) throw std::invalid_argument(tag + ": base map has the wrong size");

    const HomogeneousPoisson& pa = hps.at(o.from);
    const HomogeneousPoisson& pb = hps.at(o.to);
    std::vector<Expression> comps = o.base_map;
    comps.push_back(pa.fiber_coordinate() / o.factor);
    SmoothMap F(pa.chart, pb.chart, comps);
    Box box = pa.chart.box();
    for (const auto& [k, iv] : o.region) box[k] = iv;

    auto samples = sample_points(o.region, opts.trials, opts.seed);
    for (const auto& pt : samples)
      if (std::abs(o.factor.evaluate(pt)) < 1e-12) fail(idx, tag + ": transition factor vanishes", 0.0);

    // cocycle conditions
    if (o.from == o.to) {
      for (const auto& pt : samples) {
        if (!close(o.factor.evaluate(pt), 1.0, opts.tol)) fail(idx, tag + ": cocycle g_aa != 1", 0.0);
        SamplePoint y = eval_map(o.base_map, base_b, pt);
        for (const auto& [k, v] : y)
          if (!close(v, pt.at(k), opts.tol)) fail(idx, tag + ": cocycle self-overlap is not the identity", 0.0);
      }
    }
    for (std::size_t m = 0; m < atlas.overlaps.size(); ++m) {
      const Overlap& o2 = atlas.overlaps[m];
      if (o2.from != o.to || o.from == o.to || o2.from == o2.to) continue;
      const Chart& base_c = find_chart(o2.to).jacobi.chart;
      for (const auto& pt : samples) {
        if (!strictly_inside(o.region, pt)) continue;
        SamplePoint y = eval_map(o.base_map, base_b, pt);
        if (!strictly_inside(o2.region, y)) continue;
        SamplePoint w = eval_map(o2.base_map, base_c, y);
        double g12 = o.factor.evaluate(pt) * o2.factor.evaluate(y);
        if (o2.to == o.from) {
          if (!close(g12, 1.0, opts.tol)) fail(idx, tag + ": cocycle g_ab * g_ba != 1", std::abs(g12 - 1.0));
          for (const auto& [k, v] : w)
            if (!close(v, pt.at(k), opts.tol)) fail(idx, tag + ": round trip is not the identity", std::abs(v - pt.at(k)));
          continue;
        }
        for (const auto& o3 : atlas.overlaps) {
          if (o3.from != o.from || o3.to != o2.to || !strictly_inside(o3.region, pt)) continue;
          SamplePoint w3 = eval_map(o3.base_map, base_c, pt);
          double g3 = o3.factor.evaluate(pt);
          if (!close(g12, g3, opts.tol)) fail(idx, tag + ": cocycle g_ab g_bc != g_ac", std::abs(g12 - g3));
          for (const auto& [k, v] : w)
            if (!close(v, w3.at(k), opts.tol)) fail(idx, tag + ": triple overlap maps disagree", std::abs(v - w3.at(k)));
        }
      }
    }

    // gluing: Pi_B o F = J Pi_A J^T
    int dim_a = static_cast<int>(pa.chart.dim()), dim_b = static_cast<int>(pb.chart.dim());
    std::vector<std::vector<Expression>> jac(static_cast<std::size_t>(dim_b));
    for (int a = 0; a < dim_b; ++a)
      for (int c = 0; c < dim_a; ++c) jac[a].push_back(differentiate(comps[a], pa.chart.name(c)));
    auto bind = F.bindings();
    for (int a = 0; a < dim_b; ++a)
      for (int b = a + 1; b < dim_b; ++b) {
        Expression rhs(0);
        for (int c = 0; c < dim_a; ++c)
          for (int d = 0; d < dim_a; ++d) {
            Expression pcd = pa.pi.get({c, d});
            if (pcd.is_literal_zero() || jac[a][c].is_literal_zero() || jac[b][d].is_literal_zero()) continue;
            rhs = rhs + jac[a][c] * jac[b][d] * pcd;
          }
        Expression diff = substitute(pb.pi.get({a, b}), bind) - rhs;
        ZeroTestResult r = zero_test(diff, box, opts);
        if (!r.zero)
          fail(idx, tag + ": component (" + pb.chart.name(a) + "," + pb.chart.name(b) + ") does not glue", r.max_abs);
      }
  }
  return rep;
}

std::vector<int> scaling_weights(const SmoothMap& action, const Chart& chart, const std::string& nu) {
  if (action.components.size() != chart.dim()) throw std::invalid_argument("scaling_weights: size mismatch");
  SamplePoint probe;
  for (const auto& name : action.source.names()) probe[name] = 0.75;
  probe[nu] = 2.0;
  Box box = action.source.box();
  std::vector<int> w;
  for (std::size_t i = 0; i < chart.dim(); ++i) {
    double ratio = action.components[i].evaluate(probe) / probe.at(chart.name(i));
    double lw = std::log2(std::abs(ratio));
    int wi = static_cast<int>(std::lround(lw));
    if (ratio <= 0 || std::abs(lw - wi) > 1e-9)
      throw std::invalid_argument("scaling_weights: component '" + chart.name(i) + "' is not a pure scaling");
    Expression expect = pow(var(nu), wi) * chart.coordinate(i);
    if (!is_zero(action.components[i] - expect, box))
      throw std::invalid_argument("scaling_weights: component '" + chart.name(i) + "' is not a pure scaling");
    w.push_back(wi);
  }
  return w;
}

std::vector<LiftedAction> lifted_actions(const HomogeneousPoisson& hp, const std::string& nu) {
  const Chart& ext = hp.chart;
  std::size_t n = ext.dim();
  Expression v = var(nu);
  // h_nu on L^x and its inverse
  std::vector<Expression> h, hinv;
  for (std::size_t i = 0; i < n; ++i) {
    bool fib = ext.name(i) == hp.fiber;
    h.push_back(fib ? v * ext.coordinate(i) : ext.coordinate(i));
    hinv.push_back(fib ? ext.coordinate(i) / v : ext.coordinate(i));
  }
  auto with_nu = [&](const Chart& c) {
    auto names = c.names();
    auto ivs = c.intervals();
    names.push_back(nu);
    ivs.push_back({0.5, 2.0});
    return Chart(names, ivs);
  };
  std::vector<LiftedAction> out;

  Chart tc = tangent_chart(ext);
  Chart tsrc = with_nu(tc);
  std::vector<Expression> that = h, th = h;
  for (std::size_t a = 0; a < n; ++a) {
    Expression acc(0);
    for (std::size_t b = 0; b < n; ++b) acc = acc + differentiate(h[a], ext.name(b)) * tc.coordinate(n + b);
    that.push_back(acc);
    th.push_back(acc / v);  // h = nu^{-1} T h_nu on the fibers
  }
  out.push_back({"hat_h", SmoothMap(tsrc, tc, that), {}});
  out.push_back({"h", SmoothMap(tsrc, tc, th), {}});

  Chart cc = cotangent_chart(ext);
  Chart csrc = with_nu(cc);
  std::map<std::string, Expression> at_image;
  for (std::size_t i = 0; i < n; ++i) at_image[ext.name(i)] = h[i];
  std::vector<Expression> chat = h, ch = h;
  for (std::size_t a = 0; a < n; ++a) {
    Expression acc(0);
    for (std::size_t b = 0; b < n; ++b)
      acc = acc + cc.coordinate(n + b) * substitute(differentiate(hinv[b], ext.name(a)), at_image);
    chat.push_back(acc);
    ch.push_back(acc * v);  // h* = nu (T h_{1/nu})^*
  }
  out.push_back({"hat_h_star", SmoothMap(csrc, cc, chat), {}});
  out.push_back({"h_star", SmoothMap(csrc, cc, ch), {}});

  for (auto& a : out) a.weights = scaling_weights(a.map, a.map.target, nu);
  return out;
}

JacobiPair contact_jacobi(int k, ContactVariant variant) {
  if (k < 0) throw std::invalid_argument("contact_jacobi: k must be nonnegative");
  std::vector<std::string> names;
  for (int i = 0; i <= 2 * k; ++i) names.push_back("x" + std::to_string(i));
  Chart c(names, std::vector<Interval>(names.size(), Interval{-1, 1}));
  MultivectorField lam(c, 2);
  for (int jj = 1; jj <= k; ++jj) {
    lam.add({jj, k + jj}, Expression(1));
    Expression xk = c.coordinate(static_cast<std::size_t>(k + jj));
    lam.add({0, k + jj}, variant == ContactVariant::AsPrinted ? -xk : xk);
  }
  return JacobiPair(lam, MultivectorField::basis(c, {0}));
}

JacobiPair almost_poisson_jacobi() {
  Chart c({"x", "y", "z"}, {{-1, 1}, {-1, 1}, {-1, 1}});
  auto lam = wedge(MultivectorField::basis(c, {"x"}),
                   MultivectorField::basis(c, {"y"}) + MultivectorField::basis(c, {"z"}, var("x")));
  return JacobiPair(lam, MultivectorField(c, 1));
}

LineBundleAtlas moebius_atlas(const Expression& e_first, const Expression& e_second) {
  Chart co({"x"}, {{0.0, 1.0}});
  Chart cu({"x_u"}, {{0.5, 1.5}});
  Expression x = var("x"), xu = var("x_u");
  LineBundleAtlas a;
  a.charts.push_back({"O", JacobiPair(MultivectorField(co, 2), MultivectorField::basis(co, {0}, e_first))});
  a.charts.push_back({"U", JacobiPair(MultivectorField(cu, 2), MultivectorField::basis(cu, {0}, e_second))});
  a.overlaps.push_back({"O", "U", {{"x", {0.5, 1.0}}}, {x}, Expression(1)});
  a.overlaps.push_back({"O", "U", {{"x", {0.0, 0.5}}}, {x + 1}, Expression(-1)});
  a.overlaps.push_back({"U", "O", {{"x_u", {0.5, 1.0}}}, {xu}, Expression(1)});
  a.overlaps.push_back({"U", "O", {{"x_u", {1.0, 1.5}}}, {xu - 1}, Expression(-1)});
  return a;
}

LineBundleAtlas moebius_atlas() {
  Expression pi = Expression::pi();
  return moebius_atlas(cos(pi * var("x")), cos(pi * var("x_u")));
}

}  // namespace jsm
