#include "jsm/sigma.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace jsm {

namespace {

const std::set<std::string> kSurfaceVars{"u", "t"};

void require_surface(const Expression& e, const std::string& what) {
  for (const auto& v : e.free_variables())
    if (!kSurfaceVars.count(v)) throw std::invalid_argument(what + ": variable '" + v + "' is not a surface coordinate");
}

std::string fresh_fiber(const Chart& c, std::string name) {
  while (c.contains(name)) name += "_";
  return name;
}

// Second-order differences on a uniform line: central inside, one-sided at both ends.
double diff(double fm2, double fm1, double f0, double fp1, double fp2, int pos, int n, double h) {
  if (pos == 0) return (-3 * f0 + 4 * fp1 - fp2) / (2 * h);
  if (pos == n - 1) return (3 * f0 - 4 * fm1 + fm2) / (2 * h);
  return (fp1 - fm1) / (2 * h);
}

double du(const std::vector<double>& f, const SurfaceGrid& g, int i, int j) {
  auto at = [&](int ii) { return (ii >= 0 && ii < g.nu) ? f[g.at(ii, j)] : 0.0; };
  return diff(at(i - 2), at(i - 1), at(i), at(i + 1), at(i + 2), i, g.nu, g.hu());
}

double dt(const std::vector<double>& f, const SurfaceGrid& g, int i, int j) {
  auto at = [&](int jj) { return (jj >= 0 && jj < g.nt) ? f[g.at(i, jj)] : 0.0; };
  return diff(at(j - 2), at(j - 1), at(j), at(j + 1), at(j + 2), j, g.nt, g.ht());
}

std::vector<SamplePoint> grid_points(const SurfaceGrid& g) {
  std::vector<SamplePoint> pts;
  pts.reserve(g.size());
  for (int i = 0; i < g.nu; ++i)
    for (int j = 0; j < g.nt; ++j) pts.push_back({{"u", g.u(i)}, {"t", g.t(j)}});
  return pts;
}

std::vector<double> at_nodes(const Expression& e, const std::vector<SamplePoint>& pts) {
  std::vector<double> out;
  out.reserve(pts.size());
  for (const auto& p : pts) out.push_back(e.evaluate(p));
  return out;
}

// Node data of a bivector sigma model: fields y^a with derivatives, 1-forms a_a.
struct Nodes {
  SurfaceGrid grid;
  std::vector<std::vector<double>> y, yu, yt, au, at;
};

// Components P^{ab} with a != b, in the chart's order.
struct Bivector {
  const MultivectorField* p;
  std::size_t m;
  std::vector<std::vector<Expression>> comp;
  std::vector<std::vector<std::vector<Expression>>> grad;  // grad[c][a][b] = d_c P^{ab}

  explicit Bivector(const MultivectorField& pv, bool with_grad) : p(&pv), m(pv.chart().dim()) {
    comp.assign(m, std::vector<Expression>(m, Expression(0)));
    for (std::size_t a = 0; a < m; ++a)
      for (std::size_t b = 0; b < m; ++b)
        if (a != b) comp[a][b] = pv.get({static_cast<int>(a), static_cast<int>(b)});
    if (!with_grad) return;
    grad.assign(m, comp);
    for (std::size_t c = 0; c < m; ++c)
      for (std::size_t a = 0; a < m; ++a)
        for (std::size_t b = 0; b < m; ++b) grad[c][a][b] = differentiate(comp[a][b], pv.chart().name(c));
  }

  SamplePoint point(const Nodes& n, std::size_t node) const {
    SamplePoint pt;
    for (std::size_t a = 0; a < m; ++a) pt[p->chart().name(a)] = n.y[a][node];
    return pt;
  }
};

double eval_or_zero(const Expression& e, const SamplePoint& pt) { return e.is_literal_zero() ? 0.0 : e.evaluate(pt); }

double density(const Bivector& bv, const Nodes& n, std::size_t node) {
  SamplePoint pt = bv.point(n, node);
  double c = 0.0;
  for (std::size_t a = 0; a < bv.m; ++a) c += n.au[a][node] * n.yt[a][node] - n.at[a][node] * n.yu[a][node];
  for (std::size_t a = 0; a < bv.m; ++a)
    for (std::size_t b = a + 1; b < bv.m; ++b) {
      double w = eval_or_zero(bv.comp[a][b], pt);
      if (w != 0.0) c += w * (n.au[a][node] * n.at[b][node] - n.at[a][node] * n.au[b][node]);
    }
  return c;
}

template <class F>
double trapezoid(const SurfaceGrid& g, F&& f) {
  double sum = 0.0;
  for (int i = 0; i < g.nu; ++i)
    for (int j = 0; j < g.nt; ++j) sum += g.weight(i, j) * f(g.at(i, j), i, j);
  return sum;
}

void check_fiber_values(const std::vector<double>& s) {
  for (double v : s)
    if (!(std::abs(v) >= kMinFiber)) throw std::invalid_argument("fiber coordinate s is too close to 0");
}

void validate(const JacobiPair& j, const SymbolicField& f) {
  std::size_t n = j.chart.dim();
  if (f.x.size() != n || f.p.size() != n)
    throw std::invalid_argument("field: expected " + std::to_string(n) + " base functions and 1-forms");
  for (const auto& e : f.x) require_surface(e, "field");
  for (const auto& c : f.p) {
    require_surface(c.du, "field");
    require_surface(c.dt, "field");
  }
  require_surface(f.z.du, "field");
  require_surface(f.z.dt, "field");
  if (f.variant != Variant::Constrained) {
    require_surface(f.s, "field");
    Box box = f.sigma().box();
    for (const auto& pt : sample_points(box, 64, kDefaultSeed))
      if (!(std::abs(f.s.evaluate(pt)) >= kMinFiber)) throw std::invalid_argument("fiber coordinate s is too close to 0");
  }
  if (f.boundary_condition) {
    for (double u : {0.0, 1.0})
      for (int k = 0; k <= 20; ++k) {
        SamplePoint pt{{"u", u}, {"t", -f.T + k * f.T / 10.0}};
        bool bad = std::abs(f.z.dt.evaluate(pt)) > 1e-9;
        for (const auto& c : f.p) bad = bad || std::abs(c.dt.evaluate(pt)) > 1e-9;
        if (bad) throw std::invalid_argument("boundary condition: dt parts must vanish on u = 0 and u = 1");
      }
  }
}

void validate(const JacobiPair& j, const DiscreteField& f) {
  std::size_t n = j.chart.dim(), size = f.grid.size();
  if (f.x.size() != n || f.pu.size() != n || f.pt.size() != n)
    throw std::invalid_argument("field: expected " + std::to_string(n) + " base functions and 1-forms");
  auto shape = [&](const std::vector<double>& v) {
    if (v.size() != size) throw std::invalid_argument("field: node array does not match the grid");
  };
  for (std::size_t i = 0; i < n; ++i) {
    shape(f.x[i]);
    shape(f.pu[i]);
    shape(f.pt[i]);
  }
  shape(f.zu);
  shape(f.zt);
  if (f.variant != Variant::Constrained) {
    shape(f.s);
    check_fiber_values(f.s);
  }
  if (f.boundary_condition) {
    for (int i : {0, f.grid.nu - 1})
      for (int jj = 0; jj < f.grid.nt; ++jj) {
        std::size_t k = f.grid.at(i, jj);
        bool bad = std::abs(f.zt[k]) > 1e-9;
        for (const auto& v : f.pt) bad = bad || std::abs(v[k]) > 1e-9;
        if (bad) throw std::invalid_argument("boundary condition: dt parts must vanish on u = 0 and u = 1");
      }
  }
}

// Homogeneous data as sigma-model nodes on the poissonized chart (x..., s).
Nodes symbolic_nodes(const SymbolicField& f, const SurfaceGrid& g) {
  auto pts = grid_points(g);
  Nodes n{g, {}, {}, {}, {}, {}};
  std::vector<Expression> y = f.x;
  y.push_back(f.s);
  std::vector<Covector> a = f.p;
  a.push_back(f.z);
  for (const auto& e : y) {
    n.y.push_back(at_nodes(e, pts));
    n.yu.push_back(at_nodes(differentiate(e, "u"), pts));
    n.yt.push_back(at_nodes(differentiate(e, "t"), pts));
  }
  for (const auto& c : a) {
    n.au.push_back(at_nodes(c.du, pts));
    n.at.push_back(at_nodes(c.dt, pts));
  }
  return n;
}

Nodes discrete_nodes(const DiscreteField& f) {
  const SurfaceGrid& g = f.grid;
  Nodes n{g, f.x, {}, {}, f.pu, f.pt};
  n.y.push_back(f.s);
  n.au.push_back(f.zu);
  n.at.push_back(f.zt);
  for (const auto& v : n.y) {
    std::vector<double> vu(g.size()), vt(g.size());
    for (int i = 0; i < g.nu; ++i)
      for (int jj = 0; jj < g.nt; ++jj) {
        vu[g.at(i, jj)] = du(v, g, i, jj);
        vt[g.at(i, jj)] = dt(v, g, i, jj);
      }
    n.yu.push_back(std::move(vu));
    n.yt.push_back(std::move(vt));
  }
  return n;
}

// eta_i ^ dX^i + 1/2 L^{ij} eta_i ^ eta_j - E^i eta_i ^ z; y holds X only, a holds eta then z.
double constrained_action(const JacobiPair& j, const Nodes& n) {
  std::size_t m = j.chart.dim();
  Bivector bv(j.lambda, false);
  std::vector<Expression> e(m);
  for (std::size_t i = 0; i < m; ++i) e[i] = j.e.get({static_cast<int>(i)});
  return trapezoid(n.grid, [&](std::size_t node, int, int) {
    SamplePoint pt = bv.point(n, node);
    double c = 0.0;
    for (std::size_t a = 0; a < m; ++a) c += n.au[a][node] * n.yt[a][node] - n.at[a][node] * n.yu[a][node];
    for (std::size_t a = 0; a < m; ++a)
      for (std::size_t b = a + 1; b < m; ++b) {
        double w = eval_or_zero(bv.comp[a][b], pt);
        if (w != 0.0) c += w * (n.au[a][node] * n.at[b][node] - n.at[a][node] * n.au[b][node]);
      }
    double zu = n.au[m][node], zt = n.at[m][node];
    for (std::size_t a = 0; a < m; ++a) {
      double w = eval_or_zero(e[a], pt);
      if (w != 0.0) c -= w * (n.au[a][node] * zt - n.at[a][node] * zu);
    }
    return c;
  });
}

double poisson_action(const MultivectorField& p, const Nodes& n) {
  Bivector bv(p, false);
  return trapezoid(n.grid, [&](std::size_t node, int, int) { return density(bv, n, node); });
}

void track(ResidualReport& rep, const ResidualEntry& e) {
  if (!e.zero) rep.ok = false;
  if (rep.worst.empty() || e.max_abs > rep.max_abs) {
    rep.max_abs = e.max_abs;
    rep.worst = e.name;
  }
}

std::vector<std::string> residual_names(const Chart& base, bool reduced) {
  std::vector<std::string> names;
  for (const auto& x : base.names()) names.push_back("dX:" + x);
  names.push_back("ds");
  for (const auto& x : base.names()) names.push_back((reduced ? "dp:" : "dpi:") + x);
  names.push_back("dz");
  return names;
}

DifferentialForm wedge1(const Chart& sigma, const Covector& a, const Covector& b) {
  return DifferentialForm::basis(sigma, {0, 1}, a.du * b.dt - a.dt * b.du);
}

// Symbolic residual forms of the sigma model of p: 1-forms (one per coordinate) then 2-forms.
std::vector<DifferentialForm> residual_forms(const MultivectorField& p, const std::vector<Expression>& y,
                                             const std::vector<Covector>& a, const Chart& sigma) {
  std::size_t m = p.chart().dim();
  if (y.size() != m || a.size() != m) throw std::invalid_argument("sigma model: one field and 1-form per coordinate");
  Bivector bv(p, true);
  std::map<std::string, Expression> at;
  for (std::size_t i = 0; i < m; ++i) at[p.chart().name(i)] = y[i];
  std::vector<DifferentialForm> forms;
  for (std::size_t i = 0; i < m; ++i) {
    DifferentialForm r = differential(sigma, y[i]);
    for (std::size_t b = 0; b < m; ++b)
      if (!bv.comp[i][b].is_literal_zero()) r = r + to_form(a[b], sigma) * substitute(bv.comp[i][b], at);
    forms.push_back(r);
  }
  for (std::size_t i = 0; i < m; ++i) {
    DifferentialForm r = de_rham(to_form(a[i], sigma));
    for (std::size_t b = 0; b < m; ++b)
      for (std::size_t c = b + 1; c < m; ++c)
        if (!bv.grad[i][b][c].is_literal_zero()) r = r + wedge1(sigma, a[b], a[c]) * substitute(bv.grad[i][b][c], at);
    forms.push_back(r);
  }
  return forms;
}

ResidualReport symbolic_report(const std::vector<DifferentialForm>& forms, const std::vector<std::string>& names,
                               const Chart& sigma, const ZeroTestOptions& opts) {
  ResidualReport rep;
  std::size_t m = forms.size() / 2;
  for (std::size_t i = 0; i < forms.size(); ++i) {
    ResidualEntry e;
    e.name = names[i];
    bool last = (i % m) == m - 1;
    e.equation = i < m ? (last ? 2 : 1) : (last ? 4 : 3);
    e.form = forms[i];
    auto r = tensor_zero_test(forms[i], sigma.box(), opts);
    e.zero = r.zero;
    e.max_abs = r.max_abs;
    e.point = r.witness;
    track(rep, e);
    rep.entries.push_back(std::move(e));
  }
  return rep;
}

}  // namespace

SurfaceGrid::SurfaceGrid(int nu_, int nt_, double T_) : nu(nu_), nt(nt_), T(T_) {
  if (nu < 3 || nt < 3) throw std::invalid_argument("surface grid needs at least 3 nodes per direction");
  if (!(T > 0)) throw std::invalid_argument("surface grid: T must be positive");
}

double SurfaceGrid::weight(int i, int j) const {
  double w = hu() * ht();
  if (i == 0 || i == nu - 1) w *= 0.5;
  if (j == 0 || j == nt - 1) w *= 0.5;
  return w;
}

Chart sigma_chart(double T) { return Chart({"u", "t"}, {{0.0, 1.0}, {-T, T}}); }

std::string to_string(Variant v) {
  switch (v) {
    case Variant::Homogeneous:
      return "homogeneous";
    case Variant::Reduced:
      return "reduced";
    case Variant::Constrained:
      return "constrained";
  }
  return "";
}

Variant parse_variant(const std::string& name) {
  if (name == "homogeneous") return Variant::Homogeneous;
  if (name == "reduced") return Variant::Reduced;
  if (name == "constrained") return Variant::Constrained;
  throw std::invalid_argument("unknown variant '" + name + "'");
}

DifferentialForm to_form(const Covector& a, const Chart& sigma) {
  DifferentialForm f(sigma, 1);
  f.add({0}, a.du);
  f.add({1}, a.dt);
  return f;
}

Covector to_covector(const DifferentialForm& a) {
  if (a.degree() != 1 || a.chart().names() != std::vector<std::string>{"u", "t"})
    throw ChartMismatch("to_covector: need a 1-form on the (u, t) chart");
  return {a.get({0}), a.get({1})};
}

DiscreteField tabulate(const SymbolicField& f, const SurfaceGrid& grid) {
  auto pts = grid_points(grid);
  DiscreteField d;
  d.variant = f.variant;
  d.grid = grid;
  d.boundary_condition = f.boundary_condition;
  for (const auto& e : f.x) d.x.push_back(at_nodes(e, pts));
  if (f.variant != Variant::Constrained) d.s = at_nodes(f.s, pts);
  for (const auto& c : f.p) {
    d.pu.push_back(at_nodes(c.du, pts));
    d.pt.push_back(at_nodes(c.dt, pts));
  }
  d.zu = at_nodes(f.z.du, pts);
  d.zt = at_nodes(f.z.dt, pts);
  return d;
}

SymbolicField to_homogeneous(const SymbolicField& f) {
  if (f.variant == Variant::Constrained) throw std::invalid_argument("to_homogeneous: constrained data has no fiber coordinate");
  if (f.variant == Variant::Homogeneous) return f;
  SymbolicField h = f;
  h.variant = Variant::Homogeneous;
  for (auto& c : h.p) c = {f.s * c.du, f.s * c.dt};
  return h;
}

DiscreteField to_homogeneous(const DiscreteField& f) {
  if (f.variant == Variant::Constrained) throw std::invalid_argument("to_homogeneous: constrained data has no fiber coordinate");
  if (f.variant == Variant::Homogeneous) return f;
  DiscreteField h = f;
  h.variant = Variant::Homogeneous;
  for (std::size_t i = 0; i < h.pu.size(); ++i)
    for (std::size_t k = 0; k < f.s.size(); ++k) {
      h.pu[i][k] = f.s[k] * f.pu[i][k];
      h.pt[i][k] = f.s[k] * f.pt[i][k];
    }
  return h;
}

double action(Variant v, const JacobiPair& j, const SymbolicField& f, const SurfaceGrid& grid) {
  if (f.variant != v) throw std::invalid_argument("action: field carries " + to_string(f.variant) + " data, not " + to_string(v));
  validate(j, f);
  if (std::abs(grid.T - f.T) > 1e-15) throw std::invalid_argument("action: grid and field disagree on T");
  if (v == Variant::Constrained) {
    SymbolicField g = f;
    g.s = Expression(1);
    Nodes n = symbolic_nodes(g, grid);
    n.y.pop_back();
    return constrained_action(j, n);
  }
  SymbolicField h = to_homogeneous(f);
  Nodes n = symbolic_nodes(h, grid);
  check_fiber_values(n.y.back());
  return poisson_action(poissonize(j, fresh_fiber(j.chart, "s")).pi, n);
}

double action(Variant v, const JacobiPair& j, const DiscreteField& f) {
  if (f.variant != v) throw std::invalid_argument("action: field carries " + to_string(f.variant) + " data, not " + to_string(v));
  validate(j, f);
  if (v == Variant::Constrained) {
    DiscreteField g = f;
    g.s.assign(f.grid.size(), 1.0);
    Nodes n = discrete_nodes(g);
    n.y.pop_back();
    return constrained_action(j, n);
  }
  Nodes n = discrete_nodes(to_homogeneous(f));
  return poisson_action(poissonize(j, fresh_fiber(j.chart, "s")).pi, n);
}

double ResidualReport::equation_max(int equation) const {
  double m = 0.0;
  for (const auto& e : entries)
    if (e.equation == equation) m = std::max(m, e.max_abs);
  return m;
}

ResidualReport bivector_residual(const MultivectorField& p, const std::vector<Expression>& y,
                                 const std::vector<Covector>& a, double T, const ZeroTestOptions& opts) {
  Chart sigma = sigma_chart(T);
  for (const auto& e : y) require_surface(e, "bivector_residual");
  auto forms = residual_forms(p, y, a, sigma);
  std::vector<std::string> names;
  for (const auto& x : p.chart().names()) names.push_back("dX:" + x);
  for (const auto& x : p.chart().names()) names.push_back("dA:" + x);
  ResidualReport rep;
  std::size_t m = y.size();
  for (std::size_t i = 0; i < forms.size(); ++i) {
    ResidualEntry e;
    e.name = names[i];
    e.equation = i < m ? 1 : 3;
    e.form = forms[i];
    auto r = tensor_zero_test(forms[i], sigma.box(), opts);
    e.zero = r.zero;
    e.max_abs = r.max_abs;
    e.point = r.witness;
    track(rep, e);
    rep.entries.push_back(std::move(e));
  }
  return rep;
}

ResidualReport el_residual(const JacobiPair& j, const SymbolicField& f, const ZeroTestOptions& opts) {
  if (f.variant == Variant::Constrained) throw std::invalid_argument("el_residual: needs homogeneous or reduced data");
  validate(j, f);
  Chart sigma = f.sigma();
  SymbolicField h = to_homogeneous(f);
  HomogeneousPoisson hp = poissonize(j, fresh_fiber(j.chart, "s"));
  std::vector<Expression> y = h.x;
  y.push_back(h.s);
  std::vector<Covector> a = h.p;
  a.push_back(h.z);
  auto forms = residual_forms(hp.pi, y, a, sigma);
  std::size_t n = j.chart.dim();
  if (f.variant == Variant::Reduced) {
    const DifferentialForm& r2 = forms[n];
    for (std::size_t k = 0; k < n; ++k) {
      DifferentialForm& r3 = forms[n + 1 + k];
      r3 = (r3 - wedge(r2, to_form(f.p[k], sigma))) * (Expression(1) / f.s);
    }
  }
  return symbolic_report(forms, residual_names(j.chart, f.variant == Variant::Reduced), sigma, opts);
}

ResidualReport el_residual(const JacobiPair& j, const DiscreteField& f, double tol) {
  if (f.variant == Variant::Constrained) throw std::invalid_argument("el_residual: needs homogeneous or reduced data");
  validate(j, f);
  const SurfaceGrid& g = f.grid;
  Nodes nd = discrete_nodes(to_homogeneous(f));
  HomogeneousPoisson hp = poissonize(j, fresh_fiber(j.chart, "s"));
  Bivector bv(hp.pi, true);
  std::size_t m = bv.m, n = m - 1, size = g.size();
  // one-form residuals: (u, t) parts; two-form residuals: du^dt coefficient
  std::vector<std::vector<double>> r1u(m, std::vector<double>(size)), r1t = r1u, r2 = r1u;
  for (int i = 0; i < g.nu; ++i)
    for (int jj = 0; jj < g.nt; ++jj) {
      std::size_t k = g.at(i, jj);
      SamplePoint pt = bv.point(nd, k);
      std::vector<std::vector<double>> pv(m, std::vector<double>(m, 0.0));
      for (std::size_t a = 0; a < m; ++a)
        for (std::size_t b = 0; b < m; ++b) pv[a][b] = eval_or_zero(bv.comp[a][b], pt);
      for (std::size_t a = 0; a < m; ++a) {
        double cu = nd.yu[a][k], ct = nd.yt[a][k];
        for (std::size_t b = 0; b < m; ++b) {
          cu += pv[a][b] * nd.au[b][k];
          ct += pv[a][b] * nd.at[b][k];
        }
        r1u[a][k] = cu;
        r1t[a][k] = ct;
        double c = du(nd.at[a], g, i, jj) - dt(nd.au[a], g, i, jj);
        for (std::size_t b = 0; b < m; ++b)
          for (std::size_t cc = b + 1; cc < m; ++cc) {
            double w = eval_or_zero(bv.grad[a][b][cc], pt);
            if (w != 0.0) c += w * (nd.au[b][k] * nd.at[cc][k] - nd.at[b][k] * nd.au[cc][k]);
          }
        r2[a][k] = c;
      }
      if (f.variant == Variant::Reduced)
        for (std::size_t a = 0; a < n; ++a)
          r2[a][k] = (r2[a][k] - (r1u[n][k] * f.pt[a][k] - r1t[n][k] * f.pu[a][k])) / f.s[k];
    }

  auto names = residual_names(j.chart, f.variant == Variant::Reduced);
  ResidualReport rep;
  for (std::size_t idx = 0; idx < 2 * m; ++idx) {
    ResidualEntry e;
    e.name = names[idx];
    std::size_t a = idx % m;
    bool two = idx >= m;
    e.equation = two ? (a == n ? 4 : 3) : (a == n ? 2 : 1);
    double sq = 0.0;
    for (int i = 0; i < g.nu; ++i)
      for (int jj = 0; jj < g.nt; ++jj) {
        std::size_t k = g.at(i, jj);
        double v = two ? std::abs(r2[a][k]) : std::max(std::abs(r1u[a][k]), std::abs(r1t[a][k]));
        double v2 = two ? r2[a][k] * r2[a][k] : r1u[a][k] * r1u[a][k] + r1t[a][k] * r1t[a][k];
        sq += g.weight(i, jj) * v2;
        if (v > e.max_abs) {
          e.max_abs = v;
          e.point = {{"u", g.u(i)}, {"t", g.t(jj)}};
        }
      }
    e.l2 = std::sqrt(sq);
    e.zero = e.max_abs <= tol;
    track(rep, e);
    rep.entries.push_back(std::move(e));
  }
  return rep;
}

VBMorphism field_morphism(const JacobiPair& j, const SymbolicField& f, const std::string& fiber) {
  validate(j, f);
  SymbolicField h = to_homogeneous(f);
  RxAlgebroid rx = cotangent_rx(poissonize(j, fiber));
  Chart sigma = f.sigma();
  std::vector<Expression> base = h.x;
  base.push_back(h.s);
  std::vector<DifferentialForm> eta;
  for (const auto& c : h.p) eta.push_back(to_form(c, sigma));
  eta.push_back(to_form(h.z, sigma));
  return tangent_morphism(sigma, rx.algebroid, base, eta);
}

ConstraintReport reduced_constraint_check(const JacobiPair& j, const SymbolicField& f, const ZeroTestOptions& opts) {
  if (f.variant != Variant::Reduced) throw std::invalid_argument("reduced_constraint_check: needs reduced data");
  validate(j, f);
  Chart sigma = f.sigma();
  std::string fiber = fresh_fiber(j.chart, "s");
  HomogeneousPoisson hp = poissonize(j, fiber);
  std::vector<Expression> comps = f.x;
  comps.push_back(f.s);
  VBMorphism d0 = compute_D0phi(SmoothMap(sigma, hp.chart, comps), fiber, opts);
  std::vector<DifferentialForm> p;
  for (const auto& c : f.p) p.push_back(to_form(c, sigma));
  auto js = j_sharp_forms(j, f.x, p, to_form(f.z, sigma));
  ConstraintReport rep;
  for (std::size_t k = 0; k < js.size(); ++k) {
    DifferentialForm r = d0.fiber[k] - js[k];
    auto z = tensor_zero_test(r, sigma.box(), opts);
    if (!z.zero) rep.ok = false;
    rep.max_abs = std::max(rep.max_abs, z.max_abs);
    rep.residuals.push_back(r);
  }
  return rep;
}

SampledAPath sample_apath(const APath& a, int samples) {
  if (samples < 3) throw std::invalid_argument("sample_apath: need at least 3 samples");
  SampledAPath out;
  out.x.assign(a.x.size(), {});
  out.pi.assign(a.pi.size(), {});
  for (int k = 0; k < samples; ++k) {
    SamplePoint pt{{"u", static_cast<double>(k) / (samples - 1)}};
    for (std::size_t i = 0; i < a.x.size(); ++i) out.x[i].push_back(a.x[i].evaluate(pt));
    for (std::size_t i = 0; i < a.pi.size(); ++i) out.pi[i].push_back(a.pi[i].evaluate(pt));
    out.s.push_back(a.s.evaluate(pt));
    out.z.push_back(a.z.evaluate(pt));
  }
  return out;
}

namespace {

// (Pi^# A)^a = A_b Pi^{ba} at the point y.
std::vector<double> anchor_rhs(const Bivector& bv, const std::vector<double>& y, const std::vector<double>& a) {
  SamplePoint pt;
  for (std::size_t i = 0; i < bv.m; ++i) pt[bv.p->chart().name(i)] = y[i];
  std::vector<double> out(bv.m, 0.0);
  for (std::size_t c = 0; c < bv.m; ++c)
    for (std::size_t b = 0; b < bv.m; ++b) out[c] += a[b] * eval_or_zero(bv.comp[b][c], pt);
  return out;
}

void require_path_shape(const HomogeneousPoisson& hp, std::size_t nx, std::size_t npi) {
  std::size_t n = hp.base_dim();
  if (nx != n || npi != n) throw std::invalid_argument("apath: expected " + std::to_string(n) + " base and momentum components");
  if (hp.chart.index(hp.fiber) != static_cast<int>(n)) throw std::invalid_argument("apath: the fiber coordinate must come last");
}

}  // namespace

APathReport apath_check(const HomogeneousPoisson& hp, const APath& a, double tol, const ZeroTestOptions& opts) {
  require_path_shape(hp, a.x.size(), a.pi.size());
  for (const auto& e : a.x)
    for (const auto& v : e.free_variables())
      if (v != "u") throw std::invalid_argument("apath: variable '" + v + "' is not the path parameter");
  Bivector bv(hp.pi, false);
  std::vector<Expression> y = a.x, dy;
  y.push_back(a.s);
  for (const auto& e : y) dy.push_back(differentiate(e, "u"));
  std::vector<Expression> m = a.pi;
  m.push_back(a.z);
  auto pts = sample_points({{"u", {0.0, 1.0}}}, opts.trials, opts.seed);
  pts.push_back({{"u", 0.0}});
  pts.push_back({{"u", 1.0}});
  APathReport rep;
  for (const auto& pt : pts) {
    std::vector<double> yv, av;
    for (const auto& e : y) yv.push_back(e.evaluate(pt));
    for (const auto& e : m) av.push_back(e.evaluate(pt));
    if (!(std::abs(yv.back()) >= kMinFiber)) throw std::invalid_argument("apath: s is too close to 0");
    auto rhs = anchor_rhs(bv, yv, av);
    for (std::size_t c = 0; c < bv.m; ++c) {
      double d = std::abs(dy[c].evaluate(pt) - rhs[c]);
      if (d > rep.max_defect || rep.worst.empty()) {
        if (d > rep.max_defect) rep.max_defect = d;
        rep.worst = hp.chart.name(c);
        rep.u = pt.at("u");
      }
    }
  }
  rep.ok = rep.max_defect <= tol;
  return rep;
}

APathReport apath_check(const HomogeneousPoisson& hp, const SampledAPath& a, double tol) {
  require_path_shape(hp, a.x.size(), a.pi.size());
  std::size_t ns = a.samples();
  if (ns < 3) throw std::invalid_argument("apath: need at least 3 samples");
  auto same = [&](const std::vector<double>& v) {
    if (v.size() != ns) throw std::invalid_argument("apath: sample arrays differ in length");
  };
  for (const auto& v : a.x) same(v);
  for (const auto& v : a.pi) same(v);
  same(a.z);
  Bivector bv(hp.pi, false);
  int n = static_cast<int>(ns);
  double h = 1.0 / (n - 1);
  std::vector<const std::vector<double>*> y;
  for (const auto& v : a.x) y.push_back(&v);
  y.push_back(&a.s);
  APathReport rep;
  for (int k = 0; k < n; ++k) {
    std::vector<double> yv, av;
    for (auto* v : y) yv.push_back((*v)[static_cast<std::size_t>(k)]);
    for (const auto& v : a.pi) av.push_back(v[static_cast<std::size_t>(k)]);
    av.push_back(a.z[static_cast<std::size_t>(k)]);
    if (!(std::abs(yv.back()) >= kMinFiber)) throw std::invalid_argument("apath: s is too close to 0");
    auto rhs = anchor_rhs(bv, yv, av);
    for (std::size_t c = 0; c < bv.m; ++c) {
      const auto& v = *y[c];
      auto at = [&](int kk) { return (kk >= 0 && kk < n) ? v[static_cast<std::size_t>(kk)] : 0.0; };
      double d = std::abs(diff(at(k - 2), at(k - 1), at(k), at(k + 1), at(k + 2), k, n, h) - rhs[c]);
      if (d > rep.max_defect || rep.worst.empty()) {
        if (d > rep.max_defect) rep.max_defect = d;
        rep.worst = hp.chart.name(c);
        rep.u = k * h;
      }
    }
  }
  rep.ok = rep.max_defect <= tol;
  return rep;
}

double apath_holonomy(const JacobiPair& j, const ReducedPath& a, int intervals) {
  std::size_t n = j.chart.dim();
  if (a.x.size() != n || a.eta.size() != n) throw std::invalid_argument("apath_holonomy: wrong number of components");
  if (intervals < 2 || intervals % 2) throw std::invalid_argument("apath_holonomy: Simpson needs an even interval count");
  std::map<std::string, Expression> at;
  for (std::size_t i = 0; i < n; ++i) at[j.chart.name(i)] = a.x[i];
  Expression f(0);
  for (std::size_t i = 0; i < n; ++i) {
    Expression e = j.e.get({static_cast<int>(i)});
    if (!e.is_literal_zero()) f = f + substitute(e, at) * a.eta[i];
  }
  double h = 1.0 / intervals, sum = 0.0;
  for (int k = 0; k <= intervals; ++k) {
    double w = (k == 0 || k == intervals) ? 1.0 : (k % 2 ? 4.0 : 2.0);
    sum += w * f.evaluate({{"u", k * h}});
  }
  return std::exp(sum * h / 3.0);
}

Ex1Groupoid ex1_groupoid(int k) {
  if (k < 0) throw std::invalid_argument("ex1_groupoid: k must be nonnegative");
  Ex1Groupoid g;
  g.k = k;
  std::size_t w = g.width();
  Interval unit{-1.0, 1.0}, pos{0.5, 2.0};
  std::vector<std::string> bn, gn{"s", "t"}, rn{"t"};
  for (std::size_t i = 0; i < w; ++i) bn.push_back("x" + std::to_string(i));
  bn.push_back("s");
  for (const char* side : {"xl", "xr"})
    for (std::size_t i = 0; i < w; ++i) {
      gn.push_back(side + std::to_string(i));
      rn.push_back(side + std::to_string(i));
    }
  std::vector<Interval> bi(w, unit), gi{pos, pos}, ri{pos};
  bi.push_back(pos);
  for (std::size_t i = 0; i < 2 * w; ++i) {
    gi.push_back(unit);
    ri.push_back(unit);
  }
  std::vector<int> bw(w + 1, 0), gw(gn.size(), 0);
  bw.back() = 1;
  gw[0] = 1;
  g.base = Chart(bn, bi, bw);
  g.groupoid = Chart(gn, gi, gw);
  g.reduced = Chart(rn, ri);

  Expression s = var("s"), t = var("t");
  std::vector<Expression> al, be;
  for (std::size_t i = 0; i < w; ++i) {
    al.push_back(var("xl" + std::to_string(i)));
    be.push_back(var("xr" + std::to_string(i)));
  }
  al.push_back(s);
  be.push_back(t * s);
  g.alpha = SmoothMap(g.groupoid, g.base, al);
  g.beta = SmoothMap(g.groupoid, g.base, be);

  auto theta_on = [&](const Chart& c, const std::string& prefix) {
    DifferentialForm th = DifferentialForm::basis(c, std::vector<std::string>{prefix + "0"});
    for (int j = 1; j <= k; ++j)
      th = th - DifferentialForm::basis(c, std::vector<std::string>{prefix + std::to_string(j)},
                                        var(prefix + std::to_string(k + j)));
    return th;
  };
  g.theta = theta_on(g.base, "x");
  g.omega0 = de_rham(g.theta) * (-s) + wedge(DifferentialForm::basis(g.base, std::vector<std::string>{"s"}), g.theta);
  g.omega = pullback(g.omega0, g.alpha) - pullback(g.omega0, g.beta);
  g.theta_c = theta_on(g.reduced, "xl") - theta_on(g.reduced, "xr") * t;
  return g;
}

std::vector<Expression> Ex1Groupoid::multiply(const std::vector<Expression>& g2, const std::vector<Expression>& g1) const {
  std::size_t w = width();
  if (g1.size() != 2 + 2 * w || g2.size() != g1.size()) throw std::invalid_argument("multiply: arrows have the wrong size");
  std::vector<Expression> out{g1[0], g2[1] * g1[1]};
  for (std::size_t i = 0; i < w; ++i) out.push_back(g1[2 + i]);
  for (std::size_t i = 0; i < w; ++i) out.push_back(g2[2 + w + i]);
  return out;
}

std::vector<Expression> Ex1Groupoid::act(const Expression& nu, const std::vector<Expression>& g) const {
  std::vector<Expression> out = g;
  out.at(0) = nu * g[0];
  return out;
}

namespace {

std::vector<Expression> apply_map(const SmoothMap& m, const std::vector<Expression>& point) {
  std::map<std::string, Expression> at;
  for (std::size_t i = 0; i < point.size(); ++i) at[m.source.name(i)] = point[i];
  std::vector<Expression> out;
  for (const auto& c : m.components) out.push_back(substitute(c, at));
  return out;
}

std::vector<Expression> vars(const std::vector<std::string>& names) {
  std::vector<Expression> out;
  for (const auto& n : names) out.push_back(var(n));
  return out;
}

std::vector<std::string> indexed(const std::string& prefix, std::size_t w) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < w; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

// Zero test of a - b entrywise; records the largest sampled difference in the item.
void expect_equal(CheckItem& item, const std::vector<Expression>& a, const std::vector<Expression>& b, const Box& box,
                  const ZeroTestOptions& opts) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    auto r = zero_test(a[i] - b[i], box, opts);
    item.max_abs = std::max(item.max_abs, r.max_abs);
    if (!r.zero) item.ok = false;
  }
}

}  // namespace

GroupoidReport verify_ex1_groupoid(const Ex1Groupoid& g, const ZeroTestOptions& opts) {
  std::size_t w = g.width();
  Interval unit{-1.0, 1.0}, pos{0.5, 2.0};
  // g1 = (s1, t1, a, b), g2 = (t1 s1, t2, b, c), g3 = (t2 t1 s1, t3, c, e)
  Box box{{"s1", pos}, {"t1", pos}, {"t2", pos}, {"t3", pos}, {"nu", pos}};
  for (const char* p : {"a", "b", "c", "e"})
    for (const auto& n : indexed(p, w)) box[n] = unit;
  Expression s1 = var("s1"), t1 = var("t1"), t2 = var("t2"), t3 = var("t3"), nu = var("nu");
  auto arrow = [&](const Expression& s, const Expression& t, const char* l, const char* r) {
    std::vector<Expression> out{s, t};
    for (const auto& e : vars(indexed(l, w))) out.push_back(e);
    for (const auto& e : vars(indexed(r, w))) out.push_back(e);
    return out;
  };
  auto g1 = arrow(s1, t1, "a", "b"), g2 = arrow(t1 * s1, t2, "b", "c"), g3 = arrow(t2 * t1 * s1, t3, "c", "e");
  auto alpha = [&](const std::vector<Expression>& x) { return apply_map(g.alpha, x); };
  auto beta = [&](const std::vector<Expression>& x) { return apply_map(g.beta, x); };

  GroupoidReport rep;
  CheckItem comp{"composition", true, 0.0, "alpha(g2 g1) = alpha(g1), beta(g2 g1) = beta(g2)"};
  auto g21 = g.multiply(g2, g1);
  expect_equal(comp, alpha(g2), beta(g1), box, opts);
  expect_equal(comp, alpha(g21), alpha(g1), box, opts);
  expect_equal(comp, beta(g21), beta(g2), box, opts);

  CheckItem assoc{"associativity", true, 0.0, "(g3 g2) g1 = g3 (g2 g1)"};
  expect_equal(assoc, alpha(g3), beta(g21), box, opts);
  expect_equal(assoc, g.multiply(g.multiply(g3, g2), g1), g.multiply(g3, g21), box, opts);

  CheckItem act{"action", true, 0.0, "h_nu(g2) h_nu(g1) = h_nu(g2 g1), alpha and beta equivariant"};
  auto h1 = g.act(nu, g1), h2 = g.act(nu, g2);
  expect_equal(act, alpha(h2), beta(h1), box, opts);
  expect_equal(act, g.multiply(h2, h1), g.act(nu, g21), box, opts);
  auto scale_base = [&](std::vector<Expression> x) {
    x.back() = nu * x.back();
    return x;
  };
  expect_equal(act, alpha(h1), scale_base(alpha(g1)), box, opts);
  expect_equal(act, beta(h1), scale_base(beta(g1)), box, opts);

  CheckItem degree{"omega degree 1", true, 0.0, "push_scale(omega) = nu omega"};
  auto hr = homogeneity_test(g.omega, 1, {}, {0.5, 2.0}, opts);
  degree.ok = hr.zero;
  degree.max_abs = hr.max_abs;

  CheckItem contact{"contact", true, 0.0, ""};
  DifferentialForm top = g.theta_c, dth = de_rham(g.theta_c);
  for (std::size_t i = 0; i < w; ++i) top = wedge(top, dth);
  IndexTuple all;
  for (std::size_t i = 0; i < g.reduced.dim(); ++i) all.push_back(static_cast<int>(i));
  Expression coef = top.get(all);
  double least = -1.0;
  for (const auto& pt : sample_points(g.reduced.box(), opts.trials, opts.seed)) {
    double v = std::abs(coef.evaluate(pt));
    if (least < 0 || v < least) least = v;
  }
  contact.ok = least > 1e-9;
  contact.max_abs = least;
  contact.detail = "min |theta_c ^ (d theta_c)^" + std::to_string(2 * g.k + 1) + "| over samples";

  rep.items = {comp, assoc, act, degree, contact};
  for (const auto& it : rep.items) rep.ok = rep.ok && it.ok;
  return rep;
}

std::vector<std::string> builtin_names() {
  return {"contact-k", "moebius", "almost-poisson-family1", "almost-poisson-family2", "ex1-groupoid"};
}

namespace {

Expression profile(const Expression& f, const Expression& at) { return substitute(f, {{"w", at}}); }

Covector scaled(const Covector& a, const Expression& c) { return {c * a.du, c * a.dt}; }

Covector dcov(const Expression& f) { return {differentiate(f, "u"), differentiate(f, "t")}; }

// Solutions along one profile w: pi_j = dw for j >= 1, pi_0 = 0, z = dw, s = 2, with X solving
// dX^i/dw = -(1/s) L^{ij} + E^i on the sign-corrected contact structure.
SymbolicField contact_field(int k, const Expression& w) {
  SymbolicField f;
  Expression half = Expression::rational(1, 2);
  f.x.push_back(w - Expression::rational(k, 8) * w * w);
  for (int j = 1; j <= k; ++j) f.x.push_back(-half * w);
  for (int j = 1; j <= k; ++j) f.x.push_back(half * w);
  f.s = Expression(2);
  Covector dw = dcov(w);
  f.p.push_back({Expression(0), Expression(0)});
  for (int j = 1; j <= 2 * k; ++j) f.p.push_back(dw);
  f.z = dw;
  return f;
}

BuiltinExample almost_poisson_family(const std::string& name, std::vector<Expression> base,
                                     std::vector<Covector> eta) {
  BuiltinExample ex;
  ex.name = name;
  ex.jacobi = almost_poisson_jacobi();
  Chart sigma = sigma_chart();
  std::vector<DifferentialForm> forms;
  for (const auto& c : eta) forms.push_back(to_form(c, sigma));
  ex.morphisms.push_back(tangent_morphism(sigma, cotangent_algebroid(ex.jacobi->lambda), base, forms));
  SymbolicField f;
  f.x = std::move(base);
  f.p = std::move(eta);
  f.z = {Expression(0), Expression(0)};
  ex.fields.push_back(std::move(f));
  return ex;
}

}  // namespace

BuiltinExample builtin_example(const std::string& name, const ExampleParams& params) {
  if (name == "contact-k" || name == "ex1-groupoid") {
    BuiltinExample ex;
    ex.name = name;
    ex.jacobi = contact_jacobi(params.k, ContactVariant::Corrected);
    ex.fields.push_back(contact_field(params.k, params.X));
    if (params.k == 0) {
      // X^0 = X, s = e^{-u}: z = dX^0 and pi_0 = -ds
      SymbolicField f;
      f.x = {params.X};
      f.s = exp(-var("u"));
      f.p = {scaled(dcov(f.s), Expression(-1))};
      f.z = dcov(params.X);
      ex.fields.push_back(std::move(f));
    }
    if (name == "ex1-groupoid") ex.groupoid = ex1_groupoid(params.k);
    return ex;
  }
  if (name == "moebius") {
    BuiltinExample ex;
    ex.name = name;
    ex.atlas = moebius_atlas();
    ex.jacobi = ex.atlas->charts.front().jacobi;
    SymbolicField null;
    null.variant = Variant::Reduced;
    null.x = {Expression::rational(1, 2)};
    null.s = Expression(1);
    null.p = {{Expression(0), Expression(0)}};
    null.z = {Expression(0), Expression(0)};
    ex.fields.push_back(null);
    // X = 1/2 again, with z = du and p = e^{pi u} dt
    SymbolicField moving = null;
    moving.z = {Expression(1), Expression(0)};
    moving.p = {{Expression(0), exp(Expression::pi() * var("u"))}};
    ex.fields.push_back(moving);
    return ex;
  }
  if (name == "almost-poisson-family1") {
    const Expression& X = params.X;
    Expression g1 = differentiate(params.g, "w");
    Expression g2 = differentiate(g1, "w");
    Expression gX = profile(params.g, X), g1X = profile(g1, X), g2X = profile(g2, X), hX = profile(params.h, X);
    Covector dX = dcov(X);
    return almost_poisson_family(name, {X, g1X, X * g1X - gX},
                                 {scaled(dX, g2X), scaled(dX, -(1 + X * hX)), scaled(dX, hX)});
  }
  if (name == "almost-poisson-family2") {
    const Expression& Y = params.Y;
    Expression f1 = profile(differentiate(params.f, "w"), Y);
    Covector dY = dcov(Y);
    return almost_poisson_family(name, {Expression(1), Y, Y + params.c}, {dY, scaled(dY, f1), scaled(dY, -f1)});
  }
  throw std::invalid_argument("unknown example '" + name + "'");
}

}  // namespace jsm
