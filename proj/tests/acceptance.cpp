// One line per acceptance criterion. A criterion with a documented deviation prints FAIL with the
// reason; the exit code is nonzero only for failures that are not documented, or for a documented
// deviation that no longer reproduces.

#include "generators.hpp"
#include "jsm/sigma.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

using namespace jsm;

namespace {

// Pinned tolerances.
constexpr double kWitnessTol = 1e-12;
constexpr double kZeroTol = 1e-9;
constexpr int kSamples = 64;
constexpr double kActionTol = 1e-12;
constexpr double kQuadratureTol = 1e-10;
constexpr double kMinOrder = 1.8;
constexpr double kHolonomyTol = 1e-8;
constexpr double kRk4Tol = 1e-6;

const ZeroTestOptions kOpts{kSamples, kZeroTol, kDefaultSeed};
const Expression u = var("u"), t = var("t");
const Chart kSigma = sigma_chart();

struct Outcome {
  bool ok = true;         // every part outside the documented deviation holds
  std::string detail;
  bool deviation = false;  // the documented deviation reproduced
  std::string reason;      // non-empty when the criterion carries a documented deviation
};

void require(Outcome& o, bool cond, const std::string& what) {
  if (!cond) {
    o.ok = false;
    o.detail += (o.detail.empty() ? "" : "; ") + std::string("failed: ") + what;
  }
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

Covector dcov(const Expression& f) { return {differentiate(f, "u"), differentiate(f, "t")}; }
Expression wedge_coef(const Covector& a, const Covector& b) { return a.du * b.dt - a.dt * b.du; }

// ---------------------------------------------------------------- 1
Outcome jacobi_detection() {
  Outcome o;
  o.reason = "the contact pair as printed is not Jacobi for k >= 1; the sign-corrected pair is";
  bool printed_k0 = jacobi_check(contact_jacobi(0), kOpts).is_jacobi;
  bool printed_k1 = jacobi_check(contact_jacobi(1), kOpts).is_jacobi;
  bool printed_k2 = jacobi_check(contact_jacobi(2), kOpts).is_jacobi;
  require(o, printed_k0, "contact k = 0");
  for (int k : {0, 1, 2}) require(o, jacobi_check(contact_jacobi(k, ContactVariant::Corrected), kOpts).is_jacobi, "corrected contact k = " + std::to_string(k));
  JacobiCheck ap = jacobi_check(almost_poisson_jacobi(), kOpts);
  require(o, !ap.is_jacobi && ap.witness.has_value(), "almost-Poisson rejected with a witness");
  double worst = 0.0;
  if (ap.witness) {
    bool slots = ap.witness->slots == std::vector<std::string>{"x", "y", "z"};
    require(o, slots, "witness slots (x, y, z)");
    JacobiPair j = almost_poisson_jacobi();
    for (const auto& p : sample_points(j.chart.box(), kSamples, kDefaultSeed))
      worst = std::max(worst, std::abs(ap.witness->value.evaluate(p) - 1.0));
    require(o, worst <= kWitnessTol, "witness value 1 at every sample");
  }
  o.deviation = !printed_k1 && !printed_k2;
  o.detail = (o.detail.empty() ? "" : o.detail + "; ") + "printed k=0/1/2: " + (printed_k0 ? "pass" : "fail") + "/" +
             (printed_k1 ? "pass" : "fail") + "/" + (printed_k2 ? "pass" : "fail") +
             ", corrected k=0..2 pass, almost-Poisson witness |J - 1| <= " + num(worst);
  return o;
}

// ---------------------------------------------------------------- 2
Outcome sn_lift() {
  Outcome o;
  std::vector<std::pair<std::string, MultivectorField>> cases{
      {"almost-Poisson", almost_poisson_jacobi().lambda},
      {"contact k=1", contact_jacobi(1).lambda},
      {"corrected contact k=1", contact_jacobi(1, ContactVariant::Corrected).lambda}};
  testgen::ExprGen gen(2024, {"x", "y", "z"});
  Chart c3({"x", "y", "z"}, {{-1, 1}, {-1, 1}, {-1, 1}});
  for (int i = 0; i < 10; ++i) {
    MultivectorField p(c3, 2);
    p.set({0, 1}, gen.polynomial(3, 2));
    p.set({0, 2}, gen.polynomial(3, 2));
    p.set({1, 2}, gen.polynomial(3, 2));
    cases.push_back({"random " + std::to_string(i + 1), p});
  }
  double worst = 0.0;
  for (const auto& [name, p] : cases) {
    MultivectorField lift = tangent_lift(p);
    TensorZeroResult r = tensor_zero_test(schouten(lift, lift) - tangent_lift(schouten(p, p)), lift.chart().box(), kOpts);
    worst = std::max(worst, r.max_abs);
    require(o, r.zero, name);
  }
  o.detail = (o.detail.empty() ? "" : o.detail + "; ") + std::to_string(cases.size()) + " bivectors, max residual " + num(worst);
  return o;
}

// ---------------------------------------------------------------- 3
Outcome homogeneity() {
  Outcome o;
  o.reason = "the table (0,1,1,0) leaves d_T Pi invariant only on (x,s,pi,z); on (x,s,xdot,sdot) the lift is (0,1,-1,0)";
  for (const auto& j : {contact_jacobi(0), contact_jacobi(1), contact_jacobi(2, ContactVariant::Corrected), almost_poisson_jacobi()})
    require(o, homogeneity_check(poissonize(j), kOpts).zero, "poissonize degree -1");
  for (int k : {0, 1}) {
    Ex1Groupoid g = ex1_groupoid(k);
    require(o, homogeneity_test(g.omega0, 1, {}, {0.5, 2.0}, kOpts).zero, "omega_0 degree 1");
    require(o, homogeneity_test(g.omega, 1, {}, {0.5, 2.0}, kOpts).zero, "omega degree 1");
  }
  bool stated_holds = true;
  for (const auto& j : {contact_jacobi(1, ContactVariant::Corrected), almost_poisson_jacobi()}) {
    HomogeneousPoisson hp = poissonize(j);
    MultivectorField lift = tangent_lift(hp.pi);
    auto acts = lifted_actions(hp);
    std::size_t n = hp.chart.dim();
    std::vector<int> hat(2 * n, 0), stated(2 * n, 0), star(2 * n, 0);
    hat[n - 1] = 1;
    hat[2 * n - 1] = 1;
    stated[n - 1] = 1;
    for (std::size_t i = n; i < 2 * n - 1; ++i) stated[i] = 1;
    star = stated;
    require(o, acts[0].weights == hat, "hat_h weights (0,1,0,1)");
    require(o, homogeneity_test(lift, -1, hat, {0.5, 2.0}, kOpts).zero, "d_T Pi degree -1 under hat_h");
    require(o, acts[3].weights == star, "h* weights (0,1,1,0) on (x,s,pi,z)");
    RxAlgebroid rx = cotangent_rx(hp);
    require(o, rx_check(rx, {0.5, 2.0}, kOpts).ok, "h* acts by algebroid automorphisms");
    stated_holds = stated_holds && acts[1].weights == stated && homogeneity_test(lift, -1, stated, {0.5, 2.0}, kOpts).zero;
  }
  o.deviation = !stated_holds;
  o.detail = (o.detail.empty() ? "" : o.detail + "; ") +
             "degree -1 and +1 checks pass, (0,1,0,1) reproduces, (0,1,1,0) on the tangent chart " +
             (stated_holds ? "reproduces" : "does not reproduce");
  return o;
}

// ---------------------------------------------------------------- 4
bool same(const Expression& a, const Expression& b) { return normalize(a - b).is_literal_zero(); }

Outcome algebroid_extraction() {
  Outcome o;
  MultivectorField lam = almost_poisson_jacobi().lambda;
  MultivectorField lift = tangent_lift(lam);
  AlgebroidStructure a = from_linear_bivector(lift, {"x_dot", "y_dot", "z_dot"});
  Expression x = var("x");
  // rows over (x, y, z)
  std::vector<std::vector<Expression>> rho{{0, 1, x}, {-1, 0, 0}, {-x, 0, 0}};
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t c = 0; c < 3; ++c) require(o, same(a.anchor(i, c), rho[i][c]), "anchor row " + a.fiber().name(i));
  int nonzero = 0;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = i + 1; j < 3; ++j)
      for (const auto& e : bracket_coefficients(a, i, j))
        if (!normalize(e).is_literal_zero()) ++nonzero;
  std::vector<Expression> zx = bracket_coefficients(a, 2, 0);
  require(o, same(zx[0], Expression(1)) && same(zx[1], 0) && same(zx[2], 0), "[dz, dx] = dx");
  require(o, nonzero == 1, "sole bracket");
  o.detail = (o.detail.empty() ? "" : o.detail + "; ") + "rho(dx) = d_y + x d_z, rho(dy) = -d_x, rho(dz) = -x d_x, [dz,dx] = dx";
  return o;
}

// ---------------------------------------------------------------- 5
Outcome solution_families() {
  Outcome o;
  int perturbations = 0;
  for (const char* name : {"almost-poisson-family1", "almost-poisson-family2"}) {
    BuiltinExample ex = builtin_example(name);
    const VBMorphism& m = ex.morphisms[0];
    MorphismReport r = morphism_check(m, kOpts);
    require(o, r.ok, std::string(name) + " passes");
    for (const auto& f : r.anchor_residuals) require(o, is_zero(f, kOpts), std::string(name) + " anchor residual zero");
    for (const auto& f : r.bracket_residuals) require(o, is_zero(f, kOpts), std::string(name) + " bracket residual zero");
    for (std::size_t k = 0; k < m.fiber.size(); ++k) {
      if (is_zero(m.fiber[k], kOpts)) continue;
      std::vector<AlgebroidForm> rows = m.fiber;
      rows[k] = -rows[k];
      MorphismReport p = morphism_check(VBMorphism(m.source, m.target, m.base, rows), kOpts);
      require(o, !p.ok && p.max_abs > kZeroTol && !p.worst.empty(), std::string(name) + " sign flip of row " + std::to_string(k));
      ++perturbations;
    }
  }
  o.detail = (o.detail.empty() ? "" : o.detail + "; ") + "both families pass, " + std::to_string(perturbations) +
             " single-sign perturbations fail with a localized residual";
  return o;
}

// ---------------------------------------------------------------- 6
Outcome metamorphic() {
  Outcome o;
  RxAlgebroid rx = cotangent_rx(poissonize(contact_jacobi(0)));
  testgen::ExprGen gen(606, {"u", "t"});
  int agree = 0, pass = 0, n = 24;
  for (int i = 0; i < n; ++i) {
    Expression X = gen.smooth(2);
    Expression s = Expression::rational(5, 4) + sin(gen.smooth(2)) / 4;
    DifferentialForm zero(kSigma, 1), extra = differential(kSigma, gen.smooth(2)) * gen.smooth(1);
    bool perturb = i % 2 == 1, on_z = i % 4 == 1;
    DifferentialForm pi = -differential(kSigma, s) + (perturb && !on_z ? extra : zero);
    DifferentialForm z = differential(kSigma, X) + (perturb && on_z ? extra : zero);
    VBMorphism phi = tangent_morphism(kSigma, rx.algebroid, {X, s}, {pi, z});
    bool a = morphism_check(phi, kOpts).ok;
    bool b = jacobi_morphism_check(lift_phi_to_psi(phi, rx), kOpts).ok;
    agree += a == b;
    pass += a;
  }
  require(o, agree == n, "morphism_check equals jacobi_morphism_check");
  require(o, pass > 0 && pass < n, "both verdicts occur");
  o.detail = (o.detail.empty() ? "" : o.detail + "; ") + std::to_string(agree) + "/" + std::to_string(n) +
             " fields agree (" + std::to_string(pass) + " morphisms)";
  return o;
}

// ---------------------------------------------------------------- 7
std::map<std::string, Expression> at_field(const JacobiPair& j, const std::vector<Expression>& x) {
  std::map<std::string, Expression> at;
  for (std::size_t i = 0; i < x.size(); ++i) at[j.chart.name(i)] = x[i];
  return at;
}

Expression constrained_density(const JacobiPair& j, const SymbolicField& f) {
  auto at = at_field(j, f.x);
  Expression c(0);
  int n = static_cast<int>(j.chart.dim());
  for (int i = 0; i < n; ++i) {
    const Covector& ei = f.p[static_cast<std::size_t>(i)];
    c = c + wedge_coef(ei, dcov(f.x[static_cast<std::size_t>(i)]));
    c = c - substitute(j.e.get({i}), at) * wedge_coef(ei, f.z);
    for (int k = i + 1; k < n; ++k)
      c = c + substitute(j.lambda.get({i, k}), at) * wedge_coef(ei, f.p[static_cast<std::size_t>(k)]);
  }
  return c;
}

double trapezoid(const Expression& density, int n) {
  double hu = 1.0 / (n - 1), ht = 2.0 / (n - 1), sum = 0.0;
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) {
      double w = hu * ht * ((i == 0 || i == n - 1) ? 0.5 : 1.0) * ((k == 0 || k == n - 1) ? 0.5 : 1.0);
      sum += w * density.evaluate({{"u", i * hu}, {"t", -1.0 + k * ht}});
    }
  return sum;
}

Outcome action_equivalence() {
  Outcome o;
  testgen::ExprGen gen(707, {"u", "t"});
  double worst = 0.0, worst_q = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    JacobiPair j = trial % 2 ? almost_poisson_jacobi() : contact_jacobi(1, ContactVariant::Corrected);
    SymbolicField r;
    r.variant = Variant::Reduced;
    for (int i = 0; i < 3; ++i) {
      r.x.push_back(gen.smooth(2));
      r.p.push_back({gen.smooth(2), gen.smooth(2)});
    }
    r.s = Expression::rational(3, 2) + sin(gen.smooth(2)) / 2;
    r.z = {gen.smooth(2), gen.smooth(2)};
    SurfaceGrid g(33, 33);
    worst = std::max(worst, std::abs(action(Variant::Reduced, j, r, g) - action(Variant::Homogeneous, j, to_homogeneous(r), g)));
    SymbolicField c = r;
    c.variant = Variant::Constrained;
    worst_q = std::max(worst_q, std::abs(action(Variant::Constrained, j, c, g) - trapezoid(constrained_density(j, c), 33)));
  }
  require(o, worst <= kActionTol, "reduced = homogeneous");
  require(o, worst_q <= kQuadratureTol, "constrained vs independent quadrature");
  o.detail = (o.detail.empty() ? "" : o.detail + "; ") + "5 configurations, |reduced - homogeneous| <= " + num(worst) +
             ", |constrained - oracle| <= " + num(worst_q);
  return o;
}

// ---------------------------------------------------------------- 8
Outcome discrete_consistency() {
  Outcome o;
  ExampleParams params;
  params.k = 0;
  params.X = sin(u * t) + u;
  BuiltinExample ex = builtin_example("contact-k", params);
  const SymbolicField& f = ex.fields.back();
  require(o, el_residual(*ex.jacobi, f, kOpts).ok, "symbolic solution has zero residual");
  std::vector<double> norms;
  for (int n : {33, 65, 129}) norms.push_back(el_residual(*ex.jacobi, tabulate(f, SurfaceGrid(n, n))).max_abs);
  double o1 = std::log2(norms[0] / norms[1]), o2 = std::log2(norms[1] / norms[2]);
  require(o, o1 >= kMinOrder && o2 >= kMinOrder, "order >= 1.8");
  o.detail = (o.detail.empty() ? "" : o.detail + "; ") + "max-norms " + num(norms[0]) + ", " + num(norms[1]) + ", " +
             num(norms[2]) + "; orders " + num(o1) + ", " + num(o2);
  return o;
}

// ---------------------------------------------------------------- 9
double rk4(const std::function<double(double, double)>& f, double y0, int steps) {
  double h = 1.0 / steps, y = y0;
  for (int k = 0; k < steps; ++k) {
    double x = k * h;
    double k1 = f(x, y), k2 = f(x + h / 2, y + h * k1 / 2), k3 = f(x + h / 2, y + h * k2 / 2), k4 = f(x + h, y + h * k3);
    y += h * (k1 + 2 * k2 + 2 * k3 + k4) / 6;
  }
  return y;
}

Outcome holonomy() {
  Outcome o;
  JacobiPair c0 = contact_jacobi(0);
  double worst = 0.0;
  for (int twice : {-2, 1, 4}) {
    double c = twice / 2.0;
    worst = std::max(worst, std::abs(apath_holonomy(c0, {{u * u}, {Expression::rational(twice, 2)}}) - std::exp(c)));
  }
  require(o, worst <= kHolonomyTol, "e^c");
  JacobiPair c1 = contact_jacobi(1, ContactVariant::Corrected);
  ReducedPath path{{sin(u), u, u * u}, {cos(3 * u) + u * u, Expression(1), u}};
  double hol = apath_holonomy(c1, path);
  // d s / du = + s E^j eta_j, the sign of the displayed reduced equations
  double ode = rk4([](double x, double y) { return y * (std::cos(3 * x) + x * x); }, 1.0, 4000);
  require(o, std::abs(hol - ode) <= kRk4Tol, "RK4 agreement");
  auto part = [&](const Expression& map) {
    ReducedPath out;
    std::map<std::string, Expression> at{{"u", map}};
    for (const auto& e : path.x) out.x.push_back(substitute(e, at));
    for (const auto& e : path.eta) out.eta.push_back(substitute(e, at) * differentiate(map, "u"));
    return out;
  };
  double split = apath_holonomy(c1, part(u / 2)) * apath_holonomy(c1, part((1 + u) / 2));
  require(o, std::abs(split - hol) <= kHolonomyTol, "concatenation");
  o.detail = (o.detail.empty() ? "" : o.detail + "; ") + "|hol - e^c| <= " + num(worst) + ", |hol - RK4| = " +
             num(std::abs(hol - ode)) + ", |split - whole| = " + num(std::abs(split - hol));
  return o;
}

// ---------------------------------------------------------------- 10
Outcome moebius() {
  Outcome o;
  o.reason = "the varied action gives d p = + pi sin(pi X) z ^ p; the display has the opposite sign";
  require(o, atlas_check(moebius_atlas(), kOpts).ok, "atlas with E = cos(pi x)");
  require(o, !atlas_check(moebius_atlas(Expression(1), Expression(1)), kOpts).ok, "atlas with E = 1 rejected");
  BuiltinExample ex = builtin_example("moebius");
  const JacobiPair& j = *ex.jacobi;
  testgen::ExprGen gen(1010, {"u", "t"});
  Expression pi = Expression::pi();
  bool display4 = true;
  for (int trial = 0; trial < 3; ++trial) {
    SymbolicField f;
    f.variant = Variant::Reduced;
    f.x = {gen.smooth(2)};
    f.s = Expression::rational(3, 2) + sin(gen.smooth(2)) / 2;
    f.p = {{gen.smooth(2), gen.smooth(2)}};
    f.z = {gen.smooth(2), gen.smooth(2)};
    ResidualReport r = el_residual(j, f, kOpts);
    DifferentialForm z = to_form(f.z, kSigma), p = to_form(f.p[0], kSigma);
    Expression c = cos(pi * f.x[0]), s = sin(pi * f.x[0]);
    std::map<std::string, DifferentialForm> got;
    for (const auto& e : r.entries) got[e.name] = e.form;
    require(o, is_zero(got["dX:x"] - (differential(kSigma, f.x[0]) - z * c), kOpts), "d X = cos(pi X) z");
    require(o, is_zero(got["ds"] - (differential(kSigma, f.s) + p * (f.s * c)), kOpts), "d s = -s cos(pi X) p");
    require(o, is_zero(got["dz"] - de_rham(z), kOpts), "d z = 0");
    display4 = display4 && is_zero(got["dp:x"] - (de_rham(p) + wedge(z, p) * (pi * s)), kOpts);
  }
  ResidualReport null = el_residual(j, ex.fields[0], kOpts);
  require(o, null.ok && null.max_abs == 0.0, "null solution X = 1/2");
  o.deviation = !display4;
  o.detail = (o.detail.empty() ? "" : o.detail + "; ") +
             "atlas pass/reject, three displayed equations match, d p display " + (display4 ? "matches" : "differs in sign") +
             ", null residual " + num(null.max_abs);
  return o;
}

// ---------------------------------------------------------------- 11
Outcome groupoid() {
  Outcome o;
  std::string summary;
  for (int k : {0, 1}) {
    GroupoidReport r = verify_ex1_groupoid(ex1_groupoid(k), kOpts);
    require(o, r.items.size() == 5, "five checks");
    for (const auto& item : r.items) require(o, item.ok, "k = " + std::to_string(k) + " " + item.name);
    summary += (summary.empty() ? "" : ", ") + std::string("k=") + std::to_string(k) + " " + (r.ok ? "5/5" : "fail");
    require(o, !homogeneity_test(ex1_groupoid(k).omega, 0, {}, {0.5, 2.0}, kOpts).zero, "omega not degree 0");
  }
  o.detail = (o.detail.empty() ? "" : o.detail + "; ") + summary;
  return o;
}

// ---------------------------------------------------------------- 12
std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome cli_determinism() {
  Outcome o;
  int identical = 0;
  for (const auto& name : builtin_names()) {
    std::string a = "/tmp/jsm_acceptance_" + name + ".a.json", b = "/tmp/jsm_acceptance_" + name + ".b.json";
    std::string base = std::string("\"") + JSM_TOOL + "\" example " + name + " --json ";
    int ra = std::system((base + a + " > /dev/null").c_str());
    int rb = std::system((base + b + " > /dev/null").c_str());
    require(o, ra == 0 && rb == 0, name + " exits 0");
    std::string ta = slurp(a), tb = slurp(b);
    require(o, !ta.empty() && ta == tb, name + " byte-identical");
    identical += !ta.empty() && ta == tb;
  }
  o.detail = (o.detail.empty() ? "" : o.detail + "; ") + std::to_string(identical) + "/5 names byte-identical";
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    Outcome (*run)();
  };
  const Criterion criteria[] = {
      {"Jacobi detection", jacobi_detection},
      {"SN/tangent-lift compatibility", sn_lift},
      {"homogeneity", homogeneity},
      {"algebroid extraction", algebroid_extraction},
      {"solution families", solution_families},
      {"Phi vs Psi metamorphic suite", metamorphic},
      {"action equivalence", action_equivalence},
      {"discrete consistency", discrete_consistency},
      {"holonomy", holonomy},
      {"Moebius suite", moebius},
      {"contact groupoid", groupoid},
      {"CLI determinism", cli_determinism},
  };
  int undocumented = 0, index = 0;
  for (const auto& c : criteria) {
    ++index;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.ok = false;
      o.detail = std::string("exception: ") + e.what();
    }
    std::string status;
    if (!o.ok) {
      status = "FAIL";
      ++undocumented;
    } else if (!o.reason.empty() && o.deviation) {
      status = "FAIL (documented deviation: " + o.reason + ")";
    } else if (!o.reason.empty()) {
      status = "FAIL (documented deviation did not reproduce)";
      ++undocumented;
    } else {
      status = "PASS";
    }
    std::printf("criterion %2d %s: %s | %s\n", index, status.c_str(), c.name, o.detail.c_str());
  }
  std::printf("undocumented failures: %d\n", undocumented);
  return undocumented == 0 ? 0 : 1;
}
