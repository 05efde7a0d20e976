#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "generators.hpp"
#include "jsm/algebroid.hpp"

#include <cmath>

using namespace jsm;

namespace {

const Chart kUT({"u", "t"}, {{-0.5, 0.5}, {-0.5, 0.5}});
const Chart kXY({"x", "y"}, {{-1, 1}, {-1, 1}});

DifferentialForm d(const Expression& f) { return differential(kUT, f); }

// Test-side oracle for T*M of a bivector: rho^a_i = P^{ia}, c^k_{ij} = d_k P^{ij}.
void expect_cotangent_data(const AlgebroidStructure& a, const MultivectorField& p) {
  const Chart& m = p.chart();
  Box box = m.box();
  REQUIRE(a.rank() == m.dim());
  REQUIRE(a.base().names() == m.names());
  for (std::size_t i = 0; i < m.dim(); ++i)
    for (std::size_t b = 0; b < m.dim(); ++b)
      CHECK(is_zero(a.anchor(i, b) - p.get({static_cast<int>(i), static_cast<int>(b)}), box));
  for (std::size_t k = 0; k < m.dim(); ++k)
    for (std::size_t i = 0; i < m.dim(); ++i)
      for (std::size_t j = 0; j < m.dim(); ++j) {
        Expression oracle = differentiate(p.get({static_cast<int>(i), static_cast<int>(j)}), m.name(k));
        CHECK(is_zero(a.c(k, i, j) - oracle, box));
      }
}

// Almost-Poisson family 1 as built in: eta_x = g''(X) dX, eta_y = -(1 + X h(X)) dX, eta_z = h(X) dX,
// with g(w) = w^3, h(w) = w, X = u + t.
struct Family {
  std::vector<Expression> base;
  std::vector<DifferentialForm> eta;
};

Family family_one(int eta_z_sign = 1) {
  Expression X = var("u") + var("t");
  Expression g = pow(X, 3), g1 = 3 * pow(X, 2), g2 = 6 * X, h = X;
  DifferentialForm dX = d(X);
  return {{X, g1, X * g1 - g}, {dX * g2, dX * (-(1 + X * h)), dX * (eta_z_sign * h)}};
}

Family family_two() {
  Expression Y = var("u") + 2 * var("t");
  Expression f1 = cos(Y);  // f = sin
  DifferentialForm dY = d(Y);
  return {{Expression(1), Y, Y + Expression::rational(1, 3)}, {dY, dY * f1, dY * (-f1)}};
}

}  // namespace

TEST_CASE("tangent algebroid reduces to the de Rham differential") {
  AlgebroidStructure t = tangent_algebroid(kXY);
  testgen::ExprGen gen(60, {"x", "y"});
  for (int i = 0; i < 10; ++i) {
    Expression f = gen.smooth(3);
    CHECK(is_zero(algebroid_d(t, t.function(f)) - differential(kXY, f)));
    DifferentialForm a(kXY, 1);
    a.add({0}, gen.smooth(2));
    a.add({1}, gen.smooth(2));
    CHECK(is_zero(algebroid_d(t, a) - de_rham(a)));
  }
  CHECK(is_lie(t));
  CHECK_THROWS_AS(algebroid_d(t, DifferentialForm(kXY, 3)), std::invalid_argument);
}

TEST_CASE("from_linear_bivector: rank 1 and error reporting") {
  Chart c({"x", "xi"}, {{-1, 1}, {-1, 1}});
  auto a = from_linear_bivector(MultivectorField::basis(c, {"xi", "x"}), {"xi"});
  CHECK(a.rank() == 1);
  CHECK(a.anchor(0, 0).is_literal_one());
  CHECK(a.lie().has_value());
  CHECK(*a.lie());

  Chart c2({"x", "y", "xi", "eta"}, {{-1, 1}, {-1, 1}, {-1, 1}, {-1, 1}});
  Expression xi = var("xi"), eta = var("eta");
  auto expect_error = [&](const MultivectorField& p, const std::string& fragment) {
    try {
      from_linear_bivector(p, {"xi", "eta"});
      FAIL("expected NonlinearBivector");
    } catch (const NonlinearBivector& e) {
      CHECK(std::string(e.what()).find(fragment) != std::string::npos);
    }
  };
  expect_error(MultivectorField::basis(c2, {"xi", "eta"}, xi * xi), "(xi, eta)");
  expect_error(MultivectorField::basis(c2, {"x", "y"}, var("x")), "(x, y)");
  expect_error(MultivectorField::basis(c2, {"xi", "x"}, eta), "(xi, x)");
}

TEST_CASE("almost-Poisson cotangent algebroid: anchor, bracket and d") {
  JacobiPair ap = almost_poisson_jacobi();
  // the displayed lift: xdot d_xdot ^ d_zdot + d_xdot ^ (d_y + x d_z) - x d_zdot ^ d_x - d_ydot ^ d_x
  MultivectorField lift = tangent_lift(ap.lambda);
  const Chart& tc = lift.chart();
  Expression x = var("x");
  MultivectorField display = MultivectorField::basis(tc, {"x_dot", "z_dot"}, var("x_dot")) +
                             MultivectorField::basis(tc, {"x_dot", "y"}) + MultivectorField::basis(tc, {"x_dot", "z"}, x) -
                             MultivectorField::basis(tc, {"z_dot", "x"}, x) - MultivectorField::basis(tc, {"y_dot", "x"});
  CHECK(is_zero(lift - display));

  auto a = cotangent_algebroid(ap.lambda);
  expect_cotangent_data(a, ap.lambda);
  Box box = a.base().box();
  // rho(dx) = d_y + x d_z, rho(dy) = -d_x, rho(dz) = -x d_x
  CHECK(a.anchor(0, 1).is_literal_one());
  CHECK(a.anchor(0, 2).equal(x));
  CHECK(is_zero(a.anchor(1, 0) + 1, box));
  CHECK(is_zero(a.anchor(2, 0) + x, box));
  // the only nontrivial bracket is [dz, dx] = dx
  auto zx = bracket_coefficients(a, 2, 0);
  CHECK(zx[0].is_literal_one());
  CHECK(zx[1].is_literal_zero());
  CHECK(zx[2].is_literal_zero());
  CHECK(is_zero(bracket_coefficients(a, 0, 1)[0], box));
  CHECK(is_zero(bracket_coefficients(a, 1, 2)[0], box));
  int nonzero = 0;
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = i + 1; j < 3; ++j) nonzero += a.c(k, i, j).is_literal_zero() ? 0 : 1;
  CHECK(nonzero == 1);

  // generators x_dot, y_dot, z_dot stand for the sections d_x, d_y, d_z
  const Chart& f = a.fiber();
  auto dx = algebroid_d(a, a.function(var("x")));
  CHECK(is_zero(dx - (-AlgebroidForm::basis(f, {"y_dot"}) - AlgebroidForm::basis(f, {"z_dot"}, x)), box));
  CHECK(is_zero(algebroid_d(a, a.function(var("y"))) - AlgebroidForm::basis(f, {"x_dot"}), box));
  CHECK(is_zero(algebroid_d(a, a.function(var("z"))) - AlgebroidForm::basis(f, {"x_dot"}, x), box));
  CHECK(is_zero(algebroid_d(a, a.generator(0)) - AlgebroidForm::basis(f, {"z_dot", "x_dot"}), box));
  CHECK(is_zero(algebroid_d(a, a.generator(1)), box));
  CHECK(is_zero(algebroid_d(a, a.generator(2)), box));
}

TEST_CASE("is_lie: contact-derived, almost-Poisson and the printed contact tensors") {
  for (int k : {0, 1}) {
    auto hp = poissonize(contact_jacobi(k, ContactVariant::Corrected));
    auto a = cotangent_algebroid(hp.pi);
    CHECK(is_lie(a));
    CHECK(a.lie().value());
    for (std::size_t b = 0; b < a.base().dim(); ++b) {
      auto d1 = algebroid_d(a, a.function(a.base().coordinate(b)));
      CHECK(is_zero(algebroid_d(a, d1), a.base().box()));
    }
  }
  auto printed = cotangent_algebroid(poissonize(contact_jacobi(1)).pi);
  CHECK_FALSE(is_lie(printed));

  auto a = cotangent_algebroid(almost_poisson_jacobi().lambda);
  auto r = lie_check(a);
  CHECK_FALSE(r.is_lie);
  CHECK_FALSE(a.lie().value());
  REQUIRE(!r.witness.empty());
  double worst = 0.0;
  for (const auto& [idx, v] : r.form.components()) worst = std::max(worst, std::abs(v.evaluate(r.point)));
  CHECK(worst > 1e-6);
  // d^2 x = d(-y_dot - x z_dot) = -dx ^ z_dot - x d z_dot, nonzero
  auto dd = algebroid_d(a, algebroid_d(a, a.function(var("x"))));
  CHECK_FALSE(is_zero(dd, a.base().box()));
}

TEST_CASE("tangent lift of the k=0 contact Pi matches the Pi# anchor rows") {
  // Pi#(x, s, pi, z) = (x, s, s^{-1} L^{kj} pi_k + E^j z, -E^k pi_k) with L = 0, E = d_x0
  auto hp = poissonize(contact_jacobi(0));
  auto rx = cotangent_rx(hp);
  const auto& a = rx.algebroid;
  CHECK(a.base().names() == std::vector<std::string>{"x0", "s"});
  CHECK(a.fiber().names() == std::vector<std::string>{"x0_dot", "s_dot"});
  Box box = a.base().box();
  CHECK(is_zero(a.anchor(0, 0), box));      // pi -> x: s^{-1} L = 0
  CHECK(is_zero(a.anchor(0, 1) + 1, box));  // pi -> s: -E
  CHECK(is_zero(a.anchor(1, 0) - 1, box));  // z -> x: E
  CHECK(is_zero(a.anchor(1, 1), box));      // z -> s
  expect_cotangent_data(a, hp.pi);
  CHECK(is_lie(a));
}

TEST_CASE("property: from_linear_bivector inverts rebuild_bivector") {
  testgen::ExprGen gen(61, {"x", "y"});
  for (int trial = 0; trial < 8; ++trial) {
    std::size_t n = 2 + static_cast<std::size_t>(trial % 2);
    std::vector<std::string> names;
    std::vector<Interval> ivs;
    for (std::size_t i = 0; i < n; ++i) {
      names.push_back("e" + std::to_string(i));
      ivs.push_back({-1, 1});
    }
    Chart fiber(names, ivs);
    std::vector<std::vector<Expression>> anchor(n);
    for (auto& row : anchor)
      for (int b = 0; b < 2; ++b) row.push_back(gen.polynomial(2, 2));
    std::vector<MultivectorField> cs(n, MultivectorField(fiber, 2));
    for (auto& ck : cs)
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) ck.add({static_cast<int>(i), static_cast<int>(j)}, gen.smooth(2));
    AlgebroidStructure a(kXY, fiber, anchor, cs);
    auto back = from_linear_bivector(rebuild_bivector(a), names);
    Box box = kXY.box();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t b = 0; b < 2; ++b) CHECK(is_zero(back.anchor(i, b) - a.anchor(i, b), box));
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t k = 0; k < n; ++k) CHECK(is_zero(back.c(k, i, j) - a.c(k, i, j), box));
    }
    CHECK(is_zero(rebuild_bivector(back) - rebuild_bivector(a)));
  }
}

TEST_CASE("morphism_check: trivial, almost-Poisson families and broken variants") {
  auto a = cotangent_algebroid(almost_poisson_jacobi().lambda);
  DifferentialForm zero(kUT, 1);
  auto constant = tangent_morphism(kUT, a, {Expression(0), Expression::rational(1, 2), Expression(0)}, {zero, zero, zero});
  CHECK(morphism_check(constant).ok);

  auto f1 = family_one();
  auto r1 = morphism_check(tangent_morphism(kUT, a, f1.base, f1.eta));
  CHECK(r1.ok);
  CHECK(r1.anchor_residuals.size() == 3);
  CHECK(r1.bracket_residuals.size() == 3);
  auto f2 = family_two();
  CHECK(morphism_check(tangent_morphism(kUT, a, f2.base, f2.eta)).ok);

  auto flipped = family_one(-1);
  auto rf = morphism_check(tangent_morphism(kUT, a, flipped.base, flipped.eta));
  CHECK_FALSE(rf.ok);
  CHECK(rf.worst == "anchor x");
  // dX + eta_y + X eta_z = -2 X^2 dX on the flipped family
  Expression X = var("u") + var("t");
  CHECK(is_zero(rf.anchor_residuals[0] + d(X) * (2 * X * X)));
  CHECK(is_zero(rf.anchor_residuals[1]));
  CHECK(is_zero(rf.anchor_residuals[2]));

  // the printed tuple (g'' dX, h dX, -(1+h) dX)
  Expression h = X;
  auto r_printed = morphism_check(tangent_morphism(kUT, a, f1.base, {d(X) * (6 * X), d(X) * h, d(X) * (-(1 + h))}));
  CHECK_FALSE(r_printed.ok);

  CHECK_THROWS_AS(tangent_morphism(kUT, a, f1.base, {zero, zero}), std::invalid_argument);
  CHECK_THROWS_AS(tangent_morphism(kUT, a, {X, X}, f1.eta), std::invalid_argument);
}

TEST_CASE("property: passing almost-Poisson morphisms pull back closed forms") {
  JacobiPair ap = almost_poisson_jacobi();
  auto a = cotangent_algebroid(ap.lambda);
  for (const auto& fam : {family_one(), family_two()}) {
    REQUIRE(morphism_check(tangent_morphism(kUT, a, fam.base, fam.eta)).ok);
    std::map<std::string, Expression> at{{"x", fam.base[0]}, {"y", fam.base[1]}, {"z", fam.base[2]}};
    for (int i = 0; i < 3; ++i) {
      DifferentialForm acc(kUT, 1);
      for (int j = 0; j < 3; ++j) acc = acc + fam.eta[static_cast<std::size_t>(j)] * substitute(ap.lambda.get({j, i}), at);
      CHECK(is_zero(de_rham(acc)));
    }
  }
}

TEST_CASE("identity and composition of morphisms") {
  std::vector<AlgebroidStructure> algebroids{tangent_algebroid(kXY), cotangent_algebroid(almost_poisson_jacobi().lambda),
                                             cotangent_algebroid(poissonize(contact_jacobi(1, ContactVariant::Corrected)).pi)};
  for (const auto& a : algebroids) CHECK(morphism_check(identity_morphism(a)).ok);

  auto a = algebroids[1];
  auto fam = family_one();
  auto phi = tangent_morphism(kUT, a, fam.base, fam.eta);
  // T psi for psi(v, w) = (v w, v - w) from a second surface
  Chart vw({"v", "w"}, {{-0.5, 0.5}, {-0.5, 0.5}});
  Expression v = var("v"), w = var("w");
  std::vector<Expression> psi{v * w, v - w};
  auto tpsi = tangent_morphism(vw, tangent_algebroid(kUT), psi, {differential(vw, psi[0]), differential(vw, psi[1])});
  CHECK(morphism_check(tpsi).ok);
  auto both = compose(phi, tpsi);
  CHECK(morphism_check(both).ok);
  CHECK(morphism_check(compose(identity_morphism(a), phi)).ok);
  auto broken = family_one(-1);
  CHECK_FALSE(morphism_check(compose(tangent_morphism(kUT, a, broken.base, broken.eta), tpsi)).ok);
}

TEST_CASE("rx_check: weights of the cotangent algebroid") {
  CHECK(rx_check(make_rx(tangent_algebroid(kXY), {0, 0}, {0, 0})).ok);
  CHECK_THROWS_AS(make_rx(tangent_algebroid(kXY), {0, 0}), std::invalid_argument);

  for (const auto& j : {contact_jacobi(0), contact_jacobi(1, ContactVariant::Corrected), almost_poisson_jacobi()}) {
    auto rx = cotangent_rx(poissonize(j));
    CHECK(rx_check(rx).ok);
  }
  auto rx = cotangent_rx(poissonize(contact_jacobi(0)));
  CHECK(rx.base_weights == std::vector<int>{0, 1});
  CHECK(rx.fiber_weights == std::vector<int>{1, 0});
  auto bad = rx;
  bad.fiber_weights = {1, 1};
  auto r = rx_check(bad);
  CHECK_FALSE(r.ok);
  CHECK(r.transport.max_abs > 0.1);
}

namespace {

// Fields into T*L^x for contact k = 0: solutions have z = dX and pi = -ds.
VBMorphism contact0_field(const RxAlgebroid& rx, const Expression& X, const Expression& s, const DifferentialForm& z_extra,
                          const DifferentialForm& pi_extra) {
  return tangent_morphism(kUT, rx.algebroid, {X, s}, {-d(s) + pi_extra, d(X) + z_extra});
}

}  // namespace

TEST_CASE("lift_phi_to_psi: unit restriction, weights and double lift") {
  auto rx = cotangent_rx(poissonize(contact_jacobi(0)));
  Expression X = sin(var("u")) * var("t"), s = Expression::rational(3, 2) + var("u") * var("t");
  DifferentialForm zero(kUT, 1);
  auto phi = contact0_field(rx, X, s, zero, zero);
  auto psi = lift_phi_to_psi(phi, rx, "r");
  Expression r = var("r");
  CHECK(psi.psi.source.base().names() == std::vector<std::string>{"u", "t", "r"});
  // (X, s, pi, z) -> (X, r s, r pi, z)
  Box box = psi.psi.source.base().box();
  CHECK(is_zero(psi.psi.base.components[0] - X, box));
  CHECK(is_zero(psi.psi.base.components[1] - r * s, box));
  CHECK(is_zero(psi.psi.fiber[0] - phi.fiber[0] * r, box));
  CHECK(is_zero(psi.psi.fiber[1] - phi.fiber[1], box));

  auto unit = restrict_to_unit(psi);
  for (std::size_t a = 0; a < 2; ++a) CHECK(is_zero(unit.base.components[a] - phi.base.components[a], kUT.box()));
  for (std::size_t k = 0; k < 2; ++k) CHECK(is_zero(unit.fiber[k] - phi.fiber[k]));

  // lifting at s1 then s2 equals lifting at s1 s2
  Chart ext({"u", "t", "s1", "s2"}, {{-0.5, 0.5}, {-0.5, 0.5}, {0.5, 2}, {0.5, 2}});
  std::vector<DifferentialForm> rows;
  for (const auto& f : phi.fiber) rows.push_back(f.embed(ext));
  auto on_ext = tangent_morphism(ext, rx.algebroid, phi.base.components, rows);
  auto twice = scale_morphism(scale_morphism(on_ext, rx, var("s1")), rx, var("s2"));
  auto once = scale_morphism(on_ext, rx, var("s1") * var("s2"));
  for (std::size_t a = 0; a < 2; ++a) CHECK(is_zero(twice.base.components[a] - once.base.components[a], ext.box()));
  for (std::size_t k = 0; k < 2; ++k) CHECK(is_zero(twice.fiber[k] - once.fiber[k]));

  CHECK_THROWS_AS(lift_phi_to_psi(phi, rx, "u"), std::invalid_argument);
  auto bad = rx;
  bad.fiber_weights = {1, 1};
  CHECK_THROWS_AS(lift_phi_to_psi(phi, bad), std::invalid_argument);
}

TEST_CASE("jacobi_morphism_check: passing, anchor failure, bracket-only failure") {
  auto rx = cotangent_rx(poissonize(contact_jacobi(0)));
  Expression X = var("u") * var("u") - var("t"), s = Expression(1) + var("t") / 4;
  DifferentialForm zero(kUT, 1);
  auto good = jacobi_morphism_check(lift_phi_to_psi(contact0_field(rx, X, s, zero, zero), rx));
  CHECK(good.ok);
  CHECK(good.anchors_intertwine);

  auto bad = jacobi_morphism_check(lift_phi_to_psi(contact0_field(rx, X, s, d(var("u")), zero), rx));
  CHECK_FALSE(bad.ok);
  CHECK_FALSE(bad.anchors_intertwine);
  CHECK(bad.anchor_max_abs > 0.01);
  CHECK(bad.equivariant.worst == "anchor x0");

  // constant base, zero fiber: both pass
  auto trivial = tangent_morphism(kUT, rx.algebroid, {Expression::rational(1, 4), Expression(1)}, {zero, zero});
  CHECK(jacobi_morphism_check(lift_phi_to_psi(trivial, rx)).ok);

  // almost-Poisson structure with E = 0: anchors never see z, so a non-closed z breaks only the bracket block
  auto rx10 = cotangent_rx(poissonize(almost_poisson_jacobi()));
  auto fam = family_one();
  std::vector<Expression> base = fam.base;
  base.push_back(Expression(1));
  std::vector<DifferentialForm> rows = fam.eta;
  rows.push_back(zero);
  auto phi10 = tangent_morphism(kUT, rx10.algebroid, base, rows);
  CHECK(morphism_check(phi10).ok);
  CHECK(jacobi_morphism_check(lift_phi_to_psi(phi10, rx10)).ok);
  rows.back() = d(var("u")) * var("t");
  auto r = jacobi_morphism_check(lift_phi_to_psi(tangent_morphism(kUT, rx10.algebroid, base, rows), rx10));
  CHECK_FALSE(r.ok);
  CHECK(r.anchors_intertwine);
  CHECK(r.equivariant.worst == "bracket s_dot");

  // a non-equivariant Psi is rejected
  auto psi = lift_phi_to_psi(contact0_field(rx, X, s, zero, zero), rx);
  auto comps = psi.psi.base.components;
  comps[1] = comps[1] * var("s");
  JacobiMorphism skewed{VBMorphism(psi.psi.source, psi.psi.target,
                                   SmoothMap(psi.psi.base.source, psi.psi.base.target, comps), psi.psi.fiber),
                        rx, psi.s};
  CHECK_THROWS_AS(jacobi_morphism_check(skewed), std::invalid_argument);
}

TEST_CASE("property: Phi is a morphism iff its lift is a Jacobi algebroid morphism") {
  auto rx = cotangent_rx(poissonize(contact_jacobi(0)));
  testgen::ExprGen gen(62, {"u", "t"});
  int passing = 0, failing = 0;
  for (int i = 0; i < 20; ++i) {
    Expression X = gen.smooth(2);
    Expression s = Expression::rational(5, 4) + sin(gen.smooth(2)) / 4;
    DifferentialForm zero(kUT, 1), extra = d(gen.smooth(2)) * gen.smooth(1);
    bool perturb = i % 2 == 1;
    bool on_z = i % 4 == 1;
    auto phi = contact0_field(rx, X, s, perturb && on_z ? extra : zero, perturb && !on_z ? extra : zero);
    bool a = morphism_check(phi).ok;
    auto rep = jacobi_morphism_check(lift_phi_to_psi(phi, rx));
    CHECK(a == rep.ok);
    (a ? passing : failing) += 1;
  }
  CHECK(passing >= 8);
  CHECK(failing >= 5);
}

TEST_CASE("compute_D0phi and the reduced-model constraint") {
  auto hp = poissonize(contact_jacobi(0));
  Expression u = var("u"), t = var("t");
  auto d0 = compute_D0phi(SmoothMap(kUT, hp.chart, {u, Expression(1)}));
  CHECK(d0.target.fiber().names() == std::vector<std::string>{"x0_dot", "t"});
  CHECK(is_zero(d0.fiber[0] - d(u)));
  CHECK(is_zero(d0.fiber[1]));
  auto e = compute_D0phi(SmoothMap(kUT, hp.chart, {u, exp(t)}));
  CHECK(is_zero(e.fiber[0] - d(u)));
  CHECK(is_zero(e.fiber[1] - d(t)));
  CHECK(morphism_check(e).ok);
  CHECK_THROWS_AS(compute_D0phi(SmoothMap(kUT, hp.chart, {u, u})), std::invalid_argument);

  // solutions of the k = 0 model: D0 phi = J# o Phi_0 with p = pi / s
  JacobiPair j = contact_jacobi(0);
  Expression X = sin(u + t), s = Expression(1) + u * t;
  DifferentialForm pi = -d(s), z = d(X);
  auto lhs = compute_D0phi(SmoothMap(kUT, hp.chart, {X, s}));
  auto rhs = j_sharp_forms(j, {X}, {pi * (Expression(1) / s)}, z);
  REQUIRE(rhs.size() == 2);
  CHECK(is_zero(lhs.fiber[0] - rhs[0]));
  CHECK(is_zero(lhs.fiber[1] - rhs[1]));
  auto off = j_sharp_forms(j, {X}, {pi * (Expression(1) / s)}, z + d(u));
  CHECK_FALSE(is_zero(lhs.fiber[0] - off[0]));
}
