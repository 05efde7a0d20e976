#pragma once

#include "jsm/jacobi.hpp"

#include <optional>
#include <string>
#include <vector>

namespace jsm {

class NonlinearBivector : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Algebroid forms are DifferentialForms on the fiber chart: index i stands for the generator y^i,
// coefficients are functions of the base coordinates.
using AlgebroidForm = DifferentialForm;

class AlgebroidStructure {
 public:
  AlgebroidStructure() = default;
  // anchor[i][a] = rho^a_i; c is indexed c[k] over pairs i<j of the fiber chart.
  AlgebroidStructure(Chart base, Chart fiber, std::vector<std::vector<Expression>> anchor,
                     std::vector<MultivectorField> c, std::optional<bool> lie = std::nullopt);

  const Chart& base() const { return base_; }
  const Chart& fiber() const { return fiber_; }
  std::size_t rank() const { return fiber_.dim(); }
  // rho^a_i
  const Expression& anchor(std::size_t i, std::size_t a) const { return anchor_.at(i).at(a); }
  // c^k_{ij}, antisymmetric in (i, j).
  Expression c(std::size_t k, std::size_t i, std::size_t j) const;
  // Set by from_linear_bivector after verifying d^2 = 0; empty for hand-built data.
  const std::optional<bool>& lie() const { return lie_; }

  // Base box followed by the fiber box, with fiber names for the dual coordinates.
  Chart dual_chart() const;
  AlgebroidForm function(const Expression& f) const { return AlgebroidForm::scalar(fiber_, f); }
  AlgebroidForm generator(std::size_t i) const { return AlgebroidForm::basis(fiber_, {static_cast<int>(i)}); }

 private:
  Chart base_, fiber_;
  std::vector<std::vector<Expression>> anchor_;
  // structure_[k] stores c^k_{ij} as the component (i,j) of a fiber-chart bivector.
  std::vector<MultivectorField> structure_;
  std::optional<bool> lie_;
};

// Identity anchor, zero brackets; the fiber chart is the base chart itself, so algebroid forms
// are ordinary differential forms.
AlgebroidStructure tangent_algebroid(const Chart& base);

// Pi = sum_{i<j} c^k_{ij} xi_k d_{xi_i} ^ d_{xi_j} + rho^a_i d_{xi_i} ^ d_{x^a} on the dual chart,
// with the listed coordinates as xi.
AlgebroidStructure from_linear_bivector(const MultivectorField& pi, const std::vector<std::string>& fiber);
MultivectorField rebuild_bivector(const AlgebroidStructure& a);

// T*M for a bivector P on M, read off from tangent_lift(P, suffix); generators are named <x><suffix>.
AlgebroidStructure cotangent_algebroid(const MultivectorField& p, const std::string& suffix = "_dot");

// d f = rho^a_i d_a f y^i, d y^k = 1/2 c^k_{ji} y^i ^ y^j, extended by the graded Leibniz rule.
AlgebroidForm algebroid_d(const AlgebroidStructure& a, const AlgebroidForm& w);

struct LieCheck {
  bool is_lie = true;
  std::string witness;  // "x" for d^2 x^a, "y:" + name for d^2 y^k
  AlgebroidForm form;
  double max_abs = 0.0;
  SamplePoint point;
};

LieCheck lie_check(const AlgebroidStructure& a, const ZeroTestOptions& opts = {});
bool is_lie(const AlgebroidStructure& a, const ZeroTestOptions& opts = {});

// [e_i, e_j] in the display convention c^k_{ji} e_k, as a 1-form-like list over k.
std::vector<Expression> bracket_coefficients(const AlgebroidStructure& a, std::size_t i, std::size_t j);

struct VBMorphism {
  AlgebroidStructure source;
  AlgebroidStructure target;
  SmoothMap base;                    // source base chart -> target base chart
  std::vector<AlgebroidForm> fiber;  // y^k o Phi = F^k_alpha y^alpha, one row per target generator

  VBMorphism(AlgebroidStructure source, AlgebroidStructure target, SmoothMap base, std::vector<AlgebroidForm> fiber);
};

// Morphism from T Sigma; eta[k] are 1-forms on the source chart.
VBMorphism tangent_morphism(const Chart& sigma, const AlgebroidStructure& target, const std::vector<Expression>& base,
                            const std::vector<DifferentialForm>& eta);
VBMorphism identity_morphism(const AlgebroidStructure& a);
// outer o inner
VBMorphism compose(const VBMorphism& outer, const VBMorphism& inner);

struct MorphismReport {
  bool ok = true;
  std::vector<AlgebroidForm> anchor_residuals;   // d(x^a o phi) - (rho^a_i o phi) F^i
  std::vector<AlgebroidForm> bracket_residuals;  // d F^k - 1/2 (c^k_{ji} o phi) F^i ^ F^j
  double max_abs = 0.0;
  std::string worst;  // "anchor <x^a>" or "bracket <y^k>"
  SamplePoint point;
  bool base_in_box = true;  // phi lands in the target box at every sample; informational
};

MorphismReport morphism_check(const VBMorphism& phi, const ZeroTestOptions& opts = {});

struct RxAlgebroid {
  AlgebroidStructure algebroid;
  std::vector<int> base_weights;
  std::vector<int> fiber_weights;
};

// base_weights default to the base chart's weights.
RxAlgebroid make_rx(const AlgebroidStructure& a, std::vector<int> fiber_weights, std::vector<int> base_weights = {});

// T*L^x for a homogeneous Poisson structure with the h* weights: base (x:0, s:1), generators
// pi_j (named <x>_dot) weight 1 and z (named <s>_dot) weight 0.
RxAlgebroid cotangent_rx(const HomogeneousPoisson& hp, const std::string& suffix = "_dot");

// (x^a, y^i) -> (nu^{w_a} x^a, nu^{w_i} y^i) composed after phi.
VBMorphism scale_morphism(const VBMorphism& phi, const RxAlgebroid& target, const Expression& nu);

struct RxReport {
  bool ok = true;
  MorphismReport transport;  // the scaling as a self-morphism with formal nu
};

RxReport rx_check(const RxAlgebroid& a, Interval nu_range = {0.5, 2.0}, const ZeroTestOptions& opts = {});

// The canonical R^x-algebroid T Sigma x R^x over Sigma x R^x: anchor (v, s) -> (v, 0_s).
AlgebroidStructure canonical_rx_algebroid(const Chart& sigma, const std::string& s, Interval s_range = {0.5, 2.0});

struct JacobiMorphism {
  VBMorphism psi;  // source is canonical_rx_algebroid(sigma, s)
  RxAlgebroid target;
  std::string s;
};

// Psi(v, s) = h*_s(Phi(v)).
JacobiMorphism lift_phi_to_psi(const VBMorphism& phi, const RxAlgebroid& target, const std::string& s = "s",
                               Interval s_range = {0.5, 2.0});
// Psi(., 1) as a morphism from the tangent algebroid of Sigma.
VBMorphism restrict_to_unit(const JacobiMorphism& psi);

struct JacobiMorphismReport {
  bool ok = true;
  MorphismReport unit;          // (a): morphism_check at s = 1
  MorphismReport equivariant;   // (b): full check of Psi with s formal
  bool anchors_intertwine = true;  // the anchor block of (b): Pi# o Psi = T chi o rho_E
  double anchor_max_abs = 0.0;
};

// Throws std::logic_error when (a) and (b) disagree, and std::invalid_argument when Psi is not
// equivariant.
JacobiMorphismReport jacobi_morphism_check(const JacobiMorphism& psi, const ZeroTestOptions& opts = {});

// D L for the trivial line bundle over a chart: generators <x><suffix> with identity anchor and t with zero
// anchor; all brackets of the constant frame vanish.
AlgebroidStructure derivation_algebroid(const Chart& base, const std::string& suffix = "_dot",
                                        const std::string& t = "t");

// phi: Sigma -> L^x chart (x^i, s). Fiber rows x_dot^i -> dX^i, t -> ds/s, into derivation_algebroid
// of the chart without s. Throws if s o phi changes sign or nearly vanishes on the samples.
VBMorphism compute_D0phi(const SmoothMap& phi, const std::string& fiber = "s", const ZeroTestOptions& opts = {});

// J# o Phi_0 as forms: x_dot^j = L^{kj}(X) p_k + E^j(X) z, t = -E^k(X) p_k.
std::vector<DifferentialForm> j_sharp_forms(const JacobiPair& j, const std::vector<Expression>& x,
                                            const std::vector<DifferentialForm>& p, const DifferentialForm& z);

}  // namespace jsm
