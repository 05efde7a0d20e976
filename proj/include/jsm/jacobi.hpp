#pragma once

#include "jsm/geometry.hpp"

#include <optional>
#include <string>
#include <vector>

namespace jsm {

struct JacobiPair {
  Chart chart;
  MultivectorField lambda;  // degree 2
  MultivectorField e;       // degree 1

  JacobiPair(MultivectorField lambda, MultivectorField e);
  // Lambda = 0, E = 0 on the chart.
  explicit JacobiPair(const Chart& chart);
};

// Lambda(df, dg) + f E(g) - g E(f).
Expression bracket(const JacobiPair& j, const Expression& f, const Expression& g);

struct JacobiatorWitness {
  std::vector<std::string> slots;  // coordinate names, "1" for the constant slot
  Expression value;                // cyclic sum as an expression
  double max_abs = 0.0;
  SamplePoint point;
};

struct JacobiCheck {
  bool is_jacobi = false;
  bool sn_jacobi = false;      // [E,L] = 0 and [L,L] + 2 E^L = 0
  bool oracle_jacobi = false;  // cyclic sums on coordinates and 1 vanish
  MultivectorField residual_e;
  MultivectorField residual_lambda;
  TensorZeroResult e_test;
  TensorZeroResult lambda_test;
  std::optional<JacobiatorWitness> witness;  // worst failing triple, if any
};

// Raises std::logic_error if the SN residuals and the Jacobiator oracle disagree.
JacobiCheck jacobi_check(const JacobiPair& j, const ZeroTestOptions& opts = {});

// Cyclic sum {f,{g,h}} + {g,{h,f}} + {h,{f,g}}.
Expression jacobiator(const JacobiPair& j, const Expression& f, const Expression& g, const Expression& h);

struct HomogeneousPoisson {
  Chart chart;  // base coordinates then the fiber coordinate, weights (0,...,0,1)
  MultivectorField pi;
  std::string fiber;

  Expression fiber_coordinate() const { return var(fiber); }
  std::size_t base_dim() const { return chart.dim() - 1; }
};

// Pi = (1/(2s)) L^{ij} d_i ^ d_j + E^i d_s ^ d_i.
HomogeneousPoisson poissonize(const JacobiPair& j, const std::string& fiber = "s", Interval s_range = {0.5, 2.0});
// Degree -1 homogeneity of Pi.
TensorZeroResult homogeneity_check(const HomogeneousPoisson& hp, const ZeroTestOptions& opts = {});
// {F, G} = <Pi, dF ^ dG>.
Expression poisson_bracket(const HomogeneousPoisson& hp, const Expression& f, const Expression& g);

struct JetPoint {
  std::vector<Expression> x, p;
  Expression z;
};

struct DerPoint {
  std::vector<Expression> x, xdot;
  Expression t;
};

// J#(x,p,z) = (x, L^{kj} p_k + E^j z, -E^k p_k).
DerPoint j_sharp(const JacobiPair& j, const JetPoint& pt);

// Components L^{kj} d_k sigma + sigma E^j.
MultivectorField hamiltonian_vf(const JacobiPair& j, const Expression& sigma);

struct JetSection {
  DifferentialForm alpha;
  Expression f;
};

JetSection jet_bracket(const JacobiPair& j, const JetSection& a, const JetSection& b);

// xdot^j p_j + t z; the base points must agree.
Expression pairing_L(const JetPoint& jet, const DerPoint& der);

struct Overlap {
  std::string from, to;
  Box region;                       // in the base coordinates of `from`
  std::vector<Expression> base_map;  // coordinates of `to` in variables of `from`
  Expression factor;                // z_to = factor * z_from
};

struct AtlasChart {
  std::string name;
  JacobiPair jacobi;
};

struct LineBundleAtlas {
  std::vector<AtlasChart> charts;
  std::vector<Overlap> overlaps;
};

struct AtlasReport {
  bool ok = true;
  int failing_overlap = -1;
  std::string failure;  // "cocycle ..." or the failing component
  double max_abs = 0.0;
};

AtlasReport atlas_check(const LineBundleAtlas& atlas, const ZeroTestOptions& opts = {});

// Lifts of the principal action h_nu(x, s) = (x, nu s), each a map with a formal nu.
struct LiftedAction {
  std::string name;  // "hat_h", "h" on the tangent chart; "hat_h_star", "h_star" on the cotangent chart
  SmoothMap map;     // source includes nu as an extra coordinate
  std::vector<int> weights;
};

std::vector<LiftedAction> lifted_actions(const HomogeneousPoisson& hp, const std::string& nu = "nu");

// Reads w with map_i = nu^{w_i} * coordinate_i; throws if some component is not of that form.
std::vector<int> scaling_weights(const SmoothMap& action, const Chart& chart, const std::string& nu);

// Built-in structures.
// AsPrinted: coordinates x0..x_{2k}, L = sum_j (d_{x^j} - x^{k+j} d_{x^0}) ^ d_{x^{k+j}}, E = d_{x^0}.
// This pair is not Jacobi for k >= 1. Corrected flips the sign of x^{k+j} d_{x^0}, so that L is
// built from the kernel of dx^0 - x^{k+j} dx^j, and passes.
enum class ContactVariant { AsPrinted, Corrected };
JacobiPair contact_jacobi(int k, ContactVariant variant = ContactVariant::AsPrinted);
// Coordinates (x, y, z); L = d_x ^ (d_y + x d_z), E = 0.
JacobiPair almost_poisson_jacobi();
// Two charts on the Moebius band with E = cos(pi x) on the first chart (or `e_first`, `e_second`).
LineBundleAtlas moebius_atlas();
LineBundleAtlas moebius_atlas(const Expression& e_first, const Expression& e_second);

}  // namespace jsm
