#pragma once

#include "jsm/algebroid.hpp"

#include <optional>
#include <string>
#include <vector>

namespace jsm {

// Nodes u_i = i h_u on [0,1] and t_j = -T + j h_t on [-T,T].
struct SurfaceGrid {
  int nu = 65;
  int nt = 65;
  double T = 1.0;

  SurfaceGrid() = default;
  SurfaceGrid(int nu, int nt, double T = 1.0);

  double hu() const { return 1.0 / (nu - 1); }
  double ht() const { return 2.0 * T / (nt - 1); }
  double u(int i) const { return i * hu(); }
  double t(int j) const { return -T + j * ht(); }
  std::size_t size() const { return static_cast<std::size_t>(nu) * static_cast<std::size_t>(nt); }
  std::size_t at(int i, int j) const { return static_cast<std::size_t>(i) * static_cast<std::size_t>(nt) + static_cast<std::size_t>(j); }
  // Trapezoid weight of node (i, j).
  double weight(int i, int j) const;
};

// (u, t) on [0,1] x [-T,T].
Chart sigma_chart(double T = 1.0);

enum class Variant { Homogeneous, Reduced, Constrained };
std::string to_string(Variant v);
Variant parse_variant(const std::string& name);

// a = du_part du + dt_part dt on the surface.
struct Covector {
  Expression du, dt;
};
DifferentialForm to_form(const Covector& a, const Chart& sigma);
Covector to_covector(const DifferentialForm& a);

// One 1-form per target coordinate: pi_i (homogeneous), p_i (reduced) or eta_i (constrained),
// plus z. The constrained variant ignores s.
struct SymbolicField {
  Variant variant = Variant::Homogeneous;
  std::vector<Expression> x;
  Expression s = Expression(1);
  std::vector<Covector> p;
  Covector z;
  double T = 1.0;
  // Requires p_i and z to have no dt part on u = 0 and u = 1.
  bool boundary_condition = false;

  Chart sigma() const { return sigma_chart(T); }
};

// Node values in SurfaceGrid::at order.
struct DiscreteField {
  Variant variant = Variant::Homogeneous;
  SurfaceGrid grid;
  std::vector<std::vector<double>> x;
  std::vector<double> s;
  std::vector<std::vector<double>> pu, pt;
  std::vector<double> zu, zt;
  bool boundary_condition = false;
};

DiscreteField tabulate(const SymbolicField& f, const SurfaceGrid& grid);

// pi = s p; the identity on homogeneous data.
SymbolicField to_homogeneous(const SymbolicField& f);
DiscreteField to_homogeneous(const DiscreteField& f);

inline constexpr double kMinFiber = 1e-6;

// Trapezoid quadrature of the 2-form density. Symbolic fields use exact derivatives at the nodes,
// discrete fields use the finite-difference stencils of el_residual.
double action(Variant v, const JacobiPair& j, const SymbolicField& f, const SurfaceGrid& grid = {});
double action(Variant v, const JacobiPair& j, const DiscreteField& f);

struct ResidualEntry {
  std::string name;  // "dX:<x>", "ds", "dpi:<x>" (or "dp:<x>" for reduced data), "dz"
  int equation = 0;  // 1..4
  DifferentialForm form;  // symbolic reports only
  bool zero = true;
  double max_abs = 0.0;
  double l2 = 0.0;  // discrete reports only
  SamplePoint point;
};

struct ResidualReport {
  bool ok = true;
  std::vector<ResidualEntry> entries;
  double max_abs = 0.0;
  std::string worst;
  double equation_max(int equation) const;
};

// For homogeneous data: dX^i + (1/s) L^{ij} pi_j - z E^i, ds + E^j pi_j,
// dpi_k + (1/2s) d_k L^{ij} pi_i ^ pi_j + d_k E^j z ^ pi_j, dz - (1/(2 s^2)) L^{ij} pi_i ^ pi_j.
// Reduced data is mapped through pi = s p; its third entry is (R3 - R2 ^ p_k) / s.
ResidualReport el_residual(const JacobiPair& j, const SymbolicField& f, const ZeroTestOptions& opts = {});
// Discrete residuals are ok when every max-norm is at most tol.
ResidualReport el_residual(const JacobiPair& j, const DiscreteField& f, double tol = 1e-6);

// Any bivector on a chart with fields Y^a and 1-forms A_a: dY^a + P^{ab} A_b and
// dA_a + 1/2 d_a P^{bc} A_b ^ A_c. The Euler-Lagrange system of A ^ dY + 1/2 P(A, A).
ResidualReport bivector_residual(const MultivectorField& p, const std::vector<Expression>& y,
                                 const std::vector<Covector>& a, double T = 1.0, const ZeroTestOptions& opts = {});

// The field as a VB-morphism T Sigma -> T*L^x, into cotangent_rx(poissonize(j)).
VBMorphism field_morphism(const JacobiPair& j, const SymbolicField& f, const std::string& fiber = "s");

struct ConstraintReport {
  bool ok = true;
  std::vector<DifferentialForm> residuals;  // D0 phi - J# o Phi_0, rows x_dot^i then t
  double max_abs = 0.0;
};

// D0 phi = J# o Phi_0 for reduced data.
ConstraintReport reduced_constraint_check(const JacobiPair& j, const SymbolicField& f, const ZeroTestOptions& opts = {});

// Curves in u on [0,1].
struct APath {
  std::vector<Expression> x;
  Expression s = Expression(1);
  std::vector<Expression> pi;
  Expression z;
};

// Uniform samples u_k = k / (n - 1).
struct SampledAPath {
  std::vector<std::vector<double>> x;
  std::vector<double> s;
  std::vector<std::vector<double>> pi;
  std::vector<double> z;
  std::size_t samples() const { return s.size(); }
};

SampledAPath sample_apath(const APath& a, int samples);

struct APathReport {
  bool ok = true;
  double max_defect = 0.0;
  std::string worst;  // coordinate name with the largest defect
  double u = 0.0;
};

// dx^i/du = s^{-1} L^{kj} pi_k + E^j z, ds/du = -E^k pi_k, written for any homogeneous Poisson
// chart as dY^a/du = A_b Pi^{ba}.
APathReport apath_check(const HomogeneousPoisson& hp, const APath& a, double tol = 1e-9, const ZeroTestOptions& opts = {});
APathReport apath_check(const HomogeneousPoisson& hp, const SampledAPath& a, double tol = 1e-6);

// Reduced path on J^1 L: base curve X(u) and the 1-form coefficients eta_j(u).
struct ReducedPath {
  std::vector<Expression> x;
  std::vector<Expression> eta;
};

// s(1)/s(0) = exp(int_0^1 E^j(X) eta_j du), composite Simpson with an even interval count.
double apath_holonomy(const JacobiPair& j, const ReducedPath& a, int intervals = 512);

struct Ex1Groupoid {
  int k = 0;
  Chart base;       // (x0 .. x_{2k}, s)
  Chart groupoid;   // (s, t, xl0 .., xr0 ..)
  Chart reduced;    // (t, xl0 .., xr0 ..)
  SmoothMap alpha;  // groupoid -> base
  SmoothMap beta;
  DifferentialForm theta;    // on base, dx^0 - sum x^{k+j} dx^j
  DifferentialForm omega0;   // -s d theta + ds ^ theta
  DifferentialForm omega;    // alpha^* omega0 - beta^* omega0
  DifferentialForm theta_c;  // on reduced

  std::size_t width() const { return static_cast<std::size_t>(2 * k + 1); }
  // g2 o g1 for composable arrows listed in groupoid coordinates.
  std::vector<Expression> multiply(const std::vector<Expression>& g2, const std::vector<Expression>& g1) const;
  std::vector<Expression> act(const Expression& nu, const std::vector<Expression>& g) const;
};

Ex1Groupoid ex1_groupoid(int k);

struct CheckItem {
  std::string name;
  bool ok = true;
  double max_abs = 0.0;
  std::string detail;
};

struct GroupoidReport {
  bool ok = true;
  std::vector<CheckItem> items;  // composition, associativity, action, omega degree, contact
};

GroupoidReport verify_ex1_groupoid(const Ex1Groupoid& g, const ZeroTestOptions& opts = {});

// Profiles g, h, f are expressions in w.
struct ExampleParams {
  int k = 1;
  Expression g = pow(var("w"), 3);
  Expression h = var("w");
  Expression f = pow(var("w"), 2);
  Expression c = Expression(0);
  Expression X = var("u") + var("t");
  Expression Y = var("u");
};

struct BuiltinExample {
  std::string name;
  std::optional<JacobiPair> jacobi;
  std::optional<LineBundleAtlas> atlas;
  std::optional<Ex1Groupoid> groupoid;
  std::vector<SymbolicField> fields;   // solutions for el_residual with `jacobi`
  std::vector<VBMorphism> morphisms;   // almost-Poisson families: T Sigma -> T*R^3
};

std::vector<std::string> builtin_names();
BuiltinExample builtin_example(const std::string& name, const ExampleParams& params = {});

}  // namespace jsm
