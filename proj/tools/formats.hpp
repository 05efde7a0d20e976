#pragma once

// On-disk structure and field files, both in the TOML subset of toml_subset.hpp.
//
// Structure file, kind = "jacobi" | "poisson" | "algebroid" | "atlas":
//   jacobi     [chart] names/boxes/weights, [lambda] "x y" = "expr", [e] x = "expr"
//   poisson    [chart], [pi] "x y" = "expr"; optional fiber = "s" (homogeneous fiber coordinate)
//              and linear = [...] (fiber-linear coordinates, as emitted by a tangent lift)
//   algebroid  [base], [fiber], [anchor] "y x" = rho^x_y, [structure] "k i j" = c^k_{ij}
//   atlas      [chart.<name>], [chart.<name>.lambda], [chart.<name>.e], and
//              [overlap.<id>] from, to, region, map, factor
// Index tuples in keys follow the chart order and must be strictly increasing.
//
// Field file:
//   variant = "homogeneous" | "reduced" | "constrained", optional chart (atlas chart name),
//   T, grid = "NxM", boundary_condition; [map] X^i and the fiber coordinate;
//   [p] x = ["du part", "dt part"]; [z] du, dt; optional [morphism] rows like [p].

#include "jsm/sigma.hpp"
#include "toml_subset.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace jsm::io {

enum class Kind { Jacobi, Poisson, Algebroid, Atlas };
std::string kind_name(Kind k);

struct PoissonData {
  MultivectorField pi;
  std::optional<std::string> fiber;
  std::vector<std::string> linear;
};

struct StructureFile {
  Kind kind = Kind::Jacobi;
  std::optional<JacobiPair> jacobi;
  std::optional<PoissonData> poisson;
  std::optional<AlgebroidStructure> algebroid;
  std::optional<LineBundleAtlas> atlas;
};

StructureFile read_structure(const Document& doc);
StructureFile read_structure_file(const std::string& path);
std::string write_structure(const StructureFile& s);

template <class T>
struct Located {
  T value;
  Location at;
};

struct FieldFile {
  std::string file;
  Located<Variant> variant;
  std::optional<Located<std::string>> chart;
  double T = 1.0;
  std::optional<SurfaceGrid> grid;
  bool boundary_condition = false;
  Location map_at, p_at;
  std::vector<std::pair<std::string, Located<Expression>>> map;
  std::vector<std::pair<std::string, Located<Covector>>> p;
  Covector z{Expression(0), Expression(0)};
  std::optional<Location> morphism_at;
  std::vector<std::pair<std::string, Located<Covector>>> morphism;
};

FieldFile read_field(const Document& doc);
FieldFile read_field_file(const std::string& path);

// Orders the maps by target coordinate; errors point at the offending entry.
SymbolicField bind_field(const FieldFile& f, const std::vector<std::string>& coordinates, const std::string& fiber);
// Rows and base map of the optional morphism block, ordered by coordinate.
std::vector<DifferentialForm> bind_morphism(const FieldFile& f, const std::vector<std::string>& coordinates);
std::vector<Expression> bind_base(const FieldFile& f, const std::vector<std::string>& coordinates);

SurfaceGrid parse_grid(const std::string& text);

}  // namespace jsm::io
