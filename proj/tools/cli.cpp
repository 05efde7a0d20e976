#include "cli.hpp"

#include "formats.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

namespace jsm::cli {

namespace {

using json = nlohmann::ordered_json;
using io::InputError;

struct Check {
  std::string name;
  bool ok = true;
  bool info = false;  // reported but not part of the verdict
  std::string detail;
  json data = json::object();
};

struct Report {
  std::string command;
  json inputs = json::object();
  std::vector<Check> checks;
  json extra = json::object();

  bool ok() const {
    for (const auto& c : checks)
      if (!c.info && !c.ok) return false;
    return true;
  }
  Check& add(std::string name, bool ok, std::string detail = {}) {
    checks.push_back({std::move(name), ok, false, std::move(detail), json::object()});
    return checks.back();
  }
  Check& info(std::string name, std::string detail = {}) {
    checks.push_back({std::move(name), true, true, std::move(detail), json::object()});
    return checks.back();
  }
};

struct Settings {
  ZeroTestOptions zero;
  SurfaceGrid grid;
  std::string json_path;
  bool timing = false;
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

json point_json(const SamplePoint& p) {
  json out = json::object();
  for (const auto& [k, v] : p) out[k] = v;
  return out;
}

std::string point_text(const SamplePoint& p) {
  std::string out = "(";
  bool first = true;
  for (const auto& [k, v] : p) {
    out += (first ? "" : ", ") + k + "=" + num(v);
    first = false;
  }
  return out + ")";
}

json grid_json(const SurfaceGrid& g) { return std::to_string(g.nu) + "x" + std::to_string(g.nt); }

void emit(const Report& r, const Settings& s, std::ostream& out, double seconds, const std::string& prefix = "") {
  json j;
  j["command"] = r.command;
  j["inputs"] = r.inputs;
  j["provenance"] = {{"seed", s.zero.seed}, {"tol", s.zero.tol}, {"trials", s.zero.trials}, {"grid", grid_json(s.grid)}};
  j["ok"] = r.ok();
  json checks = json::array();
  for (const auto& c : r.checks) {
    json item;
    item["name"] = c.name;
    item["status"] = c.info ? "info" : (c.ok ? "pass" : "fail");
    if (!c.detail.empty()) item["detail"] = c.detail;
    for (const auto& [k, v] : c.data.items()) item[k] = v;
    checks.push_back(item);
  }
  j["checks"] = checks;
  for (const auto& [k, v] : r.extra.items()) j[k] = v;
  if (s.timing) j["wall_time_s"] = seconds;

  if (!s.json_path.empty()) {
    std::string text = j.dump(2) + "\n";
    if (s.json_path == "-") {
      out << text;
      return;
    }
    std::ofstream f(s.json_path, std::ios::binary);
    if (!f) throw InputError("cannot write '" + s.json_path + "'");
    f << text;
  }
  out << prefix << r.command << "\n";
  int failed = 0;
  for (const auto& c : r.checks) {
    const char* tag = c.info ? "INFO" : (c.ok ? "PASS" : "FAIL");
    if (!c.info && !c.ok) ++failed;
    out << prefix << "  " << tag << "  " << c.name;
    if (!c.detail.empty()) out << ": " << c.detail;
    out << "\n";
  }
  out << prefix << "result: " << (r.ok() ? "pass" : "fail") << " (" << failed << " failed)";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", seconds);
  out << "  [" << buf << " s]\n";
}

std::string fresh_name(const Chart& c, const std::string& base) {
  if (!c.contains(base)) return base;
  for (int i = 1;; ++i)
    if (!c.contains(base + std::to_string(i))) return base + std::to_string(i);
}

bool vanishes(const MultivectorField& t) {
  for (const auto& [k, v] : t.components())
    if (!v.is_literal_zero()) return false;
  return true;
}

// ------------------------------------------------------------------ structure checks

void check_jacobi(Report& r, const JacobiPair& j, const std::string& label, const ZeroTestOptions& z) {
  JacobiCheck jc = jacobi_check(j, z);
  std::string detail;
  if (jc.is_jacobi) {
    detail = "[E,L] = 0 and [L,L] + 2 E^L = 0";
  } else if (jc.witness) {
    std::string slots;
    for (std::size_t i = 0; i < jc.witness->slots.size(); ++i) slots += (i ? ", " : "") + jc.witness->slots[i];
    detail = "Jacobiator(" + slots + ") = " + jc.witness->value.to_string() + ", max |.| = " + num(jc.witness->max_abs);
  } else {
    detail = "SN residual " + num(std::max(jc.e_test.max_abs, jc.lambda_test.max_abs));
  }
  Check& c = r.add(label, jc.is_jacobi, detail);
  c.data["sn_jacobi"] = jc.sn_jacobi;
  c.data["oracle_jacobi"] = jc.oracle_jacobi;
  c.data["e_residual"] = jc.e_test.max_abs;
  c.data["lambda_residual"] = jc.lambda_test.max_abs;
  if (jc.witness) {
    c.data["witness"] = {{"slots", jc.witness->slots},
                         {"value", jc.witness->value.to_string()},
                         {"max_abs", jc.witness->max_abs},
                         {"point", point_json(jc.witness->point)}};
  }
}

void check_homogeneous(Report& r, const HomogeneousPoisson& hp, const ZeroTestOptions& z, const std::string& label) {
  TensorZeroResult h = homogeneity_check(hp, z);
  Check& c = r.add(label, h.zero, h.zero ? "push_scale(Pi) = nu^-1 Pi" : "residual " + num(h.max_abs));
  c.data["max_abs"] = h.max_abs;
}

std::string term(const Expression& coef, const std::string& base) {
  std::string c = normalize(coef).to_string();
  if (c == "1") return base;
  if (c == "-1") return "-" + base;
  bool compound = c.find('+') != std::string::npos || c.find('-', 1) != std::string::npos;
  return (compound ? "(" + c + ")" : c) + "*" + base;
}

std::string linear_combination(const std::vector<std::pair<Expression, std::string>>& terms) {
  std::string out;
  for (const auto& [c, b] : terms) {
    if (normalize(c).is_literal_zero()) continue;
    std::string t = term(c, b);
    if (out.empty()) out = t;
    else if (t[0] == '-') out += " - " + t.substr(1);
    else out += " + " + t;
  }
  return out.empty() ? "0" : out;
}

json describe_algebroid(const AlgebroidStructure& a) {
  json anchor = json::object();
  for (std::size_t i = 0; i < a.rank(); ++i) {
    std::vector<std::pair<Expression, std::string>> row;
    for (std::size_t x = 0; x < a.base().dim(); ++x) row.push_back({a.anchor(i, x), "d_" + a.base().name(x)});
    anchor[a.fiber().name(i)] = linear_combination(row);
  }
  json brackets = json::array();
  for (std::size_t i = 0; i < a.rank(); ++i)
    for (std::size_t j = i + 1; j < a.rank(); ++j) {
      std::vector<Expression> c = bracket_coefficients(a, i, j);
      bool any = false, all_negative = true;
      for (const auto& e : c) {
        std::string t = normalize(e).to_string();
        if (t == "0") continue;
        any = true;
        all_negative = all_negative && t[0] == '-';
      }
      if (!any) continue;
      // list the pair in the order that needs no leading sign
      std::size_t first = all_negative ? j : i, second = all_negative ? i : j;
      std::vector<std::pair<Expression, std::string>> rhs;
      for (std::size_t k = 0; k < c.size(); ++k) rhs.push_back({all_negative ? -c[k] : c[k], a.fiber().name(k)});
      brackets.push_back("[" + a.fiber().name(first) + ", " + a.fiber().name(second) + "] = " + linear_combination(rhs));
    }
  return {{"anchor", anchor}, {"brackets", brackets}};
}

void check_lie(Report& r, const AlgebroidStructure& a, const ZeroTestOptions& z, bool informational) {
  LieCheck lc = lie_check(a, z);
  std::string detail = lc.is_lie ? "d^2 = 0" : "d^2 " + lc.witness + " != 0, max |.| = " + num(lc.max_abs);
  Check& c = informational ? r.info("lie", detail) : r.add("lie", lc.is_lie, detail);
  c.ok = informational ? true : lc.is_lie;
  c.data["is_lie"] = lc.is_lie;
  if (!lc.is_lie) c.data["witness"] = {{"name", lc.witness}, {"max_abs", lc.max_abs}, {"point", point_json(lc.point)}};
}

void check_structure(Report& r, const io::StructureFile& sf, const ZeroTestOptions& z) {
  switch (sf.kind) {
    case io::Kind::Jacobi: {
      check_jacobi(r, *sf.jacobi, "jacobi", z);
      std::string fiber = fresh_name(sf.jacobi->chart, "s");
      check_homogeneous(r, poissonize(*sf.jacobi, fiber), z, "poissonize: degree -1");
      break;
    }
    case io::Kind::Poisson: {
      const MultivectorField& p = sf.poisson->pi;
      TensorZeroResult t = tensor_zero_test(schouten(p, p), p.chart().box(), z);
      Check& c = r.add("poisson", t.zero, t.zero ? "[P,P] = 0" : "[P,P] != 0, max |.| = " + num(t.max_abs));
      c.data["max_abs"] = t.max_abs;
      if (sf.poisson->fiber) {
        std::vector<int> w(p.chart().dim(), 0);
        w[static_cast<std::size_t>(p.chart().index(*sf.poisson->fiber))] = 1;
        TensorZeroResult h = homogeneity_test(p, -1, w, {0.5, 2.0}, z);
        Check& hc = r.add("homogeneous of degree -1", h.zero, h.zero ? "" : "residual " + num(h.max_abs));
        hc.data["max_abs"] = h.max_abs;
      }
      break;
    }
    case io::Kind::Algebroid:
      check_lie(r, *sf.algebroid, z, false);
      r.extra["algebroid"] = describe_algebroid(*sf.algebroid);
      break;
    case io::Kind::Atlas: {
      AtlasReport a = atlas_check(*sf.atlas, z);
      Check& c = r.add("atlas", a.ok, a.ok ? "transitions glue the chart structures" : a.failure);
      c.data["max_abs"] = a.max_abs;
      if (!a.ok) c.data["failing_overlap"] = a.failing_overlap;
      for (const auto& ch : sf.atlas->charts) check_jacobi(r, ch.jacobi, "jacobi on " + ch.name, z);
      break;
    }
  }
}

// ------------------------------------------------------------------ derive

bool same_tensor(const MultivectorField& a, const MultivectorField& b, const ZeroTestOptions& z) {
  if (a.chart().names() != b.chart().names() || a.degree() != b.degree()) return false;
  return is_zero(a - b, a.chart().box(), z);
}

bool same_algebroid(const AlgebroidStructure& a, const AlgebroidStructure& b, const ZeroTestOptions& z) {
  if (a.base().names() != b.base().names() || a.fiber().names() != b.fiber().names()) return false;
  Box box = a.base().box();
  for (std::size_t i = 0; i < a.rank(); ++i)
    for (std::size_t x = 0; x < a.base().dim(); ++x)
      if (!is_zero(a.anchor(i, x) - b.anchor(i, x), box, z)) return false;
  for (std::size_t k = 0; k < a.rank(); ++k)
    for (std::size_t i = 0; i < a.rank(); ++i)
      for (std::size_t j = i + 1; j < a.rank(); ++j)
        if (!is_zero(a.c(k, i, j) - b.c(k, i, j), box, z)) return false;
  return true;
}

InputError incompatible(const std::string& what, io::Kind kind, const std::string& needs) {
  return InputError("derive " + what + " is incompatible with kind " + io::kind_name(kind) + " (needs " + needs + ")");
}

io::StructureFile derive_structure(Report& r, const io::StructureFile& sf, const std::string& what,
                                   const ZeroTestOptions& z) {
  io::StructureFile out;
  if (what == "poissonize") {
    if (sf.kind != io::Kind::Jacobi) throw incompatible(what, sf.kind, "jacobi");
    HomogeneousPoisson hp = poissonize(*sf.jacobi, fresh_name(sf.jacobi->chart, "s"));
    out.kind = io::Kind::Poisson;
    out.poisson = io::PoissonData{hp.pi, hp.fiber, {}};
    check_homogeneous(r, hp, z, "homogeneous of degree -1");
  } else if (what == "lift") {
    MultivectorField p;
    if (sf.kind == io::Kind::Poisson) {
      p = sf.poisson->pi;
    } else if (sf.kind == io::Kind::Jacobi && vanishes(sf.jacobi->e)) {
      p = sf.jacobi->lambda;
    } else {
      throw incompatible(what, sf.kind, "poisson, or jacobi with E = 0");
    }
    MultivectorField lifted = tangent_lift(p);
    std::vector<std::string> linear;
    for (const auto& n : lifted.chart().names())
      if (!p.chart().contains(n)) linear.push_back(n);
    out.kind = io::Kind::Poisson;
    out.poisson = io::PoissonData{lifted, std::nullopt, linear};
    MultivectorField defect = schouten(lifted, lifted) - tangent_lift(schouten(p, p));
    TensorZeroResult t = tensor_zero_test(defect, lifted.chart().box(), z);
    Check& c = r.add("[d_T P, d_T P] = d_T [P, P]", t.zero, t.zero ? "" : "residual " + num(t.max_abs));
    c.data["max_abs"] = t.max_abs;
  } else if (what == "algebroid") {
    AlgebroidStructure a;
    if (sf.kind == io::Kind::Poisson && !sf.poisson->linear.empty()) {
      a = from_linear_bivector(sf.poisson->pi, sf.poisson->linear);
    } else if (sf.kind == io::Kind::Poisson) {
      a = cotangent_algebroid(sf.poisson->pi);
    } else if (sf.kind == io::Kind::Jacobi && vanishes(sf.jacobi->e)) {
      a = cotangent_algebroid(sf.jacobi->lambda);
    } else {
      throw incompatible(what, sf.kind, "poisson, or jacobi with E = 0");
    }
    out.kind = io::Kind::Algebroid;
    out.algebroid = a;
    check_lie(r, a, z, true);
    r.extra["algebroid"] = describe_algebroid(a);
  } else {
    throw InputError("unknown derive target '" + what + "' (expected poissonize, lift or algebroid)");
  }
  return out;
}

// ------------------------------------------------------------------ verify

void report_residuals(Report& r, const ResidualReport& el, const std::string& prefix) {
  std::map<int, std::vector<const ResidualEntry*>> by_eq;
  for (const auto& e : el.entries) by_eq[e.equation].push_back(&e);
  for (const auto& [eq, entries] : by_eq) {
    bool ok = true;
    const ResidualEntry* worst = entries.front();
    for (const auto* e : entries) {
      ok = ok && e->zero;
      if (e->max_abs > worst->max_abs) worst = e;
    }
    std::string detail = "max |.| = " + num(worst->max_abs);
    if (!ok) detail += " in " + worst->name + " at " + point_text(worst->point);
    Check& c = r.add(prefix + "equation " + std::to_string(eq), ok, detail);
    c.data["max_abs"] = worst->max_abs;
    json entries_json = json::array();
    for (const auto* e : entries) {
      json item = {{"name", e->name}, {"zero", e->zero}, {"max_abs", e->max_abs}};
      if (!e->zero) item["point"] = point_json(e->point);
      entries_json.push_back(item);
    }
    c.data["entries"] = entries_json;
  }
}

void report_morphism(Report& r, const std::string& name, const MorphismReport& m) {
  std::string detail = m.ok ? "" : "worst " + m.worst + " = " + num(m.max_abs) + " at " + point_text(m.point);
  Check& c = r.add(name, m.ok, detail);
  c.data["max_abs"] = m.max_abs;
  if (!m.ok) c.data["worst"] = m.worst;
}

void verify_sigma(Report& r, const JacobiPair& j, SymbolicField f, Variant file_variant, const SurfaceGrid& grid,
                  const ZeroTestOptions& z) {
  SymbolicField model = f;
  if (file_variant == Variant::Constrained) {
    // evaluated as the reduced model with s = 1 and p = eta
    model.variant = Variant::Reduced;
    model.s = Expression(1);
    r.info("constrained data", "residuals of the reduced model with s = 1 and p = eta");
  }
  Check& act = r.info("action", num(action(file_variant, j, f, grid)));
  act.data["value"] = action(file_variant, j, f, grid);

  ResidualReport el = el_residual(j, model, z);
  report_residuals(r, el, "EL ");
  DiscreteField d = tabulate(model, grid);
  ResidualReport de = el_residual(j, d);
  Check& dc = r.info("discrete residual", "max |.| = " + num(de.max_abs) + " on " + grid_json(grid).get<std::string>());
  dc.data["max_abs"] = de.max_abs;

  VBMorphism phi = field_morphism(j, model);
  report_morphism(r, "morphism into T*L^x", morphism_check(phi, z));
  try {
    RxAlgebroid rx = cotangent_rx(poissonize(j));
    JacobiMorphismReport jm = jacobi_morphism_check(lift_phi_to_psi(phi, rx), z);
    Check& c = r.add("jacobi algebroid morphism", jm.ok,
                     jm.anchors_intertwine ? "" : "anchor block residual " + num(jm.anchor_max_abs));
    c.data["anchors_intertwine"] = jm.anchors_intertwine;
  } catch (const std::invalid_argument& e) {
    r.add("jacobi algebroid morphism", false, e.what());
  }
  if (model.variant == Variant::Reduced) {
    ConstraintReport cr = reduced_constraint_check(j, model, z);
    Check& c = r.add("D0 phi = J# o Phi_0", cr.ok, "max |.| = " + num(cr.max_abs));
    c.data["max_abs"] = cr.max_abs;
  }
}

// ------------------------------------------------------------------ example

void example_fields(Report& r, const BuiltinExample& ex, const Settings& s) {
  for (std::size_t i = 0; i < ex.fields.size(); ++i) {
    const SymbolicField& f = ex.fields[i];
    std::string tag = "field " + std::to_string(i + 1) + " (" + to_string(f.variant) + "): ";
    ResidualReport el = el_residual(*ex.jacobi, f, s.zero);
    Check& c = r.add(tag + "EL residual", el.ok, "max |.| = " + num(el.max_abs));
    c.data["max_abs"] = el.max_abs;
    report_morphism(r, tag + "morphism", morphism_check(field_morphism(*ex.jacobi, f), s.zero));
    if (f.variant == Variant::Reduced) {
      ConstraintReport cr = reduced_constraint_check(*ex.jacobi, f, s.zero);
      r.add(tag + "D0 phi = J# o Phi_0", cr.ok, "max |.| = " + num(cr.max_abs));
    }
    ResidualReport de = el_residual(*ex.jacobi, tabulate(f, s.grid));
    Check& dc = r.info(tag + "discrete residual", "max |.| = " + num(de.max_abs));
    dc.data["max_abs"] = de.max_abs;
  }
}

void example_holonomy(Report& r, const JacobiPair& j, const ZeroTestOptions& z) {
  Expression u = var("u");
  HomogeneousPoisson hp = poissonize(j);
  for (int twice : {-2, 1, 4}) {
    Expression c = Expression::rational(twice, 2);
    double cv = twice / 2.0;
    std::vector<Expression> x(j.chart.dim(), Expression(0)), eta(j.chart.dim(), Expression(0));
    x[0] = u;
    eta[0] = c;
    double hol = apath_holonomy(j, {x, eta});
    Check& hc = r.add("holonomy, eta_0 = " + num(cv), std::abs(hol - std::exp(cv)) < 1e-8,
                      "exp(int E^j eta_j du) = " + num(hol));
    hc.data["value"] = hol;
    // the A-path through the same base curve uses ds/du = -E^k pi_k
    APath a;
    a.x = x;
    a.s = exp(-c * u);
    a.pi.assign(j.chart.dim(), Expression(0));
    a.pi[0] = c * exp(-c * u);
    a.z = Expression(1);
    APathReport ar = apath_check(hp, a, 1e-9, z);
    double ratio = std::exp(-cv);
    Check& ac = r.add("A-path, pi_0 = " + num(cv) + " s", ar.ok,
                      "s(1)/s(0) = " + num(ratio) + ", holonomy * ratio = " + num(hol * ratio));
    ac.data["max_defect"] = ar.max_defect;
  }
}

Report run_example(const std::string& name, int k, const Settings& s) {
  ExampleParams params;
  params.k = k;
  BuiltinExample ex = builtin_example(name, params);
  Report r;
  r.command = "example " + name;
  r.inputs = {{"name", name}};
  if (name == "contact-k") {
    r.inputs["k"] = k;
    check_jacobi(r, *ex.jacobi, "jacobi", s.zero);
    check_homogeneous(r, poissonize(*ex.jacobi), s.zero, "poissonize: degree -1");
    example_fields(r, ex, s);
    example_holonomy(r, *ex.jacobi, s.zero);
  } else if (name == "moebius") {
    AtlasReport a = atlas_check(*ex.atlas, s.zero);
    r.add("atlas, E = cos(pi x)", a.ok, a.ok ? "" : a.failure);
    AtlasReport flat = atlas_check(moebius_atlas(Expression(1), Expression(1)), s.zero);
    r.add("atlas, E = 1 rejected", !flat.ok, flat.ok ? "unexpectedly glued" : flat.failure);
    example_fields(r, ex, s);
  } else if (name == "almost-poisson-family1" || name == "almost-poisson-family2") {
    check_jacobi(r, *ex.jacobi, "jacobi (expected to fail)", s.zero);
    r.checks.back().info = true;
    report_morphism(r, "skew algebroid morphism", morphism_check(ex.morphisms[0], s.zero));
    const auto& base = ex.morphisms[0].base.components;
    Box box = ex.morphisms[0].source.base().box();
    bool rank_one = true;
    for (std::size_t a = 0; a < base.size(); ++a)
      for (std::size_t b = a + 1; b < base.size(); ++b) {
        Expression minor = differentiate(base[a], "u") * differentiate(base[b], "t") -
                           differentiate(base[a], "t") * differentiate(base[b], "u");
        rank_one = rank_one && is_zero(minor, box, s.zero);
      }
    r.add("image rank <= 1", rank_one, "2x2 minors of the Jacobian of phi_0");
    example_fields(r, ex, s);
  } else if (name == "ex1-groupoid") {
    r.inputs["k"] = k;
    GroupoidReport g = verify_ex1_groupoid(*ex.groupoid, s.zero);
    for (const auto& item : g.items) {
      Check& c = r.add("groupoid: " + item.name, item.ok, item.detail);
      c.data["max_abs"] = item.max_abs;
    }
    example_fields(r, ex, s);
  }
  return r;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

int run(const std::vector<std::string>& args_in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Jacobi sigma model toolkit", "jsm"};
  app.require_subcommand(1);
  app.fallthrough();
  Settings s;
  std::uint64_t seed = kDefaultSeed;
  double tol = 1e-9;
  int trials = 64;
  std::string grid = "65x65";
  app.add_option("--json", s.json_path, "write the JSON report to a path ('-' for stdout)");
  app.add_option("--seed", seed, "seed of the sample points");
  app.add_option("--tol", tol, "zero-test tolerance")->check(CLI::PositiveNumber);
  app.add_option("--trials", trials, "sample points per zero test")->check(CLI::PositiveNumber);
  app.add_option("--grid", grid, "surface grid NxM for discrete checks");
  app.add_flag("--timing", s.timing, "include wall time in the JSON report");

  std::string check_path;
  auto* check = app.add_subcommand("check", "check a structure file");
  check->add_option("file", check_path)->required();

  std::string derive_path, what, out_path;
  auto* derive = app.add_subcommand("derive", "derive a structure and emit it");
  derive->add_option("file", derive_path)->required();
  derive->add_option("--what", what, "poissonize | lift | algebroid")->required();
  derive->add_option("-o,--output", out_path, "write the derived structure here");

  std::string structure_path, field_path, variant;
  auto* verify = app.add_subcommand("verify", "verify a field configuration against a structure");
  verify->add_option("structure", structure_path)->required();
  verify->add_option("field", field_path)->required();
  verify->add_option("--variant", variant, "homogeneous | reduced | constrained");

  std::string example_name;
  int k = 1;
  auto* example = app.add_subcommand("example", "run a built-in example end to end");
  example->add_option("name", example_name)->required();
  example->add_option("--k", k, "contact dimension parameter for contact-k and ex1-groupoid")->check(CLI::NonNegativeNumber);

  std::vector<std::string> reversed(args_in.rbegin(), args_in.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kPass : kInputError;
  }

  auto t0 = std::chrono::steady_clock::now();
  try {
    s.zero = {trials, tol, seed};
    s.grid = io::parse_grid(grid);
    Report r;
    if (check->parsed()) {
      io::StructureFile sf = io::read_structure_file(check_path);
      r.command = "check";
      r.inputs = {{"structure", check_path}, {"kind", io::kind_name(sf.kind)}};
      check_structure(r, sf, s.zero);
      emit(r, s, out, seconds_since(t0));
    } else if (derive->parsed()) {
      io::StructureFile sf = io::read_structure_file(derive_path);
      r.command = "derive " + what;
      r.inputs = {{"structure", derive_path}, {"kind", io::kind_name(sf.kind)}, {"what", what}};
      io::StructureFile derived = derive_structure(r, sf, what, s.zero);
      std::string text = io::write_structure(derived);
      // the emitted text must read back to the same tensors
      io::StructureFile back = io::read_structure(io::parse_document(text, "<derived>"));
      bool same = back.kind == derived.kind &&
                  (derived.kind == io::Kind::Poisson ? same_tensor(back.poisson->pi, derived.poisson->pi, s.zero)
                                                     : same_algebroid(*back.algebroid, *derived.algebroid, s.zero));
      r.add("emitted file re-reads", same);
      r.extra["emitted"] = text;
      if (!out_path.empty()) {
        std::ofstream f(out_path, std::ios::binary);
        if (!f) throw InputError("cannot write '" + out_path + "'");
        f << text;
        r.inputs["output"] = out_path;
        emit(r, s, out, seconds_since(t0));
      } else if (s.json_path == "-") {
        emit(r, s, out, seconds_since(t0));
      } else {
        // comment lines, so that stdout is itself a valid structure file
        emit(r, s, out, seconds_since(t0), "# ");
        out << text;
      }
    } else if (verify->parsed()) {
      io::StructureFile sf = io::read_structure_file(structure_path);
      io::FieldFile ff = io::read_field_file(field_path);
      if (!variant.empty()) {
        Variant v;
        try {
          v = parse_variant(variant);
        } catch (const std::invalid_argument&) {
          throw InputError("unknown --variant '" + variant + "'");
        }
        if (v != ff.variant.value)
          throw InputError(ff.variant.at, "field variant " + to_string(ff.variant.value) + " does not match --variant " + variant);
      }
      r.command = "verify";
      r.inputs = {{"structure", structure_path}, {"field", field_path}, {"kind", io::kind_name(sf.kind)},
                  {"variant", to_string(ff.variant.value)}};
      SurfaceGrid g = ff.grid ? *ff.grid : s.grid;
      g.T = ff.T;
      s.grid = g;
      if (sf.kind == io::Kind::Jacobi || sf.kind == io::Kind::Atlas) {
        const JacobiPair* j = sf.kind == io::Kind::Jacobi ? &*sf.jacobi : nullptr;
        if (sf.kind == io::Kind::Atlas) {
          j = &sf.atlas->charts.front().jacobi;
          if (ff.chart) {
            j = nullptr;
            for (const auto& c : sf.atlas->charts)
              if (c.name == ff.chart->value) j = &c.jacobi;
            if (!j) throw InputError(ff.chart->at, "the atlas has no chart '" + ff.chart->value + "'");
          }
        } else if (ff.chart) {
          throw InputError(ff.chart->at, "chart selects an atlas chart, but the structure is a jacobi pair");
        }
        SymbolicField f = io::bind_field(ff, j->chart.names(), "s");
        verify_sigma(r, *j, f, ff.variant.value, g, s.zero);
        if (ff.morphism_at) {
          AlgebroidStructure t = cotangent_algebroid(j->lambda);
          VBMorphism m = tangent_morphism(sigma_chart(ff.T), t, f.x, io::bind_morphism(ff, j->chart.names()));
          report_morphism(r, "morphism block into T*M (Lambda)", morphism_check(m, s.zero));
        }
      } else if (sf.kind == io::Kind::Poisson) {
        const MultivectorField& p = sf.poisson->pi;
        SymbolicField f = io::bind_field(ff, p.chart().names(), "");
        ResidualReport el = bivector_residual(p, f.x, f.p, ff.T, s.zero);
        report_residuals(r, el, "EL ");
        std::vector<DifferentialForm> rows;
        for (const auto& c : f.p) rows.push_back(to_form(c, sigma_chart(ff.T)));
        report_morphism(r, "morphism into T*M", morphism_check(tangent_morphism(sigma_chart(ff.T), cotangent_algebroid(p), f.x, rows), s.zero));
        if (ff.morphism_at) {
          VBMorphism m = tangent_morphism(sigma_chart(ff.T), cotangent_algebroid(p), f.x, io::bind_morphism(ff, p.chart().names()));
          report_morphism(r, "morphism block into T*M", morphism_check(m, s.zero));
        }
      } else {
        throw InputError("verify needs a jacobi, atlas or poisson structure, got " + io::kind_name(sf.kind));
      }
      emit(r, s, out, seconds_since(t0));
    } else if (example->parsed()) {
      r = run_example(example_name, k, s);
      emit(r, s, out, seconds_since(t0));
    }
    return r.ok() ? kPass : kCheckFailure;
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const EvaluationError& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::logic_error& e) {
    err << "internal inconsistency: " << e.what() << "\n";
    return kCheckFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  }
}

}  // namespace jsm::cli
