#include "formats.hpp"

#include <set>
#include <sstream>

namespace jsm::io {

std::string kind_name(Kind k) {
  switch (k) {
    case Kind::Jacobi: return "jacobi";
    case Kind::Poisson: return "poisson";
    case Kind::Algebroid: return "algebroid";
    case Kind::Atlas: return "atlas";
  }
  return "?";
}

namespace {

// Expression strings report parse errors at the offending character inside the quotes.
Expression expression(const Value& v, const std::set<std::string>& vars) {
  const std::string& text = v.as_string();
  try {
    return parse(text, vars);
  } catch (const ParseError& e) {
    Location at = v.at;
    at.col += 1 + e.position();
    throw InputError(at, e.what());
  }
}

Expression expression(const Value& v, const Chart& chart) { return expression(v, chart.name_set()); }

std::vector<std::string> string_list(const Value& v) {
  std::vector<std::string> out;
  for (const auto& item : v.as_array()) out.push_back(item.as_string());
  return out;
}

bool identifier(const std::string& s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  for (char c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
  return s != "pi" && s != "sin" && s != "cos" && s != "exp" && s != "log";
}

const Section& section(const Document& doc, const std::string& name) {
  if (const Section* s = doc.find(name)) return *s;
  throw InputError(doc.root().at, "missing section [" + name + "]");
}

Chart read_chart(const Section& s) {
  const Value& names_v = s.require("names");
  std::vector<std::string> names = string_list(names_v);
  if (names.empty()) throw InputError(names_v.at, "a chart needs at least one coordinate");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < names.size(); ++i) {
    const Value& item = names_v.as_array()[i];
    if (!identifier(names[i])) throw InputError(item.at, "'" + names[i] + "' is not a coordinate name");
    if (!seen.insert(names[i]).second) throw InputError(item.at, "duplicate coordinate '" + names[i] + "'");
  }
  std::vector<Interval> boxes(names.size(), Interval{-1.0, 1.0});
  if (const Entry* b = s.find("boxes")) {
    const auto& rows = b->value.as_array();
    if (rows.size() != names.size())
      throw InputError(b->value.at, "expected " + std::to_string(names.size()) + " boxes");
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& pair = rows[i].as_array();
      if (pair.size() != 2) throw InputError(rows[i].at, "a box is [lo, hi]");
      boxes[i] = {pair[0].as_number(), pair[1].as_number()};
      if (!(boxes[i].lo < boxes[i].hi)) throw InputError(rows[i].at, "empty box");
    }
  }
  std::vector<int> weights;
  if (const Entry* w = s.find("weights")) {
    const auto& items = w->value.as_array();
    if (items.size() != names.size())
      throw InputError(w->value.at, "expected " + std::to_string(names.size()) + " weights");
    for (const auto& item : items) weights.push_back(static_cast<int>(item.as_integer()));
  }
  return Chart(names, boxes, weights);
}

// "x y" -> chart indices, strictly increasing.
IndexTuple index_key(const Entry& e, const Chart& chart, std::size_t arity) {
  std::istringstream in(e.key);
  std::string name;
  IndexTuple idx;
  while (in >> name) {
    if (!chart.contains(name)) throw InputError(e.at, "unknown coordinate '" + name + "' in key '" + e.key + "'");
    idx.push_back(chart.index(name));
  }
  if (idx.size() != arity)
    throw InputError(e.at, "key '" + e.key + "' needs " + std::to_string(arity) + " coordinate name(s)");
  for (std::size_t i = 1; i < idx.size(); ++i)
    if (idx[i - 1] >= idx[i]) throw InputError(e.at, "indices in '" + e.key + "' must be strictly increasing in chart order");
  return idx;
}

MultivectorField read_tensor(const Section* s, const Chart& chart, int degree) {
  MultivectorField out(chart, degree);
  if (!s) return out;
  for (const auto& e : s->entries) out.set(index_key(e, chart, static_cast<std::size_t>(degree)), expression(e.value, chart));
  return out;
}

JacobiPair read_jacobi(const Document& doc, const std::string& prefix) {
  Chart chart = read_chart(section(doc, prefix.empty() ? "chart" : prefix));
  std::string dot = prefix.empty() ? "" : prefix + ".";
  MultivectorField lambda = read_tensor(doc.find(dot + "lambda"), chart, 2);
  MultivectorField e = read_tensor(doc.find(dot + "e"), chart, 1);
  return JacobiPair(lambda, e);
}

std::string box_list(const Chart& c) {
  std::string out = "[";
  for (std::size_t i = 0; i < c.dim(); ++i) {
    if (i) out += ", ";
    out += "[" + format_number(c.intervals()[i].lo) + ", " + format_number(c.intervals()[i].hi) + "]";
  }
  return out + "]";
}

std::string name_list(const std::vector<std::string>& names) {
  std::string out = "[";
  for (std::size_t i = 0; i < names.size(); ++i) out += (i ? ", " : "") + quote(names[i]);
  return out + "]";
}

void write_chart(std::ostream& out, const std::string& header, const Chart& c) {
  out << "[" << header << "]\n";
  out << "names = " << name_list(c.names()) << "\n";
  out << "boxes = " << box_list(c) << "\n";
  if (c.has_weights()) {
    out << "weights = [";
    for (std::size_t i = 0; i < c.dim(); ++i) out << (i ? ", " : "") << c.weights()[i];
    out << "]\n";
  }
}

void write_tensor(std::ostream& out, const std::string& header, const MultivectorField& t) {
  out << "\n[" << header << "]\n";
  for (const auto& [idx, v] : t.components()) {
    if (v.is_literal_zero()) continue;
    std::string key;
    for (std::size_t i = 0; i < idx.size(); ++i) key += (i ? " " : "") + t.chart().name(static_cast<std::size_t>(idx[i]));
    out << (idx.size() == 1 ? key : quote(key)) << " = " << quote(v.to_string()) << "\n";
  }
}

Covector covector(const Value& v, const std::set<std::string>& vars) {
  const auto& pair = v.as_array();
  if (pair.size() != 2) throw InputError(v.at, "a 1-form is [\"du part\", \"dt part\"]");
  return {expression(pair[0], vars), expression(pair[1], vars)};
}

const std::set<std::string> kSurfaceVars{"u", "t"};

std::vector<std::pair<std::string, Located<Covector>>> covector_rows(const Section& s) {
  std::vector<std::pair<std::string, Located<Covector>>> out;
  for (const auto& e : s.entries) out.push_back({e.key, {covector(e.value, kSurfaceVars), e.at}});
  return out;
}

}  // namespace

StructureFile read_structure(const Document& doc) {
  if (doc.sections.size() == 1 && doc.root().entries.empty())
    throw InputError(Location{doc.file, 1, 1}, "empty structure file");
  const Value& kind_v = doc.root().require("kind");
  const std::string& kind = kind_v.as_string();
  StructureFile out;
  if (kind == "jacobi") {
    out.kind = Kind::Jacobi;
    out.jacobi = read_jacobi(doc, "");
  } else if (kind == "poisson") {
    out.kind = Kind::Poisson;
    Chart chart = read_chart(section(doc, "chart"));
    PoissonData p{read_tensor(doc.find("pi"), chart, 2), std::nullopt, {}};
    if (const Entry* f = doc.root().find("fiber")) {
      if (!chart.contains(f->value.as_string()))
        throw InputError(f->value.at, "fiber '" + f->value.as_string() + "' is not a chart coordinate");
      p.fiber = f->value.as_string();
    }
    if (const Entry* l = doc.root().find("linear")) {
      p.linear = string_list(l->value);
      for (std::size_t i = 0; i < p.linear.size(); ++i)
        if (!chart.contains(p.linear[i]))
          throw InputError(l->value.as_array()[i].at, "'" + p.linear[i] + "' is not a chart coordinate");
    }
    out.poisson = p;
  } else if (kind == "algebroid") {
    out.kind = Kind::Algebroid;
    Chart base = read_chart(section(doc, "base"));
    Chart fiber = read_chart(section(doc, "fiber"));
    for (const auto& n : fiber.names())
      if (base.contains(n)) throw InputError(section(doc, "fiber").at, "fiber name '" + n + "' is also a base coordinate");
    std::vector<std::vector<Expression>> anchor(fiber.dim(), std::vector<Expression>(base.dim(), Expression(0)));
    if (const Section* s = doc.find("anchor")) {
      for (const auto& e : s->entries) {
        std::istringstream in(e.key);
        std::string y, x, extra;
        in >> y >> x;
        if (y.empty() || x.empty() || (in >> extra)) throw InputError(e.at, "anchor keys are \"<generator> <coordinate>\"");
        if (!fiber.contains(y)) throw InputError(e.at, "unknown generator '" + y + "'");
        if (!base.contains(x)) throw InputError(e.at, "unknown coordinate '" + x + "'");
        anchor[static_cast<std::size_t>(fiber.index(y))][static_cast<std::size_t>(base.index(x))] = expression(e.value, base);
      }
    }
    std::vector<MultivectorField> c(fiber.dim(), MultivectorField(fiber, 2));
    if (const Section* s = doc.find("structure")) {
      for (const auto& e : s->entries) {
        std::istringstream in(e.key);
        std::string k, rest, name;
        in >> k;
        while (in >> name) rest += (rest.empty() ? "" : " ") + name;
        if (!fiber.contains(k)) throw InputError(e.at, "unknown generator '" + k + "'");
        Entry inner{rest, e.at, e.value};
        c[static_cast<std::size_t>(fiber.index(k))].set(index_key(inner, fiber, 2), expression(e.value, base));
      }
    }
    out.algebroid = AlgebroidStructure(base, fiber, anchor, c);
  } else if (kind == "atlas") {
    out.kind = Kind::Atlas;
    LineBundleAtlas atlas;
    std::map<std::string, Chart> charts;
    for (const Section* s : doc.with_prefix("chart")) {
      std::string name = s->name.substr(6);
      if (name.find('.') != std::string::npos) continue;
      JacobiPair j = read_jacobi(doc, s->name);
      charts.emplace(name, j.chart);
      atlas.charts.push_back({name, j});
    }
    for (const Section* s : doc.with_prefix("chart")) {
      std::string rest = s->name.substr(6);
      auto dot = rest.find('.');
      if (dot == std::string::npos) continue;
      std::string tail = rest.substr(dot + 1);
      if (!charts.count(rest.substr(0, dot)) || (tail != "lambda" && tail != "e"))
        throw InputError(s->at, "unexpected section [" + s->name + "]");
    }
    if (atlas.charts.empty()) throw InputError(doc.root().at, "an atlas needs at least one [chart.<name>] section");
    for (const Section* s : doc.with_prefix("overlap")) {
      Overlap o;
      const Value& from = s->require("from");
      const Value& to = s->require("to");
      o.from = from.as_string();
      o.to = to.as_string();
      if (!charts.count(o.from)) throw InputError(from.at, "unknown chart '" + o.from + "'");
      if (!charts.count(o.to)) throw InputError(to.at, "unknown chart '" + o.to + "'");
      const Chart& src = charts.at(o.from);
      const Chart& dst = charts.at(o.to);
      const Value& region = s->require("region");
      const auto& rows = region.as_array();
      if (rows.size() != src.dim()) throw InputError(region.at, "expected " + std::to_string(src.dim()) + " region boxes");
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& pair = rows[i].as_array();
        if (pair.size() != 2) throw InputError(rows[i].at, "a box is [lo, hi]");
        o.region[src.name(i)] = {pair[0].as_number(), pair[1].as_number()};
      }
      const Value& map = s->require("map");
      const auto& comps = map.as_array();
      if (comps.size() != dst.dim()) throw InputError(map.at, "expected " + std::to_string(dst.dim()) + " map components");
      for (const auto& c : comps) o.base_map.push_back(expression(c, src));
      o.factor = expression(s->require("factor"), src);
      atlas.overlaps.push_back(o);
    }
    out.atlas = atlas;
  } else {
    throw InputError(kind_v.at, "unknown kind '" + kind + "' (expected jacobi, poisson, algebroid or atlas)");
  }
  for (const auto& s : doc.sections) {
    static const std::map<std::string, std::set<std::string>> known{
        {"jacobi", {"", "chart", "lambda", "e"}},
        {"poisson", {"", "chart", "pi"}},
        {"algebroid", {"", "base", "fiber", "anchor", "structure"}},
    };
    auto it = known.find(kind);
    if (it == known.end()) {
      if (!s.name.empty() && s.name.rfind("chart.", 0) != 0 && s.name.rfind("overlap.", 0) != 0)
        throw InputError(s.at, "unexpected section [" + s.name + "] for kind " + kind);
    } else if (!it->second.count(s.name)) {
      throw InputError(s.at, "unexpected section [" + s.name + "] for kind " + kind);
    }
  }
  return out;
}

StructureFile read_structure_file(const std::string& path) { return read_structure(read_document(path)); }

std::string write_structure(const StructureFile& s) {
  std::ostringstream out;
  out << "kind = " << quote(kind_name(s.kind)) << "\n";
  switch (s.kind) {
    case Kind::Jacobi:
      out << "\n";
      write_chart(out, "chart", s.jacobi->chart);
      write_tensor(out, "lambda", s.jacobi->lambda);
      write_tensor(out, "e", s.jacobi->e);
      break;
    case Kind::Poisson:
      if (s.poisson->fiber) out << "fiber = " << quote(*s.poisson->fiber) << "\n";
      if (!s.poisson->linear.empty()) out << "linear = " << name_list(s.poisson->linear) << "\n";
      out << "\n";
      write_chart(out, "chart", s.poisson->pi.chart());
      write_tensor(out, "pi", s.poisson->pi);
      break;
    case Kind::Algebroid: {
      const AlgebroidStructure& a = *s.algebroid;
      out << "\n";
      write_chart(out, "base", a.base());
      out << "\n";
      write_chart(out, "fiber", a.fiber());
      out << "\n[anchor]\n";
      for (std::size_t i = 0; i < a.rank(); ++i)
        for (std::size_t x = 0; x < a.base().dim(); ++x)
          if (!a.anchor(i, x).is_literal_zero())
            out << quote(a.fiber().name(i) + " " + a.base().name(x)) << " = " << quote(a.anchor(i, x).to_string()) << "\n";
      out << "\n[structure]\n";
      for (std::size_t k = 0; k < a.rank(); ++k)
        for (std::size_t i = 0; i < a.rank(); ++i)
          for (std::size_t j = i + 1; j < a.rank(); ++j) {
            Expression c = a.c(k, i, j);
            if (c.is_literal_zero()) continue;
            out << quote(a.fiber().name(k) + " " + a.fiber().name(i) + " " + a.fiber().name(j)) << " = "
                << quote(c.to_string()) << "\n";
          }
      break;
    }
    case Kind::Atlas:
      for (const auto& c : s.atlas->charts) {
        out << "\n";
        write_chart(out, "chart." + c.name, c.jacobi.chart);
        write_tensor(out, "chart." + c.name + ".lambda", c.jacobi.lambda);
        write_tensor(out, "chart." + c.name + ".e", c.jacobi.e);
      }
      for (std::size_t i = 0; i < s.atlas->overlaps.size(); ++i) {
        const Overlap& o = s.atlas->overlaps[i];
        const Chart* src = nullptr;
        for (const auto& c : s.atlas->charts)
          if (c.name == o.from) src = &c.jacobi.chart;
        out << "\n[overlap." << i + 1 << "]\n";
        out << "from = " << quote(o.from) << "\nto = " << quote(o.to) << "\nregion = [";
        for (std::size_t k = 0; src && k < src->dim(); ++k) {
          Interval iv = o.region.at(src->name(k));
          out << (k ? ", " : "") << "[" << format_number(iv.lo) << ", " << format_number(iv.hi) << "]";
        }
        out << "]\nmap = [";
        for (std::size_t k = 0; k < o.base_map.size(); ++k) out << (k ? ", " : "") << quote(o.base_map[k].to_string());
        out << "]\nfactor = " << quote(o.factor.to_string()) << "\n";
      }
      break;
  }
  return out.str();
}

SurfaceGrid parse_grid(const std::string& text) {
  auto x = text.find('x');
  if (x == std::string::npos) throw InputError("grid '" + text + "' is not of the form NxM");
  try {
    std::size_t a = 0, b = 0;
    int nu = std::stoi(text.substr(0, x), &a);
    int nt = std::stoi(text.substr(x + 1), &b);
    if (a != x || b != text.size() - x - 1) throw std::invalid_argument("trailing");
    if (nu < 3 || nt < 3) throw InputError("grid '" + text + "' needs at least 3 nodes per direction");
    return SurfaceGrid(nu, nt);
  } catch (const std::logic_error&) {
    throw InputError("grid '" + text + "' is not of the form NxM");
  }
}

FieldFile read_field(const Document& doc) {
  if (doc.sections.size() == 1 && doc.root().entries.empty())
    throw InputError(Location{doc.file, 1, 1}, "empty field file");
  FieldFile f;
  f.file = doc.file;
  const Section& root = doc.root();
  const Value& v = root.require("variant");
  try {
    f.variant = {parse_variant(v.as_string()), v.at};
  } catch (const std::invalid_argument&) {
    throw InputError(v.at, "unknown variant '" + v.as_string() + "' (expected homogeneous, reduced or constrained)");
  }
  for (const auto& e : root.entries) {
    if (e.key == "variant") continue;
    if (e.key == "chart") {
      f.chart = Located<std::string>{e.value.as_string(), e.value.at};
    } else if (e.key == "T") {
      f.T = e.value.as_number();
      if (!(f.T > 0)) throw InputError(e.value.at, "T must be positive");
    } else if (e.key == "grid") {
      try {
        f.grid = parse_grid(e.value.as_string());
      } catch (const InputError& err) {
        throw InputError(e.value.at, err.what());
      }
    } else if (e.key == "boundary_condition") {
      f.boundary_condition = e.value.as_bool();
    } else {
      throw InputError(e.at, "unknown key '" + e.key + "'");
    }
  }
  const Section& map = section(doc, "map");
  f.map_at = map.at;
  for (const auto& e : map.entries) f.map.push_back({e.key, {expression(e.value, kSurfaceVars), e.at}});
  if (const Section* p = doc.find("p")) {
    f.p_at = p->at;
    f.p = covector_rows(*p);
  } else {
    f.p_at = map.at;
  }
  if (const Section* z = doc.find("z")) {
    for (const auto& e : z->entries)
      if (e.key != "du" && e.key != "dt") throw InputError(e.at, "[z] takes du and dt");
    if (const Entry* du = z->find("du")) f.z.du = expression(du->value, kSurfaceVars);
    if (const Entry* dt = z->find("dt")) f.z.dt = expression(dt->value, kSurfaceVars);
  }
  if (const Section* m = doc.find("morphism")) {
    f.morphism_at = m->at;
    f.morphism = covector_rows(*m);
  }
  for (const auto& s : doc.sections)
    if (!s.name.empty() && s.name != "map" && s.name != "p" && s.name != "z" && s.name != "morphism")
      throw InputError(s.at, "unexpected section [" + s.name + "] in a field file");
  return f;
}

FieldFile read_field_file(const std::string& path) { return read_field(read_document(path)); }

namespace {

template <class T>
std::vector<T> ordered(const std::vector<std::pair<std::string, Located<T>>>& rows, const std::vector<std::string>& names,
                       const Location& header, const std::string& what, const T& fallback, bool required) {
  std::vector<T> out;
  for (const auto& n : names) {
    const Located<T>* hit = nullptr;
    for (const auto& [k, v] : rows)
      if (k == n) hit = &v;
    if (!hit && required) throw InputError(header, what + " has no entry for '" + n + "'");
    out.push_back(hit ? hit->value : fallback);
  }
  for (const auto& [k, v] : rows)
    if (std::find(names.begin(), names.end(), k) == names.end())
      throw InputError(v.at, "'" + k + "' is not a target coordinate");
  return out;
}

}  // namespace

SymbolicField bind_field(const FieldFile& f, const std::vector<std::string>& coordinates, const std::string& fiber) {
  SymbolicField out;
  out.variant = f.variant.value;
  out.T = f.T;
  out.boundary_condition = f.boundary_condition;
  std::vector<std::string> names = coordinates;
  bool has_fiber = !fiber.empty();
  if (has_fiber) {
    if (std::find(names.begin(), names.end(), fiber) != names.end())
      throw InputError(f.map_at, "fiber name '" + fiber + "' collides with a target coordinate");
    names.push_back(fiber);
  }
  // the constrained variant has no fiber field; s may be omitted there
  bool need_s = has_fiber && f.variant.value != Variant::Constrained;
  std::vector<std::pair<std::string, Located<Expression>>> rows = f.map;
  if (has_fiber && !need_s) {
    bool present = false;
    for (const auto& r : rows) present = present || r.first == fiber;
    if (!present) rows.push_back({fiber, {Expression(1), f.map_at}});
  }
  std::vector<Expression> all = ordered(rows, names, f.map_at, "[map]", Expression(0), true);
  out.x.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(coordinates.size()));
  if (has_fiber) out.s = all.back();
  Covector zero{Expression(0), Expression(0)};
  out.p = ordered(f.p, coordinates, f.p_at, "[p]", zero, false);
  out.z = f.z;
  return out;
}

std::vector<DifferentialForm> bind_morphism(const FieldFile& f, const std::vector<std::string>& coordinates) {
  Covector zero{Expression(0), Expression(0)};
  std::vector<DifferentialForm> out;
  Chart sigma = sigma_chart(f.T);
  for (const auto& c : ordered(f.morphism, coordinates, *f.morphism_at, "[morphism]", zero, false))
    out.push_back(to_form(c, sigma));
  return out;
}

std::vector<Expression> bind_base(const FieldFile& f, const std::vector<std::string>& coordinates) {
  std::vector<Expression> out;
  for (const auto& n : coordinates) {
    const Located<Expression>* hit = nullptr;
    for (const auto& [k, v] : f.map)
      if (k == n) hit = &v;
    if (!hit) throw InputError(f.map_at, "[map] has no entry for '" + n + "'");
    out.push_back(hit->value);
  }
  return out;
}

}  // namespace jsm::io
