#include "jsm/expr.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numbers>
#include <sstream>

namespace jsm {

struct Node {
  Expression::Kind kind = Expression::Kind::Const;
  Rational value{0};
  std::string name;
  int exponent = 0;
  std::vector<Expression> args;
  std::uint64_t hash = 0;
  std::size_t size = 1;
};

namespace {

using Kind = Expression::Kind;

constexpr double kTinyDenominator = 1e-12;

std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
  h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  return h;
}

std::uint64_t hash_string(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t hash_rational(const Rational& r) {
  double d = r.convert_to<double>();
  std::uint64_t bits = 0;
  std::memcpy(&bits, &d, sizeof(bits));
  return bits;
}

int kind_rank(Kind k) {
  switch (k) {
    case Kind::Const: return 0;
    case Kind::Pi: return 1;
    case Kind::Var: return 2;
    case Kind::Pow: return 3;
    case Kind::Prod: return 4;
    case Kind::Quot: return 5;
    case Kind::Sum: return 6;
    case Kind::Sin: return 7;
    case Kind::Cos: return 8;
    case Kind::Exp: return 9;
    case Kind::Log: return 10;
  }
  return 11;
}

std::string format_point(const SamplePoint& p) {
  std::ostringstream os;
  os.precision(17);
  os << "{";
  bool first = true;
  for (const auto& [k, v] : p) {
    if (!first) os << ", ";
    first = false;
    os << k << ": " << v;
  }
  os << "}";
  return os.str();
}

}  // namespace

struct NodeFactory {
  static Expression build(Node n) {
    std::uint64_t h = mix(0xcbf29ce484222325ULL, static_cast<std::uint64_t>(kind_rank(n.kind)));
    std::size_t size = 1;
    switch (n.kind) {
      case Kind::Const: h = mix(h, hash_rational(n.value)); break;
      case Kind::Var: h = mix(h, hash_string(n.name)); break;
      case Kind::Pow: h = mix(h, static_cast<std::uint64_t>(static_cast<std::int64_t>(n.exponent))); break;
      default: break;
    }
    for (const auto& a : n.args) {
      h = mix(h, a.hash());
      size += a.size();
    }
    n.hash = h;
    n.size = size;
    return Expression(std::make_shared<const Node>(std::move(n)));
  }
  static const Node& node(const Expression& e) { return *e.node_; }
  static const void* id(const Expression& e) { return e.node_.get(); }
};

ParseError::ParseError(std::size_t position, const std::string& message)
    : std::runtime_error(message), position_(position) {}

UndeclaredVariable::UndeclaredVariable(std::size_t position, std::string name)
    : ParseError(position, "undeclared variable '" + name + "'"), name_(std::move(name)) {}

EvaluationError::EvaluationError(const std::string& what, SamplePoint point)
    : std::runtime_error(what + " at " + format_point(point)), point_(std::move(point)) {}

namespace {

Expression make_const(const Rational& r) {
  Node n;
  n.kind = Kind::Const;
  n.value = r;
  return NodeFactory::build(std::move(n));
}

const Expression& zero_expr() {
  static const Expression z = make_const(Rational(0));
  return z;
}
const Expression& one_expr() {
  static const Expression o = make_const(Rational(1));
  return o;
}

Expression raw(Kind kind, std::vector<Expression> args, int exponent = 0) {
  Node n;
  n.kind = kind;
  n.args = std::move(args);
  n.exponent = exponent;
  return NodeFactory::build(std::move(n));
}

}  // namespace

Expression::Expression() : Expression(zero_expr()) {}
Expression::Expression(int value) : Expression(make_const(Rational(value))) {}
Expression::Expression(long long value) : Expression(make_const(Rational(value))) {}
Expression::Expression(const Rational& value) : Expression(make_const(value)) {}

Expression Expression::rational(long long num, long long den) {
  if (den == 0) throw std::invalid_argument("rational with zero denominator");
  return make_const(Rational(num, den));
}

Expression Expression::variable(const std::string& name) {
  Node n;
  n.kind = Kind::Var;
  n.name = name;
  return NodeFactory::build(std::move(n));
}

Expression Expression::pi() {
  static const Expression p = [] {
    Node n;
    n.kind = Kind::Pi;
    return NodeFactory::build(std::move(n));
  }();
  return p;
}

Expression var(const std::string& name) { return Expression::variable(name); }

Expression::Kind Expression::kind() const { return node_->kind; }
const Rational& Expression::value() const { return node_->value; }
const std::string& Expression::name() const { return node_->name; }
int Expression::exponent() const { return node_->exponent; }
const std::vector<Expression>& Expression::args() const { return node_->args; }
std::uint64_t Expression::hash() const { return node_->hash; }
std::size_t Expression::size() const { return node_->size; }

bool Expression::is_literal_zero() const { return is_constant() && node_->value == 0; }
bool Expression::is_literal_one() const { return is_constant() && node_->value == 1; }

int Expression::compare(const Expression& a, const Expression& b) {
  if (a.node_ == b.node_) return 0;
  const Node& x = *a.node_;
  const Node& y = *b.node_;
  int ra = kind_rank(x.kind), rb = kind_rank(y.kind);
  if (ra != rb) return ra < rb ? -1 : 1;
  switch (x.kind) {
    case Kind::Const:
      if (x.value == y.value) return 0;
      return x.value < y.value ? -1 : 1;
    case Kind::Pi:
      return 0;
    case Kind::Var:
      return x.name == y.name ? 0 : (x.name < y.name ? -1 : 1);
    case Kind::Pow: {
      int c = compare(x.args[0], y.args[0]);
      if (c != 0) return c;
      if (x.exponent == y.exponent) return 0;
      return x.exponent < y.exponent ? -1 : 1;
    }
    default: {
      std::size_t n = std::min(x.args.size(), y.args.size());
      for (std::size_t i = 0; i < n; ++i) {
        int c = compare(x.args[i], y.args[i]);
        if (c != 0) return c;
      }
      if (x.args.size() == y.args.size()) return 0;
      return x.args.size() < y.args.size() ? -1 : 1;
    }
  }
}

namespace {

struct Less {
  bool operator()(const Expression& a, const Expression& b) const { return Expression::compare(a, b) < 0; }
};

// A term of a sum as coefficient times a constant-free rest.
std::pair<Rational, Expression> split_coefficient(const Expression& t) {
  if (t.kind() == Kind::Const) return {t.value(), one_expr()};
  if (t.kind() == Kind::Prod && t.args().front().kind() == Kind::Const) {
    const auto& a = t.args();
    if (a.size() == 2) return {a[0].value(), a[1]};
    return {a[0].value(), raw(Kind::Prod, std::vector<Expression>(a.begin() + 1, a.end()))};
  }
  return {Rational(1), t};
}

Rational rational_pow(const Rational& b, int n) {
  Rational r(1);
  Rational base = n < 0 ? Rational(1) / b : b;
  for (int i = 0; i < std::abs(n); ++i) r *= base;
  return r;
}

}  // namespace

Expression Expression::make_sum(std::vector<Expression> terms) {
  std::vector<Expression> flat;
  flat.reserve(terms.size());
  for (auto& t : terms) {
    if (t.kind() == Kind::Sum) {
      for (const auto& a : t.args()) flat.push_back(a);
    } else {
      flat.push_back(std::move(t));
    }
  }
  Rational constant(0);
  std::vector<std::pair<Expression, Rational>> parts;
  for (const auto& t : flat) {
    if (t.kind() == Kind::Const) {
      constant += t.value();
      continue;
    }
    auto [c, rest] = split_coefficient(t);
    parts.emplace_back(rest, c);
  }
  std::stable_sort(parts.begin(), parts.end(),
                   [](const auto& a, const auto& b) { return compare(a.first, b.first) < 0; });
  std::vector<Expression> out;
  for (std::size_t i = 0; i < parts.size();) {
    Rational c = parts[i].second;
    std::size_t j = i + 1;
    while (j < parts.size() && compare(parts[i].first, parts[j].first) == 0) {
      c += parts[j].second;
      ++j;
    }
    if (c != 0) {
      if (c == 1) {
        out.push_back(parts[i].first);
      } else {
        out.push_back(make_product({Expression(c), parts[i].first}));
      }
    }
    i = j;
  }
  if (constant != 0) out.push_back(make_const(constant));
  if (out.empty()) return zero_expr();
  if (out.size() == 1) return out.front();
  return raw(Kind::Sum, std::move(out));
}

Expression Expression::make_product(std::vector<Expression> factors) {
  Rational coef(1);
  std::vector<std::pair<Expression, int>> powers;
  std::vector<Expression> stack(factors.rbegin(), factors.rend());
  while (!stack.empty()) {
    Expression f = std::move(stack.back());
    stack.pop_back();
    switch (f.kind()) {
      case Kind::Const:
        coef *= f.value();
        break;
      case Kind::Prod:
        for (auto it = f.args().rbegin(); it != f.args().rend(); ++it) stack.push_back(*it);
        break;
      case Kind::Pow:
        powers.emplace_back(f.args()[0], f.exponent());
        break;
      default:
        powers.emplace_back(f, 1);
        break;
    }
  }
  if (coef == 0) return zero_expr();
  std::stable_sort(powers.begin(), powers.end(), [](const auto& a, const auto& b) {
    int c = compare(a.first, b.first);
    if (c != 0) return c < 0;
    return (a.second > 0) < (b.second > 0);
  });
  std::vector<Expression> out;
  for (std::size_t i = 0; i < powers.size();) {
    int n = powers[i].second;
    std::size_t j = i + 1;
    // Exponents of opposite sign are not merged, so x * x^-1 keeps its singular locus.
    while (j < powers.size() && compare(powers[i].first, powers[j].first) == 0 &&
           (powers[j].second > 0) == (powers[i].second > 0)) {
      n += powers[j].second;
      ++j;
    }
    Expression p = make_power(powers[i].first, n);
    if (p.kind() == Kind::Const) {
      coef *= p.value();
    } else if (p.kind() == Kind::Prod) {
      auto [c, rest] = split_coefficient(p);
      coef *= c;
      if (rest.kind() == Kind::Prod) {
        for (const auto& a : rest.args()) out.push_back(a);
      } else {
        out.push_back(rest);
      }
    } else {
      out.push_back(p);
    }
    i = j;
  }
  if (coef == 0) return zero_expr();
  std::stable_sort(out.begin(), out.end(), Less{});
  if (out.empty()) return make_const(coef);
  if (coef == 1 && out.size() == 1) return out.front();
  if (coef != 1) out.insert(out.begin(), make_const(coef));
  return raw(Kind::Prod, std::move(out));
}

Expression Expression::make_power(const Expression& base, int exponent) {
  if (exponent == 0) return one_expr();
  if (exponent == 1) return base;
  if (base.kind() == Kind::Const) {
    if (base.value() == 0) {
      if (exponent > 0) return zero_expr();
      return raw(Kind::Pow, {base}, exponent);
    }
    return make_const(rational_pow(base.value(), exponent));
  }
  if (base.kind() == Kind::Pow) {
    long long n = static_cast<long long>(base.exponent()) * exponent;
    return make_power(base.args()[0], static_cast<int>(n));
  }
  return raw(Kind::Pow, {base}, exponent);
}

Expression Expression::make_quotient(const Expression& num, const Expression& den) {
  if (den.kind() == Kind::Const) {
    if (den.value() == 0) return raw(Kind::Quot, {num, den});
    return make_product({make_const(Rational(1) / den.value()), num});
  }
  if (num.is_literal_zero()) return zero_expr();
  Rational coef(1);
  Expression n = num;
  Expression d = den;
  if (n.kind() == Kind::Const) {
    coef *= n.value();
    n = one_expr();
  } else if (n.kind() == Kind::Prod) {
    auto [c, rest] = split_coefficient(n);
    coef *= c;
    n = rest;
  }
  if (d.kind() == Kind::Prod) {
    auto [c, rest] = split_coefficient(d);
    coef /= c;
    d = rest;
  }
  Expression q = raw(Kind::Quot, {n, d});
  if (coef == 1) return q;
  return make_product({make_const(coef), q});
}

Expression Expression::make_unary(Kind kind, const Expression& arg) {
  if (arg.is_literal_zero()) {
    if (kind == Kind::Sin) return zero_expr();
    if (kind == Kind::Cos || kind == Kind::Exp) return one_expr();
  }
  if (kind == Kind::Log && arg.is_literal_one()) return zero_expr();
  if (kind != Kind::Sin && kind != Kind::Cos && kind != Kind::Exp && kind != Kind::Log) {
    throw std::invalid_argument("make_unary: not a unary function kind");
  }
  return raw(kind, {arg});
}

Expression operator+(const Expression& a, const Expression& b) { return Expression::make_sum({a, b}); }
Expression operator-(const Expression& a, const Expression& b) {
  return Expression::make_sum({a, Expression::make_product({Expression(-1), b})});
}
Expression operator*(const Expression& a, const Expression& b) { return Expression::make_product({a, b}); }
Expression operator/(const Expression& a, const Expression& b) { return Expression::make_quotient(a, b); }
Expression operator-(const Expression& a) { return Expression::make_product({Expression(-1), a}); }
Expression& operator+=(Expression& a, const Expression& b) { return a = a + b; }
Expression& operator-=(Expression& a, const Expression& b) { return a = a - b; }
Expression& operator*=(Expression& a, const Expression& b) { return a = a * b; }

Expression pow(const Expression& base, int exponent) { return Expression::make_power(base, exponent); }
Expression sin(const Expression& e) { return Expression::make_unary(Kind::Sin, e); }
Expression cos(const Expression& e) { return Expression::make_unary(Kind::Cos, e); }
Expression exp(const Expression& e) { return Expression::make_unary(Kind::Exp, e); }
Expression log(const Expression& e) { return Expression::make_unary(Kind::Log, e); }

namespace {

void collect_vars(const Expression& e, std::set<std::string>& out) {
  if (e.kind() == Kind::Var) {
    out.insert(e.name());
    return;
  }
  for (const auto& a : e.args()) collect_vars(a, out);
}

double eval_rec(const Expression& e, const SamplePoint& p) {
  switch (e.kind()) {
    case Kind::Const: return e.value().convert_to<double>();
    case Kind::Pi: return std::numbers::pi;
    case Kind::Var: {
      auto it = p.find(e.name());
      if (it == p.end()) throw EvaluationError("no value for variable '" + e.name() + "'", p);
      return it->second;
    }
    case Kind::Sum: {
      double s = 0.0;
      for (const auto& a : e.args()) s += eval_rec(a, p);
      return s;
    }
    case Kind::Prod: {
      double s = 1.0;
      for (const auto& a : e.args()) s *= eval_rec(a, p);
      return s;
    }
    case Kind::Pow: {
      double b = eval_rec(e.args()[0], p);
      if (e.exponent() < 0 && std::abs(b) < kTinyDenominator) {
        throw EvaluationError("negative power of a value below 1e-12", p);
      }
      return std::pow(b, e.exponent());
    }
    case Kind::Quot: {
      double n = eval_rec(e.args()[0], p);
      double d = eval_rec(e.args()[1], p);
      if (std::abs(d) < kTinyDenominator) throw EvaluationError("division by a value below 1e-12", p);
      return n / d;
    }
    case Kind::Sin: return std::sin(eval_rec(e.args()[0], p));
    case Kind::Cos: return std::cos(eval_rec(e.args()[0], p));
    case Kind::Exp: return std::exp(eval_rec(e.args()[0], p));
    case Kind::Log: {
      double a = eval_rec(e.args()[0], p);
      if (a <= 0.0) throw EvaluationError("log of a non-positive value", p);
      return std::log(a);
    }
  }
  return 0.0;
}

}  // namespace

std::set<std::string> Expression::free_variables() const {
  std::set<std::string> out;
  collect_vars(*this, out);
  return out;
}

bool Expression::depends_on(const std::string& v) const {
  if (kind() == Kind::Var) return name() == v;
  for (const auto& a : args()) {
    if (a.depends_on(v)) return true;
  }
  return false;
}

double Expression::evaluate(const SamplePoint& point) const { return eval_rec(*this, point); }

// ---------------------------------------------------------------- printing

namespace {

constexpr int kPrecSum = 1;
constexpr int kPrecProd = 2;
constexpr int kPrecPow = 3;

std::string rational_text(const Rational& r) {
  auto num = boost::multiprecision::numerator(r);
  auto den = boost::multiprecision::denominator(r);
  if (den == 1) return num.str();
  return num.str() + "/" + den.str();
}

bool is_atom(const Expression& e) {
  switch (e.kind()) {
    case Kind::Pi:
    case Kind::Var:
    case Kind::Sin:
    case Kind::Cos:
    case Kind::Exp:
    case Kind::Log:
      return true;
    case Kind::Const:
      return e.value() >= 0 && boost::multiprecision::denominator(e.value()) == 1;
    default:
      return false;
  }
}

bool is_negative_term(const Expression& t) {
  if (t.kind() == Kind::Const) return t.value() < 0;
  if (t.kind() == Kind::Prod && t.args().front().kind() == Kind::Const) return t.args().front().value() < 0;
  return false;
}

std::string print(const Expression& e, int parent);

std::string wrap(const std::string& s, bool yes) { return yes ? "(" + s + ")" : s; }

std::string print(const Expression& e, int parent) {
  switch (e.kind()) {
    case Kind::Const: {
      std::string s = rational_text(e.value());
      bool frac = boost::multiprecision::denominator(e.value()) != 1;
      bool neg = e.value() < 0;
      return wrap(s, (frac && parent >= kPrecProd) || (neg && parent >= kPrecSum));
    }
    case Kind::Pi: return "pi";
    case Kind::Var: return e.name();
    case Kind::Sum: {
      std::string s;
      bool first = true;
      for (const auto& t : e.args()) {
        if (first) {
          s += print(t, 0);
          first = false;
        } else if (is_negative_term(t)) {
          s += " - " + print(-t, kPrecSum);
        } else {
          s += " + " + print(t, kPrecSum);
        }
      }
      return wrap(s, parent >= kPrecSum);
    }
    case Kind::Prod: {
      const auto& a = e.args();
      std::string s;
      std::size_t start = 0;
      if (a.front().kind() == Kind::Const) {
        const Rational& c = a.front().value();
        start = 1;
        if (c == -1) {
          s = "-";
        } else if (c < 0) {
          s = "-" + print(Expression(Rational(-c)), kPrecPow) + "*";
        } else {
          s = print(a.front(), kPrecPow) + "*";
        }
      }
      for (std::size_t i = start; i < a.size(); ++i) {
        if (i > start) s += "*";
        s += print(a[i], a[i].kind() == Kind::Quot ? kPrecPow : kPrecProd);
      }
      bool lead_minus = !s.empty() && s[0] == '-';
      return wrap(s, parent >= kPrecPow || (lead_minus && parent >= kPrecSum));
    }
    case Kind::Pow: {
      std::string b = print(e.args()[0], 4);
      if (!is_atom(e.args()[0])) b = "(" + print(e.args()[0], 0) + ")";
      return b + "^" + std::to_string(e.exponent());
    }
    case Kind::Quot: {
      std::string n = print(e.args()[0], kPrecSum);
      const Expression& d = e.args()[1];
      std::string ds = (is_atom(d) || d.kind() == Kind::Pow) ? print(d, kPrecPow) : "(" + print(d, 0) + ")";
      return wrap(n + "/" + ds, parent >= kPrecPow);
    }
    case Kind::Sin: return "sin(" + print(e.args()[0], 0) + ")";
    case Kind::Cos: return "cos(" + print(e.args()[0], 0) + ")";
    case Kind::Exp: return "exp(" + print(e.args()[0], 0) + ")";
    case Kind::Log: return "log(" + print(e.args()[0], 0) + ")";
  }
  return "?";
}

}  // namespace

std::string Expression::to_string() const { return print(*this, 0); }

// ---------------------------------------------------------------- parsing

namespace {

class Parser {
 public:
  Parser(std::string_view text, const std::set<std::string>& allowed) : text_(text), allowed_(allowed) {}

  Expression run() {
    skip_ws();
    if (pos_ >= text_.size()) throw ParseError(pos_, "empty expression");
    Expression e = expr();
    skip_ws();
    if (pos_ < text_.size()) throw ParseError(pos_, std::string("unexpected character '") + text_[pos_] + "'");
    return e;
  }

 private:
  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }
  bool peek(char c) {
    skip_ws();
    return pos_ < text_.size() && text_[pos_] == c;
  }
  void expect(char c) {
    if (!peek(c)) {
      if (pos_ >= text_.size()) throw ParseError(pos_, std::string("expected '") + c + "' but reached end of input");
      throw ParseError(pos_, std::string("expected '") + c + "'");
    }
    ++pos_;
  }

  Expression expr() {
    std::vector<Expression> terms{term()};
    while (true) {
      if (peek('+')) {
        ++pos_;
        terms.push_back(term());
      } else if (peek('-')) {
        ++pos_;
        terms.push_back(-term());
      } else {
        break;
      }
    }
    return Expression::make_sum(std::move(terms));
  }

  Expression term() {
    Expression acc = factor();
    while (true) {
      if (peek('*')) {
        ++pos_;
        acc = acc * factor();
      } else if (peek('/')) {
        ++pos_;
        acc = acc / factor();
      } else {
        break;
      }
    }
    return acc;
  }

  Expression factor() {
    if (peek('-')) {
      ++pos_;
      return -factor();
    }
    Expression b = base();
    if (peek('^')) {
      ++pos_;
      skip_ws();
      std::size_t start = pos_;
      bool neg = false;
      if (pos_ < text_.size() && (text_[pos_] == '-' || text_[pos_] == '+')) {
        neg = text_[pos_] == '-';
        ++pos_;
        skip_ws();
      }
      std::size_t digits = pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      if (digits == pos_) throw ParseError(start, "expected integer exponent");
      if (pos_ - digits > 6) throw ParseError(start, "exponent too large");
      int n = std::stoi(std::string(text_.substr(digits, pos_ - digits)));
      b = pow(b, neg ? -n : n);
    }
    return b;
  }

  Expression number() {
    std::size_t start = pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    std::string whole(text_.substr(start, pos_ - start));
    std::string frac;
    if (pos_ < text_.size() && text_[pos_] == '.') {
      ++pos_;
      std::size_t fs = pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      frac = std::string(text_.substr(fs, pos_ - fs));
    }
    if (whole.empty() && frac.empty()) throw ParseError(start, "malformed number");
    boost::multiprecision::cpp_int num(whole.empty() ? std::string("0") : whole);
    boost::multiprecision::cpp_int den(1);
    for (char c : frac) {
      num = num * 10 + (c - '0');
      den *= 10;
    }
    return Expression(Rational(num, den));
  }

  Expression base() {
    skip_ws();
    if (pos_ >= text_.size()) throw ParseError(pos_, "unexpected end of input");
    char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      Expression e = expr();
      expect(')');
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos_;
      while (pos_ < text_.size() &&
             (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
        ++pos_;
      }
      std::string name(text_.substr(start, pos_ - start));
      if (name == "pi") return Expression::pi();
      if (name == "sin" || name == "cos" || name == "exp" || name == "log") {
        if (!peek('(')) throw ParseError(pos_, "expected '(' after " + name);
        ++pos_;
        Expression arg = expr();
        expect(')');
        if (name == "sin") return sin(arg);
        if (name == "cos") return cos(arg);
        if (name == "exp") return exp(arg);
        return log(arg);
      }
      if (!allowed_.count(name)) throw UndeclaredVariable(start, name);
      return var(name);
    }
    throw ParseError(pos_, std::string("unexpected character '") + c + "'");
  }

  std::string_view text_;
  const std::set<std::string>& allowed_;
  std::size_t pos_ = 0;
};

}  // namespace

Expression parse(std::string_view text, const std::set<std::string>& allowed_vars) {
  return Parser(text, allowed_vars).run();
}

// ---------------------------------------------------------------- calculus

Expression differentiate(const Expression& e, const std::string& v) {
  if (!e.depends_on(v)) return Expression(0);
  const auto& a = e.args();
  switch (e.kind()) {
    case Kind::Var: return Expression(1);
    case Kind::Sum: {
      std::vector<Expression> terms;
      terms.reserve(a.size());
      for (const auto& t : a) terms.push_back(differentiate(t, v));
      return Expression::make_sum(std::move(terms));
    }
    case Kind::Prod: {
      std::vector<Expression> terms;
      for (std::size_t i = 0; i < a.size(); ++i) {
        if (!a[i].depends_on(v)) continue;
        std::vector<Expression> f(a.begin(), a.end());
        f[i] = differentiate(a[i], v);
        terms.push_back(Expression::make_product(std::move(f)));
      }
      return Expression::make_sum(std::move(terms));
    }
    case Kind::Pow: {
      int n = e.exponent();
      return Expression::make_product({Expression(n), pow(a[0], n - 1), differentiate(a[0], v)});
    }
    case Kind::Quot: {
      Expression dn = differentiate(a[0], v);
      if (!a[1].depends_on(v)) return dn / a[1];
      Expression dd = differentiate(a[1], v);
      if (dn.is_literal_zero()) return -(a[0] * dd) / pow(a[1], 2);
      return (dn * a[1] - a[0] * dd) / pow(a[1], 2);
    }
    case Kind::Sin: return cos(a[0]) * differentiate(a[0], v);
    case Kind::Cos: return -(sin(a[0]) * differentiate(a[0], v));
    case Kind::Exp: return e * differentiate(a[0], v);
    case Kind::Log: return differentiate(a[0], v) / a[0];
    default: return Expression(0);
  }
}

namespace {

Expression rebuild(const Expression& e, const std::vector<Expression>& args) {
  switch (e.kind()) {
    case Kind::Sum: return Expression::make_sum(args);
    case Kind::Prod: return Expression::make_product(args);
    case Kind::Pow: return Expression::make_power(args[0], e.exponent());
    case Kind::Quot: return Expression::make_quotient(args[0], args[1]);
    case Kind::Sin:
    case Kind::Cos:
    case Kind::Exp:
    case Kind::Log: return Expression::make_unary(e.kind(), args[0]);
    default: return e;
  }
}

Expression subst_rec(const Expression& e, const std::map<std::string, Expression>& b) {
  if (e.kind() == Kind::Var) {
    auto it = b.find(e.name());
    return it == b.end() ? e : it->second;
  }
  if (e.args().empty()) return e;
  std::vector<Expression> args;
  args.reserve(e.args().size());
  for (const auto& a : e.args()) args.push_back(subst_rec(a, b));
  return rebuild(e, args);
}

}  // namespace

Expression substitute(const Expression& e, const std::map<std::string, Expression>& bindings) {
  if (bindings.empty()) return e;
  return subst_rec(e, bindings);
}

Expression normalize(const Expression& e) {
  if (e.args().empty()) return e;
  std::vector<Expression> args;
  args.reserve(e.args().size());
  for (const auto& a : e.args()) args.push_back(normalize(a));
  return rebuild(e, args);
}

// ---------------------------------------------------------------- zero test

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::vector<int> first_primes(std::size_t n) {
  std::vector<int> p;
  for (int c = 2; p.size() < n; ++c) {
    bool prime = true;
    for (int q : p) {
      if (q * q > c) break;
      if (c % q == 0) {
        prime = false;
        break;
      }
    }
    if (prime) p.push_back(c);
  }
  return p;
}

double radical_inverse(std::uint64_t i, int base) {
  double inv = 1.0 / base, f = inv, r = 0.0;
  while (i > 0) {
    r += f * static_cast<double>(i % base);
    i /= base;
    f *= inv;
  }
  return r;
}

}  // namespace

std::vector<SamplePoint> sample_points(const Box& box, int trials, std::uint64_t seed) {
  std::vector<int> primes = first_primes(box.size());
  std::vector<double> shift;
  for (std::size_t j = 0; j < box.size(); ++j) {
    shift.push_back(static_cast<double>(splitmix64(seed + 0x100 * j) >> 11) * 0x1.0p-53);
  }
  std::vector<SamplePoint> pts;
  pts.reserve(trials);
  for (int i = 0; i < trials; ++i) {
    SamplePoint p;
    std::size_t j = 0;
    for (const auto& [name, iv] : box) {
      double u = radical_inverse(static_cast<std::uint64_t>(i) + 1, primes[j]) + shift[j];
      u -= std::floor(u);
      p[name] = iv.lo + u * (iv.hi - iv.lo);
      ++j;
    }
    pts.push_back(std::move(p));
  }
  return pts;
}

namespace {

void collect_denominators(const Expression& e, std::vector<Expression>& out, std::set<std::uint64_t>& seen) {
  if (e.kind() == Kind::Quot || (e.kind() == Kind::Pow && e.exponent() < 0)) {
    const Expression& d = e.kind() == Kind::Quot ? e.args()[1] : e.args()[0];
    if (seen.insert(d.hash()).second) out.push_back(d);
  }
  for (const auto& a : e.args()) collect_denominators(a, out, seen);
}

// A denominator that takes both signs over the samples has a zero inside the box.
void check_singular_locus(const Expression& e, const std::vector<SamplePoint>& pts) {
  std::vector<Expression> dens;
  std::set<std::uint64_t> seen;
  collect_denominators(e, dens, seen);
  for (const auto& d : dens) {
    bool pos = false, neg = false;
    double best = std::numeric_limits<double>::infinity();
    const SamplePoint* at = nullptr;
    for (const auto& p : pts) {
      double v = d.evaluate(p);
      pos = pos || v > 0;
      neg = neg || v < 0;
      if (std::abs(v) < best) {
        best = std::abs(v);
        at = &p;
      }
    }
    if (pos && neg) {
      throw EvaluationError("denominator " + d.to_string() + " changes sign inside the box", *at);
    }
  }
}

}  // namespace

ZeroTestResult zero_test(const Expression& e, const Box& box, const ZeroTestOptions& opts) {
  for (const auto& v : e.free_variables()) {
    if (!box.count(v)) throw std::invalid_argument("zero_test: variable '" + v + "' has no interval in the box");
  }
  ZeroTestResult r;
  if (e.is_literal_zero()) return r;
  const auto pts = sample_points(box, opts.trials, opts.seed);
  check_singular_locus(e, pts);
  for (const auto& p : pts) {
    double v = e.evaluate(p);
    if (!std::isfinite(v)) throw EvaluationError("non-finite value", p);
    if (r.witness.empty() || std::abs(v) > r.max_abs) {
      r.max_abs = std::abs(v);
      r.witness = p;
      r.witness_value = v;
    }
  }
  r.zero = r.max_abs <= opts.tol;
  return r;
}

bool is_zero(const Expression& e, const Box& box, const ZeroTestOptions& opts) {
  return zero_test(e, box, opts).zero;
}

}  // namespace jsm
