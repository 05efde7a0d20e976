#include "toml_subset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace jsm::io {

std::string Location::str() const {
  return file + ":" + std::to_string(line) + ":" + std::to_string(col);
}

InputError::InputError(const Location& at, const std::string& message)
    : std::runtime_error(at.str() + ": " + message), where_(at) {}

InputError::InputError(const std::string& message) : std::runtime_error(message) {}

const std::string& Value::as_string() const {
  if (!is_string()) throw InputError(at, "expected a string");
  return std::get<std::string>(data);
}

double Value::as_number() const {
  if (!is_number()) throw InputError(at, "expected a number");
  return std::get<double>(data);
}

long long Value::as_integer() const {
  if (!is_number() || !integer) throw InputError(at, "expected an integer");
  return static_cast<long long>(std::get<double>(data));
}

bool Value::as_bool() const {
  if (!is_bool()) throw InputError(at, "expected true or false");
  return std::get<bool>(data);
}

const Value::Array& Value::as_array() const {
  if (!is_array()) throw InputError(at, "expected an array");
  return std::get<Array>(data);
}

const Entry* Section::find(const std::string& key) const {
  for (const auto& e : entries)
    if (e.key == key) return &e;
  return nullptr;
}

const Value& Section::require(const std::string& key) const {
  if (const Entry* e = find(key)) return e->value;
  throw InputError(at, (name.empty() ? std::string("missing key '") : "[" + name + "] is missing key '") + key + "'");
}

const Section* Document::find(const std::string& name) const {
  for (const auto& s : sections)
    if (s.name == name) return &s;
  return nullptr;
}

std::vector<const Section*> Document::with_prefix(const std::string& prefix) const {
  std::vector<const Section*> out;
  for (const auto& s : sections)
    if (s.name.size() > prefix.size() + 1 && s.name.compare(0, prefix.size(), prefix) == 0 &&
        s.name[prefix.size()] == '.')
      out.push_back(&s);
  return out;
}

namespace {

bool bare_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
}

class Reader {
 public:
  Reader(const std::string& text, std::string file) : text_(text), file_(std::move(file)) {}

  Document run() {
    Document doc;
    doc.file = file_;
    doc.sections.push_back({"", here(), {}});
    std::set<std::string> seen;
    while (true) {
      skip_blank_lines();
      if (eof()) break;
      if (peek() == '[') {
        Location at = here();
        ++pos_;
        skip_inline_space();
        std::string name;
        while (!eof() && (bare_char(peek()) || peek() == '.')) name += text_[pos_++];
        skip_inline_space();
        if (name.empty()) throw error("expected a section name");
        if (name.front() == '.' || name.back() == '.' || name.find("..") != std::string::npos)
          throw InputError(at, "malformed section name '" + name + "'");
        if (eof() || peek() != ']') throw error("expected ']'");
        ++pos_;
        end_of_line();
        if (!seen.insert(name).second) throw InputError(at, "duplicate section [" + name + "]");
        doc.sections.push_back({name, at, {}});
        continue;
      }
      Entry e;
      e.at = here();
      e.key = key();
      skip_inline_space();
      if (eof() || peek() != '=') throw error("expected '='");
      ++pos_;
      skip_inline_space();
      e.value = value();
      end_of_line();
      Section& sec = doc.sections.back();
      if (sec.find(e.key)) throw InputError(e.at, "duplicate key '" + e.key + "'");
      sec.entries.push_back(std::move(e));
    }
    return doc;
  }

 private:
  const std::string& text_;
  std::string file_;
  std::size_t pos_ = 0, line_ = 1, line_start_ = 0;

  bool eof() const { return pos_ >= text_.size(); }
  char peek() const { return text_[pos_]; }
  Location here() const { return {file_, line_, pos_ - line_start_ + 1}; }
  InputError error(const std::string& msg) const { return InputError(here(), msg); }

  void newline() {
    ++pos_;
    ++line_;
    line_start_ = pos_;
  }

  void skip_inline_space() {
    while (!eof() && (peek() == ' ' || peek() == '\t' || peek() == '\r')) ++pos_;
  }

  void skip_comment() {
    if (!eof() && peek() == '#')
      while (!eof() && peek() != '\n') ++pos_;
  }

  void skip_blank_lines() {
    while (true) {
      skip_inline_space();
      skip_comment();
      if (eof() || peek() != '\n') return;
      newline();
    }
  }

  // Whitespace, comments and newlines inside arrays.
  void skip_array_space() {
    while (true) {
      skip_inline_space();
      skip_comment();
      if (eof() || peek() != '\n') return;
      newline();
    }
  }

  void end_of_line() {
    skip_inline_space();
    skip_comment();
    if (eof()) return;
    if (peek() != '\n') throw error("unexpected '" + std::string(1, peek()) + "' after value");
    newline();
  }

  std::string key() {
    if (peek() == '"') return string_body();
    std::string k;
    while (!eof() && bare_char(peek())) k += text_[pos_++];
    if (k.empty()) throw error("expected a key");
    return k;
  }

  std::string string_body() {
    ++pos_;  // opening quote
    std::string s;
    while (true) {
      if (eof() || peek() == '\n') throw error("unterminated string");
      char c = text_[pos_++];
      if (c == '"') return s;
      if (c == '\\') {
        if (eof()) throw error("unterminated string");
        char n = text_[pos_++];
        switch (n) {
          case '"': s += '"'; break;
          case '\\': s += '\\'; break;
          case 'n': s += '\n'; break;
          case 't': s += '\t'; break;
          default: throw InputError({file_, line_, pos_ - line_start_}, "unsupported escape '\\" + std::string(1, n) + "'");
        }
        continue;
      }
      s += c;
    }
  }

  Value value() {
    Value v;
    v.at = here();
    if (eof() || peek() == '\n') throw error("expected a value");
    char c = peek();
    if (c == '"') {
      v.data = string_body();
      return v;
    }
    if (c == '[') {
      ++pos_;
      Value::Array items;
      skip_array_space();
      while (!eof() && peek() != ']') {
        items.push_back(value());
        skip_array_space();
        if (!eof() && peek() == ',') {
          ++pos_;
          skip_array_space();
          continue;
        }
        if (eof()) break;
        if (peek() != ']') throw error("expected ',' or ']'");
      }
      if (eof()) throw InputError(v.at, "unterminated array");
      ++pos_;
      v.data = std::move(items);
      return v;
    }
    std::string word;
    while (!eof() && (bare_char(peek()) || peek() == '.' || peek() == '+')) word += text_[pos_++];
    if (word == "true" || word == "false") {
      v.data = word == "true";
      return v;
    }
    if (word.empty()) throw error("expected a value");
    std::string clean;
    for (char ch : word)
      if (ch != '_') clean += ch;
    if (!clean.empty() && clean.front() == '+') clean.erase(0, 1);
    double d = 0.0;
    auto [end, ec] = std::from_chars(clean.data(), clean.data() + clean.size(), d);
    if (ec != std::errc() || end != clean.data() + clean.size() || !std::isfinite(d))
      throw InputError(v.at, "invalid value '" + word + "'");
    v.data = d;
    v.integer = clean.find_first_of(".eE") == std::string::npos;
    return v;
  }
};

}  // namespace

Document parse_document(const std::string& text, const std::string& file) { return Reader(text, file).run(); }

Document read_document(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_document(ss.str(), path);
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out += c;
  }
  return out + "\"";
}

std::string format_number(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, end);
  // keep a decimal marker so integers in boxes stay floats on re-read
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

}  // namespace jsm::io
