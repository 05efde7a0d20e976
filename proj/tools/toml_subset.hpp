#pragma once

// A flat TOML subset: [section] headers (dots allowed in names), key = value lines, '#' comments.
// Values are basic strings, numbers, booleans and arrays; arrays may span lines. No inline tables,
// no multi-line strings, no dates.

#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace jsm::io {

struct Location {
  std::string file;
  std::size_t line = 0;  // 1-based
  std::size_t col = 0;   // 1-based
  std::string str() const;
};

// Every malformed input ends up here; the message is prefixed with file:line:col.
class InputError : public std::runtime_error {
 public:
  InputError(const Location& at, const std::string& message);
  explicit InputError(const std::string& message);
  const std::optional<Location>& where() const { return where_; }

 private:
  std::optional<Location> where_;
};

struct Value {
  using Array = std::vector<Value>;
  std::variant<std::string, double, bool, Array> data;
  bool integer = false;
  Location at;  // start of the value; for strings, the opening quote

  bool is_string() const { return std::holds_alternative<std::string>(data); }
  bool is_number() const { return std::holds_alternative<double>(data); }
  bool is_bool() const { return std::holds_alternative<bool>(data); }
  bool is_array() const { return std::holds_alternative<Array>(data); }

  // Throw InputError at `at` on a type mismatch.
  const std::string& as_string() const;
  double as_number() const;
  long long as_integer() const;
  bool as_bool() const;
  const Array& as_array() const;
};

struct Entry {
  std::string key;
  Location at;
  Value value;
};

struct Section {
  std::string name;  // "" for the root
  Location at;
  std::vector<Entry> entries;

  const Entry* find(const std::string& key) const;
  const Value& require(const std::string& key) const;  // InputError at the header when absent
};

struct Document {
  std::string file;
  std::vector<Section> sections;  // the root section first, always present

  const Section& root() const { return sections.front(); }
  const Section* find(const std::string& name) const;
  // Sections named prefix.<rest>, in file order.
  std::vector<const Section*> with_prefix(const std::string& prefix) const;
};

Document parse_document(const std::string& text, const std::string& file);
Document read_document(const std::string& path);

// A string value quoted for output.
std::string quote(const std::string& s);
// Shortest decimal form that round-trips.
std::string format_number(double v);

}  // namespace jsm::io
