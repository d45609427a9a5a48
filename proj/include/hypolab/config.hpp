#pragma once
// Experiment configuration text:
//
//   # comment
//   command = varadhan
//   seed = 0xC0FFEE
//   [model]
//   name = heisenberg
//   [points]
//   x = [0, 0, 0]
//
// Scalars are booleans, integers (decimal or 0x hex), reals, quoted strings
// or bare words; arrays are bracketed, comma separated and may nest.

#include <cctype>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace hypolab {

/// Invalid configuration; carries the line (0 if unknown) and field.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(int line, std::string field, const std::string& message)
      : std::runtime_error(format(line, field, message)), line_(line), field_(std::move(field)) {}
  int line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  static std::string format(int line, const std::string& field, const std::string& message) {
    std::string out = line > 0 ? "line " + std::to_string(line) + ": " : std::string();
    if (!field.empty()) out += field + ": ";
    return out + message;
  }
  int line_;
  std::string field_;
};

struct ConfigValue {
  using Array = std::vector<ConfigValue>;
  std::variant<bool, std::int64_t, double, std::string, Array> data;
  int line = 0;
  bool hex = false;  // integer written in hex; kept for round trips

  bool is_bool() const { return std::holds_alternative<bool>(data); }
  bool is_int() const { return std::holds_alternative<std::int64_t>(data); }
  bool is_real() const { return std::holds_alternative<double>(data); }
  bool is_number() const { return is_int() || is_real(); }
  bool is_string() const { return std::holds_alternative<std::string>(data); }
  bool is_array() const { return std::holds_alternative<Array>(data); }

  double number() const { return is_int() ? static_cast<double>(std::get<std::int64_t>(data)) : std::get<double>(data); }
  const Array& array() const { return std::get<Array>(data); }

  friend bool operator==(const ConfigValue& a, const ConfigValue& b) { return a.data == b.data; }
};

struct ConfigEntry {
  std::string key;
  ConfigValue value;
};

struct ConfigSection {
  std::string name;  // empty for the top level
  int line = 0;
  std::vector<ConfigEntry> entries;

  const ConfigEntry* find(const std::string& key) const {
    for (const auto& e : entries)
      if (e.key == key) return &e;
    return nullptr;
  }
  friend bool operator==(const ConfigSection& a, const ConfigSection& b) {
    if (a.name != b.name || a.entries.size() != b.entries.size()) return false;
    for (size_t i = 0; i < a.entries.size(); ++i)
      if (a.entries[i].key != b.entries[i].key || !(a.entries[i].value == b.entries[i].value)) return false;
    return true;
  }
};

struct Config {
  std::vector<ConfigSection> sections;  // sections[0] is the top level

  Config() { sections.push_back({}); }

  const ConfigSection* section(const std::string& name) const {
    for (const auto& s : sections)
      if (s.name == name) return &s;
    return nullptr;
  }
  ConfigSection& section_or_add(const std::string& name) {
    for (auto& s : sections)
      if (s.name == name) return s;
    sections.push_back({name, 0, {}});
    return sections.back();
  }
  void set(const std::string& sect, const std::string& key, ConfigValue v) {
    auto& s = section_or_add(sect);
    for (auto& e : s.entries)
      if (e.key == key) {
        e.value = std::move(v);
        return;
      }
    s.entries.push_back({key, std::move(v)});
  }
  friend bool operator==(const Config& a, const Config& b) { return a.sections == b.sections; }
};

namespace detail {

class ConfigParser {
 public:
  ConfigParser(const std::string& text, int line) : s_(text), line_(line) {}

  ConfigValue value() {
    skip_space();
    if (at_end()) fail("missing value");
    ConfigValue v;
    v.line = line_;
    const char c = s_[pos_];
    if (c == '[') {
      ++pos_;
      ConfigValue::Array items;
      skip_space();
      if (peek() == ']') {
        ++pos_;
      } else {
        for (;;) {
          items.push_back(value());
          skip_space();
          if (peek() == ',') {
            ++pos_;
            continue;
          }
          if (peek() == ']') {
            ++pos_;
            break;
          }
          fail("expected ',' or ']' in array");
        }
      }
      v.data = std::move(items);
    } else if (c == '"') {
      v.data = quoted();
    } else {
      const std::string word = bare();
      if (word.empty()) fail(std::string("unexpected character '") + c + "'");
      scalar(word, v);
    }
    return v;
  }

  void expect_end() {
    skip_space();
    if (!at_end()) fail("trailing characters after value");
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw ConfigError(line_, "", msg); }
  bool at_end() const { return pos_ >= s_.size(); }
  char peek() const { return at_end() ? '\0' : s_[pos_]; }
  void skip_space() {
    while (!at_end() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }

  std::string quoted() {
    ++pos_;
    std::string out;
    while (!at_end() && s_[pos_] != '"') {
      if (s_[pos_] == '\\' && pos_ + 1 < s_.size()) ++pos_;
      out += s_[pos_++];
    }
    if (at_end()) fail("unterminated string");
    ++pos_;
    return out;
  }

  std::string bare() {
    const size_t start = pos_;
    while (!at_end()) {
      const char c = s_[pos_];
      if (c == ',' || c == ']' || c == '[' || c == ' ' || c == '\t' || c == '"') break;
      ++pos_;
    }
    return s_.substr(start, pos_ - start);
  }

  void scalar(const std::string& w, ConfigValue& v) const {
    if (w == "true" || w == "false") {
      v.data = (w == "true");
      return;
    }
    const bool neg = w[0] == '-';
    const std::string body = (neg || w[0] == '+') ? w.substr(1) : w;
    if (body.size() > 2 && body[0] == '0' && (body[1] == 'x' || body[1] == 'X')) {
      std::uint64_t u = 0;
      const auto r = std::from_chars(body.data() + 2, body.data() + body.size(), u, 16);
      if (r.ec != std::errc() || r.ptr != body.data() + body.size()) fail("bad hex integer '" + w + "'");
      v.data = static_cast<std::int64_t>(neg ? (~u + 1) : u);
      v.hex = true;
      return;
    }
    std::int64_t i = 0;
    auto r = std::from_chars(w.data() + (w[0] == '+'), w.data() + w.size(), i);
    if (r.ec == std::errc() && r.ptr == w.data() + w.size()) {
      v.data = i;
      return;
    }
    double d = 0;
    auto rd = std::from_chars(w.data() + (w[0] == '+'), w.data() + w.size(), d);
    if (rd.ec == std::errc() && rd.ptr == w.data() + w.size()) {
      v.data = d;
      return;
    }
    const char c = w[0];
    if (!(std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '/'))
      fail("bad value '" + w + "'");
    v.data = w;
  }

  const std::string& s_;
  size_t pos_ = 0;
  int line_;
};

inline std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) in_string = !in_string;
    if (line[i] == '#' && !in_string) return line.substr(0, i);
  }
  return line;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline bool valid_name(const std::string& k) {
  if (k.empty()) return false;
  for (char c : k)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.')) return false;
  return true;
}

inline void write_value(std::ostream& os, const ConfigValue& v) {
  if (v.is_bool()) {
    os << (std::get<bool>(v.data) ? "true" : "false");
  } else if (v.is_int()) {
    const auto i = std::get<std::int64_t>(v.data);
    if (v.hex) {
      std::ostringstream h;
      h << "0x" << std::hex << std::uppercase << static_cast<std::uint64_t>(i);
      os << h.str();
    } else {
      os << i;
    }
  } else if (v.is_real()) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, std::get<double>(v.data));
    std::string s(buf, r.ptr);
    if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
    os << s;
  } else if (v.is_string()) {
    os << '"';
    for (char c : std::get<std::string>(v.data)) {
      if (c == '"' || c == '\\') os << '\\';
      os << c;
    }
    os << '"';
  } else {
    os << '[';
    const auto& a = v.array();
    for (size_t i = 0; i < a.size(); ++i) {
      if (i) os << ", ";
      write_value(os, a[i]);
    }
    os << ']';
  }
}

}  // namespace detail

inline Config parse_config(const std::string& text) {
  Config cfg;
  ConfigSection* current = &cfg.sections[0];
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string l = detail::trim(detail::strip_comment(raw));
    if (l.empty()) continue;
    if (l.front() == '[') {
      if (l.back() != ']') throw ConfigError(line, "", "malformed section header");
      const std::string name = detail::trim(l.substr(1, l.size() - 2));
      if (!detail::valid_name(name)) throw ConfigError(line, "", "bad section name '" + name + "'");
      if (cfg.section(name)) throw ConfigError(line, "[" + name + "]", "duplicate section");
      cfg.sections.push_back({name, line, {}});
      current = &cfg.sections.back();
      continue;
    }
    const auto eq = l.find('=');
    if (eq == std::string::npos) throw ConfigError(line, "", "expected 'key = value'");
    const std::string key = detail::trim(l.substr(0, eq));
    if (!detail::valid_name(key)) throw ConfigError(line, "", "bad key '" + key + "'");
    if (current->find(key)) throw ConfigError(line, key, "duplicate key");
    const std::string rest = l.substr(eq + 1);
    detail::ConfigParser p(rest, line);
    ConfigValue v = p.value();
    p.expect_end();
    current->entries.push_back({key, std::move(v)});
  }
  return cfg;
}

inline Config load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError(0, path, "cannot read config file");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

inline std::string serialize_config(const Config& cfg) {
  std::ostringstream os;
  bool first = true;
  for (const auto& s : cfg.sections) {
    if (!s.name.empty()) {
      if (!first) os << '\n';
      os << '[' << s.name << "]\n";
    }
    for (const auto& e : s.entries) {
      os << e.key << " = ";
      detail::write_value(os, e.value);
      os << '\n';
    }
    first = first && s.entries.empty() && s.name.empty();
  }
  return os.str();
}

}  // namespace hypolab
