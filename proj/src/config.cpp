#include "difcast/config.hpp"

#include "difcast/errors.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace difcast {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

// Drops a trailing comment that is not inside a string.
std::string strip_comment(const std::string& s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"' && (i == 0 || s[i - 1] != '\\')) quoted = !quoted;
    if (s[i] == '#' && !quoted) return s.substr(0, i);
  }
  return s;
}

bool valid_key(const std::string& k) {
  if (k.empty()) return false;
  for (char c : k)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.')) return false;
  return true;
}

class ValueParser {
 public:
  ValueParser(const std::string& text, std::string where) : s_(text), where_(std::move(where)) {}

  ConfigValue parse_all() {
    ConfigValue v = parse_value();
    skip_ws();
    if (pos_ != s_.size()) fail("trailing characters after value");
    return v;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const { throw ConfigError(where_ + ": " + what); }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  ConfigValue parse_value() {
    skip_ws();
    if (pos_ >= s_.size()) fail("missing value");
    const char c = s_[pos_];
    if (c == '"') return parse_string();
    if (c == '[') return parse_array();
    return parse_bare();
  }

  ConfigValue parse_string() {
    ConfigValue v;
    v.kind = ConfigValue::Kind::string;
    ++pos_;
    while (pos_ < s_.size() && s_[pos_] != '"') {
      if (s_[pos_] == '\\' && pos_ + 1 < s_.size()) {
        const char e = s_[++pos_];
        switch (e) {
          case 'n': v.text += '\n'; break;
          case 't': v.text += '\t'; break;
          case '"': v.text += '"'; break;
          case '\\': v.text += '\\'; break;
          default: fail(std::string("unsupported escape \\") + e);
        }
      } else {
        v.text += s_[pos_];
      }
      ++pos_;
    }
    if (pos_ >= s_.size()) fail("unterminated string");
    ++pos_;
    return v;
  }

  ConfigValue parse_array() {
    ConfigValue v;
    v.kind = ConfigValue::Kind::array;
    ++pos_;
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == ']') {
      ++pos_;
      return v;
    }
    while (true) {
      v.items.push_back(parse_value());
      skip_ws();
      if (pos_ >= s_.size()) fail("unterminated array");
      if (s_[pos_] == ',') {
        ++pos_;
        skip_ws();
        if (pos_ < s_.size() && s_[pos_] == ']') {
          ++pos_;
          return v;
        }
        continue;
      }
      if (s_[pos_] == ']') {
        ++pos_;
        return v;
      }
      fail("expected ',' or ']' in array");
    }
  }

  ConfigValue parse_bare() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() && s_[pos_] != ',' && s_[pos_] != ']' &&
           !std::isspace(static_cast<unsigned char>(s_[pos_])))
      ++pos_;
    ConfigValue v;
    v.text = s_.substr(start, pos_ - start);
    if (v.text == "true" || v.text == "false") {
      v.kind = ConfigValue::Kind::boolean;
      return v;
    }
    std::string digits;
    for (char c : v.text)
      if (c != '_') digits += c;
    v.text = digits;
    std::int64_t i = 0;
    auto ri = std::from_chars(digits.data(), digits.data() + digits.size(), i);
    if (ri.ec == std::errc() && ri.ptr == digits.data() + digits.size()) {
      v.kind = ConfigValue::Kind::integer;
      return v;
    }
    double d = 0.0;
    auto rd = std::from_chars(digits.data(), digits.data() + digits.size(), d);
    if (rd.ec == std::errc() && rd.ptr == digits.data() + digits.size()) {
      v.kind = ConfigValue::Kind::real;
      return v;
    }
    fail("cannot parse value '" + v.text + "'");
  }

  const std::string& s_;
  std::string where_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string ConfigValue::as_string(const std::string& key) const {
  if (kind != Kind::string) throw ConfigError("'" + key + "' must be a string");
  return text;
}

std::int64_t ConfigValue::as_int(const std::string& key) const {
  if (kind != Kind::integer) throw ConfigError("'" + key + "' must be an integer");
  return std::stoll(text);
}

double ConfigValue::as_double(const std::string& key) const {
  if (kind != Kind::integer && kind != Kind::real) throw ConfigError("'" + key + "' must be a number");
  double d = 0.0;
  std::from_chars(text.data(), text.data() + text.size(), d);
  return d;
}

bool ConfigValue::as_bool(const std::string& key) const {
  if (kind != Kind::boolean) throw ConfigError("'" + key + "' must be true or false");
  return text == "true";
}

const std::vector<ConfigValue>& ConfigValue::as_array(const std::string& key) const {
  if (kind != Kind::array) throw ConfigError("'" + key + "' must be an array");
  return items;
}

ConfigDocument ConfigDocument::parse(const std::string& text, const std::string& source) {
  ConfigDocument doc;
  std::istringstream is(text);
  std::string raw;
  std::string section;
  ConfigTable* target = &doc.values;
  int line_no = 0;
  std::string pending;  // multi-line arrays
  int pending_start = 0;
  while (std::getline(is, raw)) {
    ++line_no;
    std::string line = trim(strip_comment(raw));
    if (!pending.empty()) {
      pending += ' ' + line;
      int depth = 0;
      for (char c : pending) depth += (c == '[') - (c == ']');
      if (depth > 0) continue;
      line = pending;
      pending.clear();
    }
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(pending_start ? pending_start : line_no);
    pending_start = 0;
    if (line.rfind("[[", 0) == 0) {
      if (line.size() < 4 || line.substr(line.size() - 2) != "]]") throw ConfigError(where + ": malformed table array header");
      const std::string name = trim(line.substr(2, line.size() - 4));
      if (!valid_key(name)) throw ConfigError(where + ": bad table name '" + name + "'");
      auto& list = doc.table_arrays[name];
      list.emplace_back();
      target = &list.back();
      section.clear();
      continue;
    }
    if (line[0] == '[') {
      if (line.back() != ']') throw ConfigError(where + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (!valid_key(section)) throw ConfigError(where + ": bad section name '" + section + "'");
      target = &doc.values;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value_text = trim(line.substr(eq + 1));
    if (!valid_key(key)) throw ConfigError(where + ": bad key '" + key + "'");
    int depth = 0;
    for (char c : value_text) depth += (c == '[') - (c == ']');
    if (depth > 0) {
      pending = line;
      pending_start = line_no;
      continue;
    }
    const std::string full = (target == &doc.values && !section.empty()) ? section + "." + key : key;
    if (target->count(full)) throw ConfigError(where + ": duplicate key '" + full + "'");
    (*target)[full] = ValueParser(value_text, where).parse_all();
  }
  if (!pending.empty()) throw ConfigError(source + ":" + std::to_string(pending_start) + ": unterminated array");
  return doc;
}

ConfigDocument ConfigDocument::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse(ss.str(), path.string());
}

const ConfigValue& ConfigDocument::get(const std::string& key) const {
  auto it = values.find(key);
  if (it == values.end()) throw ConfigError("missing config key '" + key + "'");
  return it->second;
}

}  // namespace difcast
