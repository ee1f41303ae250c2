#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace difcast {

//! A scalar or array value from a TOML-style file.
struct ConfigValue {
  enum class Kind { string, integer, real, boolean, array };
  Kind kind = Kind::string;
  std::string text;  // scalar source text; strings are unquoted
  std::vector<ConfigValue> items;

  std::string as_string(const std::string& key) const;
  std::int64_t as_int(const std::string& key) const;
  double as_double(const std::string& key) const;
  bool as_bool(const std::string& key) const;
  const std::vector<ConfigValue>& as_array(const std::string& key) const;
};

using ConfigTable = std::map<std::string, ConfigValue>;

//! Parsed subset of TOML: `key = value`, `[section]` and `[[array.of.tables]]`.
//! Keys inside sections are stored with their dotted path.
struct ConfigDocument {
  ConfigTable values;
  std::map<std::string, std::vector<ConfigTable>> table_arrays;

  static ConfigDocument parse(const std::string& text, const std::string& source = "<string>");
  static ConfigDocument load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values.count(key) != 0; }
  const ConfigValue& get(const std::string& key) const;
};

}  // namespace difcast
