#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace sstempo {

/// Scalar or array value from a TOML configuration file.
struct ConfigValue {
  enum class Type { String, Number, Bool, Array };
  Type type = Type::String;
  std::string text;  ///< string payload
  double number = 0.0;
  bool boolean = false;
  std::vector<ConfigValue> items;
};

/// Flat key-value view of a TOML document. Nested tables are flattened, so
/// keys are addressed as "section.key". Dates and arrays of tables are rejected.
class Config {
 public:
  static Config parse(std::string_view text);
  static Config load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const ConfigValue& at(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<std::string> get_strings(const std::string& key) const;

  const std::map<std::string, ConfigValue>& values() const { return values_; }

 private:
  std::map<std::string, ConfigValue> values_;
};

}  // namespace sstempo
