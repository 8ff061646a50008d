#include "sstempo/config.hpp"

#include <cmath>

#include <fmt/format.h>
#include <toml.hpp>

#include "sstempo/errors.hpp"

namespace sstempo {
namespace {

ConfigValue convert(const toml::node& node, const std::string& key) {
  ConfigValue v;
  if (const auto* s = node.as_string()) {
    v.type = ConfigValue::Type::String;
    v.text = s->get();
  } else if (const auto* i = node.as_integer()) {
    v.type = ConfigValue::Type::Number;
    v.number = static_cast<double>(i->get());
  } else if (const auto* f = node.as_floating_point()) {
    v.type = ConfigValue::Type::Number;
    v.number = f->get();
    if (!std::isfinite(v.number)) throw ConfigError("config key " + key + " must be finite");
  } else if (const auto* b = node.as_boolean()) {
    v.type = ConfigValue::Type::Bool;
    v.boolean = b->get();
  } else if (const auto* arr = node.as_array()) {
    v.type = ConfigValue::Type::Array;
    for (const toml::node& item : *arr) {
      if (item.is_array() || item.is_table()) throw ConfigError("config key " + key + ": nested arrays are not supported");
      v.items.push_back(convert(item, key));
    }
  } else {
    throw ConfigError("config key " + key + " has an unsupported type");
  }
  return v;
}

void flatten(const toml::table& table, const std::string& prefix, std::map<std::string, ConfigValue>& out) {
  for (const auto& [k, node] : table) {
    const std::string key = prefix.empty() ? std::string(k.str()) : prefix + "." + std::string(k.str());
    if (const auto* sub = node.as_table()) {
      flatten(*sub, key, out);
    } else {
      out[key] = convert(node, key);
    }
  }
}

}  // namespace

Config Config::parse(std::string_view text) {
  toml::table table;
  try {
    table = toml::parse(text);
  } catch (const toml::parse_error& e) {
    throw ConfigError(fmt::format("config line {}: {}", e.source().begin.line, e.description()));
  }
  Config cfg;
  flatten(table, "", cfg.values_);
  return cfg;
}

Config Config::load(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) throw ConfigError("cannot read config file: " + path.string());
  toml::table table;
  try {
    table = toml::parse_file(path.string());
  } catch (const toml::parse_error& e) {
    throw ConfigError(fmt::format("{} line {}: {}", path.string(), e.source().begin.line, e.description()));
  }
  Config cfg;
  flatten(table, "", cfg.values_);
  return cfg;
}

const ConfigValue& Config::at(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("missing config key: " + key);
  return it->second;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  if (!has(key)) return fallback;
  const auto& v = at(key);
  if (v.type != ConfigValue::Type::String) throw ConfigError("config key " + key + " must be a string");
  return v.text;
}

double Config::get_double(const std::string& key, double fallback) const {
  if (!has(key)) return fallback;
  const auto& v = at(key);
  if (v.type != ConfigValue::Type::Number) throw ConfigError("config key " + key + " must be a number");
  return v.number;
}

std::int64_t Config::get_int(const std::string& key, std::int64_t fallback) const {
  const double v = get_double(key, static_cast<double>(fallback));
  if (std::floor(v) != v) throw ConfigError("config key " + key + " must be an integer");
  return static_cast<std::int64_t>(v);
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const auto& v = at(key);
  if (v.type != ConfigValue::Type::Bool) throw ConfigError("config key " + key + " must be true or false");
  return v.boolean;
}

std::vector<std::string> Config::get_strings(const std::string& key) const {
  if (!has(key)) return {};
  const auto& v = at(key);
  if (v.type == ConfigValue::Type::String) return {v.text};
  if (v.type != ConfigValue::Type::Array) throw ConfigError("config key " + key + " must be an array of strings");
  std::vector<std::string> out;
  for (const auto& item : v.items) {
    if (item.type != ConfigValue::Type::String) throw ConfigError("config key " + key + " must hold strings");
    out.push_back(item.text);
  }
  return out;
}

}  // namespace sstempo
