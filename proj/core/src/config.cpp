#include "cadence/config.hpp"

#include <cctype>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "cadence/errors.hpp"

namespace cadence {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

KeyValueConfig KeyValueConfig::from_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return from_string(ss.str(), path);
}

KeyValueConfig KeyValueConfig::from_string(const std::string& text,
                                           const std::string& origin) {
  KeyValueConfig cfg;
  cfg.origin_ = origin;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) +
                        ": expected key=value, got '" + line + "'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError(origin + ":" + std::to_string(lineno) +
                        ": empty key");
    }
    if (cfg.values_.count(key)) {
      throw ConfigError(origin + ":" + std::to_string(lineno) +
                        ": duplicate key '" + key + "'");
    }
    cfg.values_[key] = value;
  }
  return cfg;
}

void KeyValueConfig::set(const std::string& key, const std::string& value) {
  const std::string k = trim(key);
  if (k.empty()) throw ConfigError("override with empty key");
  values_[k] = trim(value);
  effective_.erase(k);  // a getter must re-read the new value
}

bool KeyValueConfig::has(const std::string& key) const {
  return values_.count(key) != 0;
}

std::string KeyValueConfig::fetch(const std::string& key, bool& present) {
  auto it = values_.find(key);
  present = it != values_.end();
  return present ? it->second : std::string();
}

void KeyValueConfig::record(const std::string& key,
                            const std::string& effective) {
  effective_[key] = effective;
}

std::string KeyValueConfig::get_string(const std::string& key,
                                       const std::string& def) {
  bool present = false;
  std::string raw = fetch(key, present);
  const std::string value = present ? raw : def;
  record(key, value);
  return value;
}

std::string KeyValueConfig::require_string(const std::string& key) {
  bool present = false;
  std::string raw = fetch(key, present);
  if (!present || raw.empty()) {
    throw ConfigError("missing required config key '" + key + "' (" +
                      origin_ + ")");
  }
  record(key, raw);
  return raw;
}

long KeyValueConfig::get_int(const std::string& key, long def) {
  bool present = false;
  const std::string raw = fetch(key, present);
  long value = def;
  if (present) {
    errno = 0;
    char* end = nullptr;
    value = std::strtol(raw.c_str(), &end, 10);
    if (errno != 0 || end == raw.c_str() || *end != '\0') {
      throw ConfigError("config key '" + key + "': expected integer, got '" +
                        raw + "'");
    }
  }
  record(key, std::to_string(value));
  return value;
}

std::uint64_t KeyValueConfig::get_u64(const std::string& key,
                                      std::uint64_t def) {
  bool present = false;
  const std::string raw = fetch(key, present);
  std::uint64_t value = def;
  if (present) {
    errno = 0;
    char* end = nullptr;
    const unsigned long long v = std::strtoull(raw.c_str(), &end, 10);
    if (errno != 0 || end == raw.c_str() || *end != '\0' ||
        raw.find('-') != std::string::npos) {
      throw ConfigError("config key '" + key +
                        "': expected unsigned integer, got '" + raw + "'");
    }
    value = static_cast<std::uint64_t>(v);
  }
  record(key, std::to_string(value));
  return value;
}

double KeyValueConfig::get_double(const std::string& key, double def) {
  bool present = false;
  const std::string raw = fetch(key, present);
  double value = def;
  if (present) {
    errno = 0;
    char* end = nullptr;
    value = std::strtod(raw.c_str(), &end);
    if (errno != 0 || end == raw.c_str() || *end != '\0') {
      throw ConfigError("config key '" + key + "': expected number, got '" +
                        raw + "'");
    }
  }
  record(key, present ? raw : fmt_double(value));
  return value;
}

bool KeyValueConfig::get_bool(const std::string& key, bool def) {
  bool present = false;
  const std::string raw = fetch(key, present);
  bool value = def;
  if (present) {
    if (raw == "true" || raw == "1" || raw == "yes") {
      value = true;
    } else if (raw == "false" || raw == "0" || raw == "no") {
      value = false;
    } else {
      throw ConfigError("config key '" + key + "': expected boolean, got '" +
                        raw + "'");
    }
  }
  record(key, value ? "true" : "false");
  return value;
}

void KeyValueConfig::finish() const {
  for (const auto& [key, value] : values_) {
    if (!effective_.count(key)) {
      throw ConfigError("unknown config key '" + key + "' (" + origin_ + ")");
    }
  }
}

std::string KeyValueConfig::resolved() const {
  std::ostringstream os;
  for (const auto& [key, value] : effective_) {
    os << key << '=' << value << '\n';
  }
  return os.str();
}

}  // namespace cadence
