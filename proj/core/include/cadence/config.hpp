#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace cadence {

// Flat key=value configuration. '#' starts a comment, blank lines are
// ignored, duplicate keys are rejected. Typed getters record every key they
// touch together with its effective value; finish() then rejects keys the
// program never asked about, and resolved() echoes the effective
// configuration in sorted order for the run directory.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig from_file(const std::string& path);
  static KeyValueConfig from_string(const std::string& text,
                                    const std::string& origin = "<string>");

  // Command-line override, wins over the file.
  void set(const std::string& key, const std::string& value);

  bool has(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& def);
  std::string require_string(const std::string& key);
  long get_int(const std::string& key, long def);
  std::uint64_t get_u64(const std::string& key, std::uint64_t def);
  double get_double(const std::string& key, double def);
  bool get_bool(const std::string& key, bool def);

  // Throws naming the first key that was present but never read.
  void finish() const;

  // Sorted key=value lines covering every key a getter touched.
  std::string resolved() const;

 private:
  std::string fetch(const std::string& key, bool& present);
  void record(const std::string& key, const std::string& effective);

  std::map<std::string, std::string> values_;
  std::map<std::string, std::string> effective_;
  std::string origin_{"<empty>"};
};

}  // namespace cadence
