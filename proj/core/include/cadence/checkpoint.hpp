#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace cadence {

// One named tensor inside a checkpoint container.
struct CheckpointEntry {
  std::string name;
  std::vector<int> shape;
  std::vector<float> values;
};

// Self-describing binary container:
//
//   magic "CADENCEC", u32 version (1), u64 entry count, then per entry:
//   u32 name length, name bytes, u32 rank, u32 dims[rank], f32 payload.
//
// All integers and floats little-endian. Writes go to a temporary file that
// is renamed into place, so an interrupted save never leaves a torn file.
// Loads validate the whole container before returning anything.
class Checkpoint {
 public:
  void add(std::string name, std::vector<int> shape,
           std::vector<float> values);
  bool has(const std::string& name) const;
  const CheckpointEntry& at(const std::string& name) const;
  const std::vector<CheckpointEntry>& entries() const { return entries_; }

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);

 private:
  std::vector<CheckpointEntry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace cadence
