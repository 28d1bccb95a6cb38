#include "cadence/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

#include "cadence/errors.hpp"
#include "cadence/tensor.hpp"
#include "binary_io.hpp"

namespace cadence {

namespace {
constexpr char kMagic[8] = {'C', 'A', 'D', 'E', 'N', 'C', 'E', 'C'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

void Checkpoint::add(std::string name, std::vector<int> shape,
                     std::vector<float> values) {
  if (name.empty()) throw CheckpointError("checkpoint entry needs a name");
  if (index_.count(name)) {
    throw CheckpointError("duplicate checkpoint entry: " + name);
  }
  if (shape_numel(shape) != values.size()) {
    throw CheckpointError("checkpoint entry " + name +
                          ": shape does not match value count");
  }
  index_[name] = entries_.size();
  entries_.push_back(
      CheckpointEntry{std::move(name), std::move(shape), std::move(values)});
}

bool Checkpoint::has(const std::string& name) const {
  return index_.count(name) > 0;
}

const CheckpointEntry& Checkpoint::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) {
    throw CheckpointError("checkpoint has no entry named " + name);
  }
  return entries_[it->second];
}

void Checkpoint::save(const std::string& path) const {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot open for write: " + tmp);
    os.write(kMagic, sizeof(kMagic));
    detail::write_u32(os, kVersion);
    detail::write_u64(os, entries_.size());
    for (const auto& e : entries_) {
      detail::write_u32(os, static_cast<std::uint32_t>(e.name.size()));
      os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
      detail::write_u32(os, static_cast<std::uint32_t>(e.shape.size()));
      for (int d : e.shape) detail::write_u32(os, static_cast<std::uint32_t>(d));
      detail::write_f32_array(os, e.values.data(), e.values.size());
    }
    if (!os) throw DataError("short write: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw DataError("cannot move checkpoint into place: " + path);
  }
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open checkpoint: " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError("bad magic in checkpoint " + path);
  }
  const std::uint32_t version = detail::read_u32(is, "checkpoint");
  if (version != kVersion) {
    throw CheckpointError("unsupported checkpoint version " +
                          std::to_string(version) + " in " + path);
  }
  std::uint64_t count = detail::read_u64(is, "checkpoint");
  Checkpoint ckpt;
  try {
    for (std::uint64_t i = 0; i < count; ++i) {
      const std::uint32_t name_len = detail::read_u32(is, "checkpoint");
      if (name_len == 0 || name_len > 4096) {
        throw CheckpointError("implausible entry name length in " + path);
      }
      std::string name(name_len, '\0');
      is.read(name.data(), name_len);
      if (!is) throw FormatError("truncated");
      const std::uint32_t rank = detail::read_u32(is, "checkpoint");
      if (rank > 8) throw CheckpointError("implausible rank in " + path);
      std::vector<int> shape(rank);
      std::size_t numel = 1;
      for (auto& d : shape) {
        const std::uint32_t v = detail::read_u32(is, "checkpoint");
        d = static_cast<int>(v);
        numel *= v;
      }
      std::vector<float> values(numel);
      detail::read_f32_array(is, values.data(), numel, "checkpoint");
      ckpt.add(std::move(name), std::move(shape), std::move(values));
    }
  } catch (const FormatError&) {
    throw CheckpointError("truncated checkpoint " + path);
  }
  if (is.peek() != std::ifstream::traits_type::eof()) {
    throw CheckpointError("trailing bytes after entries in " + path);
  }
  return ckpt;
}

}  // namespace cadence
