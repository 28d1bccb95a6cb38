#include "cadence/features.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "cadence/errors.hpp"
#include "binary_io.hpp"

namespace cadence {

namespace {

constexpr char kMagic[8] = {'C', 'A', 'D', 'E', 'N', 'C', 'E', 'F'};
constexpr std::uint32_t kVersion = 1;

void check_payload(const std::vector<float>& data, std::size_t expected,
                   const std::string& what) {
  if (data.size() != expected) {
    throw FormatError(what + ": payload has " + std::to_string(data.size()) +
                      " values, shape implies " + std::to_string(expected));
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!std::isfinite(data[i])) {
      throw DataError(what + ": non-finite value at index " +
                      std::to_string(i));
    }
  }
}

void write_container(const std::string& path, std::uint32_t layers,
                     std::uint32_t frames, std::uint32_t dim,
                     double hop_seconds, const std::vector<float>& data) {
  if (frames == 0) {
    throw ConfigError("refusing to write empty feature file " + path);
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open for write: " + path);
  os.write(kMagic, sizeof(kMagic));
  detail::write_u32(os, kVersion);
  detail::write_u32(os, layers);
  detail::write_u32(os, frames);
  detail::write_u32(os, dim);
  detail::write_f64(os, hop_seconds);
  detail::write_f32_array(os, data.data(), data.size());
  if (!os) throw DataError("short write: " + path);
}

struct ContainerHeader {
  std::uint32_t layers{0};
  std::uint32_t frames{0};
  std::uint32_t dim{0};
  double hop_seconds{0.0};
};

ContainerHeader read_header(std::ifstream& is, const std::string& path) {
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw FormatError("bad magic in " + path);
  }
  std::uint32_t version = detail::read_u32(is, "feature file");
  if (version != kVersion) {
    throw FormatError("unsupported feature file version " +
                      std::to_string(version) + " in " + path);
  }
  ContainerHeader h;
  h.layers = detail::read_u32(is, "feature file");
  h.frames = detail::read_u32(is, "feature file");
  h.dim = detail::read_u32(is, "feature file");
  h.hop_seconds = detail::read_f64(is, "feature file");
  if (!is) throw FormatError("truncated header in " + path);
  if (h.layers == 0 || h.frames == 0 || h.dim == 0) {
    throw FormatError("degenerate shape in " + path);
  }
  return h;
}

std::vector<float> read_payload(std::ifstream& is, const ContainerHeader& h,
                                const std::string& path) {
  std::size_t count = static_cast<std::size_t>(h.layers) * h.frames * h.dim;
  std::vector<float> data(count);
  try {
    detail::read_f32_array(is, data.data(), count, "feature file");
  } catch (const FormatError&) {
    throw FormatError("truncated payload in " + path);
  }
  // A trailing byte means the shape header lies about the payload.
  if (is.peek() != std::ifstream::traits_type::eof()) {
    throw FormatError("trailing bytes after payload in " + path);
  }
  return data;
}

}  // namespace

void RepresentationStack::validate() const {
  std::size_t expected = static_cast<std::size_t>(layers) * frames * dim;
  if (layers <= 0 || frames <= 0 || dim <= 0) {
    throw FormatError("representation stack has degenerate shape");
  }
  check_payload(data, expected, "representation stack");
}

void MelSpectrogram::validate() const {
  if (frames <= 0 || bins <= 0) {
    throw FormatError("mel spectrogram has degenerate shape");
  }
  check_payload(data, static_cast<std::size_t>(frames) * bins,
                "mel spectrogram");
}

void save_feature_file(const RepresentationStack& stack,
                       const std::string& path) {
  stack.validate();
  write_container(path, static_cast<std::uint32_t>(stack.layers),
                  static_cast<std::uint32_t>(stack.frames),
                  static_cast<std::uint32_t>(stack.dim), stack.hop_seconds,
                  stack.data);
}

RepresentationStack load_feature_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open: " + path);
  ContainerHeader h = read_header(is, path);
  RepresentationStack stack;
  stack.layers = static_cast<int>(h.layers);
  stack.frames = static_cast<int>(h.frames);
  stack.dim = static_cast<int>(h.dim);
  stack.hop_seconds = h.hop_seconds;
  stack.data = read_payload(is, h, path);
  stack.validate();
  return stack;
}

void save_mel_file(const MelSpectrogram& mel, const std::string& path) {
  mel.validate();
  write_container(path, 1, static_cast<std::uint32_t>(mel.frames),
                  static_cast<std::uint32_t>(mel.bins), mel.hop_seconds,
                  mel.data);
}

MelSpectrogram load_mel_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open: " + path);
  ContainerHeader h = read_header(is, path);
  if (h.layers != 1) {
    throw FormatError("expected single-layer mel file, got " +
                      std::to_string(h.layers) + " layers in " + path);
  }
  MelSpectrogram mel;
  mel.frames = static_cast<int>(h.frames);
  mel.bins = static_cast<int>(h.dim);
  mel.hop_seconds = h.hop_seconds;
  mel.data = read_payload(is, h, path);
  mel.validate();
  return mel;
}

int peek_feature_frames(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open: " + path);
  ContainerHeader h = read_header(is, path);
  return static_cast<int>(h.frames);
}

}  // namespace cadence
