#include "cadence/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "cadence/errors.hpp"
#include "binary_io.hpp"

namespace cadence {

namespace {

void write_u16(std::ostream& os, std::uint16_t v) {
  char b[2] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
  os.write(b, 2);
}

std::uint16_t read_u16(std::istream& is) {
  unsigned char b[2];
  is.read(reinterpret_cast<char*>(b), 2);
  if (!is) throw FormatError("unexpected end of wav stream");
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::int16_t clamp_sample(float x) {
  float scaled = x * 32767.0f;
  scaled = std::clamp(scaled, -32768.0f, 32767.0f);
  return static_cast<std::int16_t>(std::lrintf(scaled));
}

}  // namespace

void save_wav(const Waveform& wav, const std::string& path) {
  if (wav.samples.empty()) {
    throw ConfigError("refusing to write empty wav " + path);
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open for write: " + path);

  std::uint32_t n = static_cast<std::uint32_t>(wav.samples.size());
  std::uint32_t data_bytes = n * 2;
  std::uint32_t rate = static_cast<std::uint32_t>(wav.sample_rate);

  os.write("RIFF", 4);
  detail::write_u32(os, 36 + data_bytes);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  detail::write_u32(os, 16);
  write_u16(os, 1);  // PCM
  write_u16(os, 1);  // mono
  detail::write_u32(os, rate);
  detail::write_u32(os, rate * 2);  // byte rate
  write_u16(os, 2);                 // block align
  write_u16(os, 16);                // bits per sample
  os.write("data", 4);
  detail::write_u32(os, data_bytes);
  for (float s : wav.samples) {
    std::int16_t q = clamp_sample(s);
    write_u16(os, static_cast<std::uint16_t>(q));
  }
  if (!os) throw DataError("short write: " + path);
}

Waveform load_wav(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open: " + path);

  char tag[4];
  is.read(tag, 4);
  if (!is || std::memcmp(tag, "RIFF", 4) != 0) {
    throw FormatError("not a RIFF file: " + path);
  }
  detail::read_u32(is, "wav");  // riff size, unused
  is.read(tag, 4);
  if (!is || std::memcmp(tag, "WAVE", 4) != 0) {
    throw FormatError("not a WAVE file: " + path);
  }

  Waveform wav;
  bool got_fmt = false;
  while (is.read(tag, 4)) {
    std::uint32_t chunk_size = detail::read_u32(is, "wav");
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      std::uint16_t format = read_u16(is);
      std::uint16_t channels = read_u16(is);
      std::uint32_t rate = detail::read_u32(is, "wav");
      detail::read_u32(is, "wav");  // byte rate
      read_u16(is);          // block align
      std::uint16_t bits = read_u16(is);
      if (format != 1 || channels != 1 || bits != 16) {
        throw FormatError("unsupported wav encoding in " + path +
                          " (want 16-bit mono PCM)");
      }
      wav.sample_rate = static_cast<int>(rate);
      if (chunk_size > 16) is.seekg(chunk_size - 16, std::ios::cur);
      got_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      if (!got_fmt) throw FormatError("data chunk before fmt in " + path);
      std::uint32_t n = chunk_size / 2;
      wav.samples.resize(n);
      for (std::uint32_t i = 0; i < n; ++i) {
        std::int16_t q = static_cast<std::int16_t>(read_u16(is));
        wav.samples[i] = static_cast<float>(q) / 32767.0f;
      }
      return wav;
    } else {
      // skip unknown chunk, padded to even length
      is.seekg(chunk_size + (chunk_size & 1), std::ios::cur);
    }
  }
  throw FormatError("no data chunk in " + path);
}

}  // namespace cadence
