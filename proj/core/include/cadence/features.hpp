#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cadence {

enum class StackSource { pseudo, external };

// Per-utterance layer-indexed representation sequence. Layer 0 is the
// convolutional frontend output; layers 1..L are block outputs. All layers
// share the same frame count and dimensionality.
struct RepresentationStack {
  int layers{0};  // L + 1
  int frames{0};  // F
  int dim{0};     // D_l
  double hop_seconds{0.0};
  StackSource source{StackSource::pseudo};
  std::vector<float> data;  // [layers][frames][dim], row-major

  float at(int layer, int frame, int d) const {
    return data[(static_cast<std::size_t>(layer) * frames + frame) * dim + d];
  }
  float& at(int layer, int frame, int d) {
    return data[(static_cast<std::size_t>(layer) * frames + frame) * dim + d];
  }

  // Throws DataError on non-finite entries, FormatError on size mismatch.
  void validate() const;
};

// Log-amplitude mel frames, [frames][bins] row-major.
struct MelSpectrogram {
  int frames{0};  // T
  int bins{0};    // M
  double hop_seconds{0.0};
  std::vector<float> data;

  float at(int frame, int bin) const {
    return data[static_cast<std::size_t>(frame) * bins + bin];
  }
  float& at(int frame, int bin) {
    return data[static_cast<std::size_t>(frame) * bins + bin];
  }

  void validate() const;
};

// Binary feature container, shared by representation stacks and mel files
// (a mel file is a one-layer stack with M in place of D_l):
//
//   offset size  field
//   0      8     magic "CADENCEF"
//   8      4     u32 version (currently 1)
//   12     4     u32 layer count (L + 1; 1 for mel)
//   16     4     u32 frame count F
//   20     4     u32 per-layer dimensionality D_l (M for mel)
//   24     8     f64 hop_seconds
//   32     ...   f32 payload, layer-major then frame-major
//
// All fields little-endian; round trips are bit-exact.
inline constexpr std::size_t kFeatureFileHeaderBytes = 32;

void save_feature_file(const RepresentationStack& stack,
                       const std::string& path);
RepresentationStack load_feature_file(const std::string& path);

void save_mel_file(const MelSpectrogram& mel, const std::string& path);
MelSpectrogram load_mel_file(const std::string& path);

// Header-only read; used for cheap manifest validation.
int peek_feature_frames(const std::string& path);

}  // namespace cadence
