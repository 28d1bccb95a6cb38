#pragma once

#include <string>
#include <vector>

namespace cadence {

// Mono audio in [-1, 1].
struct Waveform {
  std::vector<float> samples;
  int sample_rate{16000};

  double seconds() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

// Standard uncompressed PCM (16-bit mono RIFF/WAVE).
void save_wav(const Waveform& w, const std::string& path);
Waveform load_wav(const std::string& path);

}  // namespace cadence
