#pragma once

#include <cstdint>
#include <vector>

#include "cadence/features.hpp"
#include "cadence/wav.hpp"

namespace cadence {

// Frozen random-weight feature extractor standing in for a pretrained
// speech encoder. Layer 0 is a strided linear frontend over raw samples;
// each later block blends a two-tap temporal average with a two-tap temporal
// difference, then applies a saturating random projection with
// depth-increasing gain and a residual mix. The difference share grows with
// depth, so shallow layers keep static spectral level (timbre) while deeper
// layers progressively trade it for transition timing.
struct ExtractorConfig {
  int blocks{6};        // L; output has L + 1 layers
  int dim{64};          // D_l
  int window{400};      // frontend samples per frame
  int stride{320};      // frontend hop in samples (20 ms at 16 kHz)
  float gain_base{1.0f};
  float gain_step{0.35f};
  float residual{0.5f};
  float hp_step{0.16f};  // temporal-difference share added per block
  std::uint64_t seed{7151};

  int min_samples() const { return window; }
  double hop_seconds(int sample_rate) const {
    return static_cast<double>(stride) / sample_rate;
  }
};

class PseudoSslExtractor {
 public:
  explicit PseudoSslExtractor(const ExtractorConfig& config);

  const ExtractorConfig& config() const { return config_; }

  // Throws DataError when the waveform is shorter than one analysis window.
  RepresentationStack extract(const Waveform& wav) const;

 private:
  ExtractorConfig config_;
  std::vector<float> frontend_;            // [dim][window]
  std::vector<std::vector<float>> block_w_;  // per block, [dim][dim]
  std::vector<std::vector<float>> block_b_;  // per block, [dim]
};

}  // namespace cadence
