#include "cadence/extractor.hpp"

#include <cmath>
#include <string>

#include "cadence/errors.hpp"
#include "cadence/rng.hpp"

namespace cadence {

PseudoSslExtractor::PseudoSslExtractor(const ExtractorConfig& config)
    : config_(config) {
  if (config_.blocks < 1 || config_.dim < 1 || config_.window < 1 ||
      config_.stride < 1) {
    throw ConfigError("extractor config must have positive shape fields");
  }
  if (config_.hp_step < 0) {
    throw ConfigError("extractor hp_step must be nonnegative");
  }
  const int d = config_.dim;
  {
    Rng rng(substream(config_.seed, "frontend", 0));
    double scale = 1.0 / std::sqrt(static_cast<double>(config_.window));
    frontend_.resize(static_cast<std::size_t>(d) * config_.window);
    for (auto& w : frontend_) {
      w = static_cast<float>(rng.uniform(-scale, scale));
    }
  }
  block_w_.resize(config_.blocks);
  block_b_.resize(config_.blocks);
  double scale = 1.0 / std::sqrt(static_cast<double>(d));
  for (int l = 0; l < config_.blocks; ++l) {
    Rng rng(substream(config_.seed, "block", static_cast<std::uint64_t>(l)));
    block_w_[l].resize(static_cast<std::size_t>(d) * d);
    for (auto& w : block_w_[l]) {
      w = static_cast<float>(rng.uniform(-scale, scale));
    }
    block_b_[l].resize(d);
    for (auto& b : block_b_[l]) {
      b = static_cast<float>(rng.uniform(-scale, scale));
    }
  }
}

RepresentationStack PseudoSslExtractor::extract(const Waveform& wav) const {
  const int d = config_.dim;
  const int n = static_cast<int>(wav.samples.size());
  if (n < config_.min_samples()) {
    throw DataError("waveform too short for feature extraction: " +
                    std::to_string(n) + " samples, need at least " +
                    std::to_string(config_.min_samples()));
  }
  const int frames = 1 + (n - config_.window) / config_.stride;

  RepresentationStack stack;
  stack.layers = config_.blocks + 1;
  stack.frames = frames;
  stack.dim = d;
  stack.hop_seconds = config_.hop_seconds(wav.sample_rate);
  stack.data.assign(
      static_cast<std::size_t>(stack.layers) * frames * d, 0.0f);

  // layer 0: strided linear frontend
  for (int f = 0; f < frames; ++f) {
    const float* x = wav.samples.data() + static_cast<std::size_t>(f) * config_.stride;
    for (int o = 0; o < d; ++o) {
      const float* w = frontend_.data() + static_cast<std::size_t>(o) * config_.window;
      double acc = 0.0;
      for (int j = 0; j < config_.window; ++j) acc += double(w[j]) * x[j];
      stack.at(0, f, o) = static_cast<float>(acc);
    }
  }

  std::vector<float> smoothed(static_cast<std::size_t>(frames) * d);
  for (int l = 1; l <= config_.blocks; ++l) {
    const float gain = config_.gain_base + config_.gain_step * l;
    const float hp = std::min(1.0f, config_.hp_step * l);
    const float lo = 1.0f - hp;
    const std::vector<float>& w = block_w_[l - 1];
    const std::vector<float>& b = block_b_[l - 1];
    // blend of temporal average and temporal difference over t and t-1;
    // the difference share hp grows with depth
    for (int f = 0; f < frames; ++f) {
      int prev = f > 0 ? f - 1 : 0;
      for (int c = 0; c < d; ++c) {
        const float cur = stack.at(l - 1, f, c);
        const float old = stack.at(l - 1, prev, c);
        smoothed[static_cast<std::size_t>(f) * d + c] =
            lo * 0.5f * (cur + old) + hp * 0.5f * (cur - old);
      }
    }
    for (int f = 0; f < frames; ++f) {
      const float* y = smoothed.data() + static_cast<std::size_t>(f) * d;
      for (int o = 0; o < d; ++o) {
        const float* row = w.data() + static_cast<std::size_t>(o) * d;
        double acc = b[o];
        for (int c = 0; c < d; ++c) acc += double(row[c]) * y[c];
        stack.at(l, f, o) =
            std::tanh(gain * static_cast<float>(acc)) +
            config_.residual * y[o];
      }
    }
  }
  return stack;
}

}  // namespace cadence
