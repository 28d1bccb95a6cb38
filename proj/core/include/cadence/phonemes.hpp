#pragma once

#include <string>
#include <vector>

#include "cadence/errors.hpp"

namespace cadence {

// Symbol sequence for one utterance. Symbols are small integer ids in
// [0, inventory).
struct PhonemeSequence {
  int inventory{0};
  std::vector<int> ids;

  int length() const { return static_cast<int>(ids.size()); }

  void validate() const {
    if (inventory <= 0) throw ConfigError("phoneme inventory must be positive");
    if (ids.empty()) throw DataError("empty phoneme sequence");
    for (int id : ids) {
      if (id < 0 || id >= inventory) {
        throw DataError("phoneme id " + std::to_string(id) +
                        " outside inventory of " + std::to_string(inventory));
      }
    }
  }
};

// Width of the per-symbol input vector: identity one-hot plus four
// position features.
inline int linguistic_dim(int inventory) { return inventory + 4; }

// Builds [N][inventory + 4] row-major features. Per row: the one-hot id,
// then centre position fraction, remaining fraction, inverse length, and
// length capped at 32 symbols and scaled to [0, 1].
inline std::vector<float> linguistic_features(const PhonemeSequence& seq) {
  seq.validate();
  const int n = seq.length();
  const int d = linguistic_dim(seq.inventory);
  std::vector<float> out(static_cast<std::size_t>(n) * d, 0.0f);
  for (int p = 0; p < n; ++p) {
    float* row = out.data() + static_cast<std::size_t>(p) * d;
    row[seq.ids[p]] = 1.0f;
    float frac = (static_cast<float>(p) + 0.5f) / n;
    row[seq.inventory + 0] = frac;
    row[seq.inventory + 1] = 1.0f - frac;
    row[seq.inventory + 2] = 1.0f / n;
    row[seq.inventory + 3] = static_cast<float>(std::min(n, 32)) / 32.0f;
  }
  return out;
}

// Serializes ids as space-separated text, the manifest wire form.
std::string phonemes_to_text(const PhonemeSequence& seq);
PhonemeSequence phonemes_from_text(const std::string& text, int inventory);

}  // namespace cadence
