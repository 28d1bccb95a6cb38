#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cadence/features.hpp"
#include "cadence/phonemes.hpp"
#include "cadence/rng.hpp"
#include "cadence/wav.hpp"

namespace cadence {

struct CorpusConfig {
  int speakers{32};
  int utterances_per_speaker{20};
  int inventory{24};
  int min_phonemes{6};
  int max_phonemes{12};
  int mel_bins{32};
  double hop_seconds{0.005};
  int sample_rate{16000};
  double dur_base_min{8.0};   // per-class mean frames, pre-log
  double dur_base_max{16.0};
  double rate_min{0.6};       // per-speaker rate multiplier range
  double rate_max{1.6};
  double jitter{0.12};        // log-duration noise per phoneme
  double mel_noise{0.05};
  double utt_timbre{0.12};    // per-utterance gain/slope deviation scale
  std::uint64_t seed{1234};

  void validate() const;
};

// Generative parameters for one synthetic voice. Timbre and rhythm fields
// are drawn from independent random substreams, which is what makes the
// rhythm/timbre disentanglement measurable downstream.
struct SpeakerProfile {
  std::string id;
  // timbre: effective log-mel gain per phoneme class (global class template
  // with the speaker's tilt and gain folded in), [inventory][mel_bins]
  std::vector<float> class_gain;
  float tilt_slope{0.0f};  // scalar timbre summary, kept for analysis
  double f0{150.0};        // waveform fundamental, Hz
  // rhythm: per-class log-duration means with ln(rate) folded in
  std::vector<double> log_dur_mean;
  double rate{1.0};
  double jitter{0.12};
};

struct UtteranceRecord {
  std::string utt_id;
  std::string speaker_id;
  std::vector<int> phonemes;
  std::vector<int> durations;
  std::string mel_path;   // relative to the manifest directory
  std::string wav_path;
  std::string feat_path;  // empty when no cached features exist
};

struct Manifest {
  std::string root;  // directory the relative paths resolve against
  std::vector<UtteranceRecord> records;

  std::vector<std::string> speaker_order() const;  // first-appearance order
};

std::string resolve_path(const Manifest& m, const std::string& rel);

void save_manifest(const Manifest& m, const std::string& path);

// Parses and validates: referenced files exist, mel frame count equals the
// duration sum, phoneme ids fit the declared inventory. Throws DataError
// naming the offending record. An empty manifest loads with a warning on
// stderr; training rejects it later.
Manifest load_manifest(const std::string& path, int inventory);

// Speaker-disjoint split. Ratios must sum to 1; validation and test get
// floor(n * ratio) speakers each and training keeps the remainder.
struct SplitManifests {
  Manifest train, val, test;
};
SplitManifests split(const Manifest& m, double train_ratio, double val_ratio,
                     double test_ratio, std::uint64_t seed);

// Deterministic corpus synthesis. Every utterance's randomness derives from
// (seed, speaker index, utterance index), so parallel and serial generation
// are bit-identical.
class CorpusGenerator {
 public:
  explicit CorpusGenerator(const CorpusConfig& cfg);

  const CorpusConfig& config() const { return cfg_; }

  // Training-corpus speakers, indexed 0..speakers-1.
  SpeakerProfile speaker_profile(int index) const;

  // Extra speakers outside the corpus (fresh timbre, forced rate), used by
  // the rhythm-transfer protocol. stream_label keeps them independent of
  // every corpus speaker.
  SpeakerProfile forced_rate_profile(const std::string& id,
                                     const std::string& stream_label,
                                     std::uint64_t stream_index,
                                     double rate) const;

  PhonemeSequence sample_text(Rng& rng) const;
  std::vector<int> sample_durations(const SpeakerProfile& spk,
                                    const PhonemeSequence& text,
                                    Rng& rng) const;
  // utt_gain and utt_slope shift the whole utterance's spectral level and
  // tilt; both renders must get the same values so waveform and target agree.
  MelSpectrogram render_mel(const SpeakerProfile& spk,
                            const PhonemeSequence& text,
                            const std::vector<int>& durations, Rng& rng,
                            float utt_gain = 0.0f,
                            float utt_slope = 0.0f) const;
  Waveform render_wav(const SpeakerProfile& spk, const PhonemeSequence& text,
                      const std::vector<int>& durations, Rng& rng,
                      float utt_gain = 0.0f, float utt_slope = 0.0f) const;

  struct Rendered {
    PhonemeSequence text;
    std::vector<int> durations;
    MelSpectrogram mel;
    Waveform wav;
  };
  // Fully seeded by (corpus seed, stream_label, stream_index).
  Rendered render_utterance(const SpeakerProfile& spk,
                            const std::string& stream_label,
                            std::uint64_t stream_index) const;

  // Writes wav/ and mel/ trees plus corpus.tsv and speakers.tsv under
  // out_dir and returns the manifest.
  Manifest generate(const std::string& out_dir, int threads) const;

 private:
  CorpusConfig cfg_;
  std::vector<float> class_template_;   // [inventory][mel_bins]
  std::vector<double> class_dur_mean_;  // [inventory], log frames
};

}  // namespace cadence
