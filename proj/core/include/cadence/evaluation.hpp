#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cadence/corpus.hpp"
#include "cadence/features.hpp"
#include "cadence/model_io.hpp"

namespace cadence {

// Mean absolute difference over all cells of two equal-shape mels.
// Differently shaped inputs mean the comparison protocol was broken.
double mel_mae(const MelSpectrogram& a, const MelSpectrogram& b);

// RMSE of per-phoneme durations in milliseconds, pooled over every phoneme
// the caller passes in. Errors are converted to ms before squaring.
double duration_rmse_ms(const std::vector<int>& pred_frames,
                        const std::vector<int>& target_frames,
                        double hop_seconds);

// Phonemes per second: P / (sum(frames) * hop). Inverse identity:
// rate * total_seconds == P exactly.
double speaking_rate(const std::vector<int>& durations_frames,
                     double hop_seconds);

enum class EvalCondition { parallel, nonparallel };
EvalCondition parse_condition(const std::string& s);
std::string condition_name(EvalCondition c);

struct UtteranceEval {
  std::string utt_id;
  std::string speaker_id;
  std::string ref_utt_id;
  double mel_mae{0.0};
  double dur_rmse_ms{0.0};  // this utterance only
  double rate_target{0.0};
  double rate_predicted{0.0};  // 0 when the predictor yields no frames
  int phoneme_count{0};
};

struct EvalReport {
  std::string condition;
  std::uint64_t seed{0};
  std::string model_id;
  std::vector<UtteranceEval> utterances;  // sorted by utt_id
  double mel_mae_mean{0.0};      // mean of per-utterance values
  double duration_rmse_ms{0.0};  // pooled over all phonemes
  double rate_target_mean{0.0};
  double rate_predicted_mean{0.0};
};

// Zero-shot objective protocol on a held-out manifest. Every manifest
// speaker must be absent from the checkpoint's training speakers. Parallel:
// each utterance references itself. Non-parallel: one seeded reference
// utterance per speaker, reused for all of that speaker's items. Mel is
// compared teacher-forced under the ground-truth durations; duration RMSE
// compares the predictor against the ground truth.
EvalReport run_objective_eval(const LoadedSystem& system,
                              const Manifest& manifest,
                              EvalCondition condition, std::uint64_t seed,
                              int threads = 1);

void save_eval_tsv(const EvalReport& report, const std::string& path);
void save_eval_json(const EvalReport& report, const std::string& path);

struct SpeakerRateRow {
  std::string id;
  double rate_factor{1.0};
  std::vector<double> rates;  // per text, from ground-truth durations
  double mean{0.0};
  double stddev{0.0};
};

struct TransferRow {
  std::string acoustic_id;
  std::string duration_id;
  std::vector<double> rates;  // per text, from the used durations
  double mean{0.0};
  double stddev{0.0};
  int closer_to_duration{0};  // texts strictly closer to the duration
                              // speaker's mean rate
};

struct RhythmReport {
  std::uint64_t seed{0};
  int n_texts{0};
  std::string model_id;
  SpeakerRateRow speaker_a, speaker_b;
  TransferRow a_acoustic_b_duration, b_acoustic_a_duration;
};

// Rhythm-transfer measurement on two fresh synthetic speakers with forced
// rate factors, synthesizing every text in both transfer directions.
// Requires a separate-mode checkpoint.
RhythmReport run_rhythm_transfer_eval(const LoadedSystem& system,
                                      const CorpusGenerator& generator,
                                      double rate_a, double rate_b,
                                      int n_texts, std::uint64_t seed);

void save_rhythm_tsv(const RhythmReport& report, const std::string& path);
void save_rhythm_json(const RhythmReport& report, const std::string& path);

struct LayerWeightTable {
  std::vector<std::string> roles;            // one row per embedding role
  int layers{0};                             // columns 0..layers-1
  std::vector<std::vector<float>> weights;   // [role][layer], rows sum to 1
};

LayerWeightTable export_layer_weights(const LoadedSystem& system);
void save_layer_weights_tsv(const LayerWeightTable& table,
                            const std::string& path);

}  // namespace cadence
