#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cadence/acoustic.hpp"
#include "cadence/autodiff.hpp"
#include "cadence/corpus.hpp"
#include "cadence/extractor.hpp"
#include "cadence/model_io.hpp"
#include "cadence/optim.hpp"

namespace cadence {

struct TrainConfig {
  long max_steps{1500};
  int batch_size{8};
  int warmup{200};
  double noam_scale{0.35};
  double lambda_mel{1.0};
  double lambda_dur{1.0};
  int val_interval{200};
  double val_fraction{0.1};  // per-speaker utterance holdout for validation
  std::uint64_t seed{1};
  std::string run_dir;
  int threads{1};

  void validate() const;
};

template <typename S>
struct LossBreakdown {
  Tensor<S> total;
  double mel_mae{0.0};
  double dur_mse{0.0};
};

// total = lambda_mel * MAE(mel) + lambda_dur * MSE(log durations).
// Weights must be nonnegative and not both zero.
template <typename S>
LossBreakdown<S> compute_loss(const Tensor<S>& pred_mel,
                              const Tensor<S>& target_mel,
                              const Tensor<S>& pred_log_dur,
                              const Tensor<S>& target_log_dur,
                              double lambda_mel, double lambda_dur) {
  if (lambda_mel < 0 || lambda_dur < 0 || (lambda_mel == 0 && lambda_dur == 0)) {
    throw ConfigError("loss weights must be nonnegative and not both zero");
  }
  LossBreakdown<S> out;
  Tensor<S> mel = mae_loss(pred_mel, target_mel);
  Tensor<S> dur = mse_loss(pred_log_dur, target_log_dur);
  out.mel_mae = static_cast<double>(mel.item());
  out.dur_mse = static_cast<double>(dur.item());
  out.total = add(scale(mel, static_cast<S>(lambda_mel)),
                  scale(dur, static_cast<S>(lambda_dur)));
  return out;
}

// One manifest record fully materialized for training and evaluation:
// extracted (or cached) representation stack, target mel, log-duration
// targets, all held as constant tensors.
struct TrainItem {
  UtteranceRecord record;
  PhonemeSequence phonemes;
  Tensor<float> stack;
  Tensor<float> mel;
  Tensor<float> log_dur_target;
  RepresentationStack raw_stack;  // kept for reference-selection at eval time
};

class Dataset {
 public:
  Dataset(const Manifest& manifest, const PseudoSslExtractor& extractor,
          int inventory, int mel_bins, double hop_seconds, int threads);

  const std::vector<TrainItem>& items() const { return items_; }
  const Manifest& manifest() const { return manifest_; }

 private:
  Manifest manifest_;
  std::vector<TrainItem> items_;
};

struct MetricsRow {
  long step{0};
  double lr{0.0};
  double loss{0.0};
  double mel_mae{0.0};
  double dur_mse{0.0};
  bool has_val{false};
  double val_loss{0.0};
  double val_mel_mae{0.0};
  double val_dur_mse{0.0};
};

struct TrainOutcome {
  long steps_run{0};
  std::string last_path;
  std::string best_path;  // empty if validation never ran
  bool has_best{false};
  float best_val{0.0f};
  std::vector<MetricsRow> history;
};

// Owns one training run end to end: dataset assembly, per-speaker holdout
// for validation, the teacher-forced step loop, checkpointing, resume.
// Bitwise reproducible for a fixed config at threads = 1; dataset assembly
// is bit-identical at any thread count.
class Trainer {
 public:
  Trainer(const TrainConfig& cfg, const ModelConfig& model_cfg,
          const ExtractorConfig& ext_cfg, const Manifest& train_manifest);

  TrainOutcome run(bool resume);

  // Deterministic utterance holdout: for each speaker with at least two
  // items, max(1, floor(fraction * count)) go to validation.
  static void holdout_split(const Dataset& data, double fraction,
                            std::uint64_t seed,
                            std::vector<std::size_t>& train_idx,
                            std::vector<std::size_t>& val_idx);

 private:
  TrainConfig cfg_;
  ModelConfig model_cfg_;
  ExtractorConfig ext_cfg_;
  Manifest manifest_;
};

}  // namespace cadence
