#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "cadence/autodiff.hpp"
#include "cadence/embedding.hpp"
#include "cadence/errors.hpp"
#include "cadence/features.hpp"
#include "cadence/params.hpp"
#include "cadence/phonemes.hpp"
#include "cadence/rng.hpp"

namespace cadence {

enum class ConditioningMode { common, separate };

inline ConditioningMode parse_mode(const std::string& s) {
  if (s == "common") return ConditioningMode::common;
  if (s == "separate") return ConditioningMode::separate;
  throw ConfigError("unknown conditioning mode '" + s +
                    "' (want common or separate)");
}

inline std::string mode_name(ConditioningMode m) {
  return m == ConditioningMode::common ? "common" : "separate";
}

// frames = max(0, round(exp(x) - 1)), rounding halves away from zero.
// The model predicts durations in the log(frames + 1) domain.
inline int to_frames(double log_duration) {
  const long r = std::lround(std::exp(log_duration) - 1.0);
  return r > 0 ? static_cast<int>(r) : 0;
}

template <typename S>
std::vector<int> to_frames(const std::vector<S>& log_durations) {
  std::vector<int> out(log_durations.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = to_frames(static_cast<double>(log_durations[i]));
  }
  return out;
}

inline std::vector<float> log_duration_targets(const std::vector<int>& frames) {
  std::vector<float> out(frames.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<float>(std::log(static_cast<double>(frames[i]) + 1.0));
  }
  return out;
}

struct ModelConfig {
  ConditioningMode mode{ConditioningMode::separate};
  int inventory{24};
  int mel_bins{32};
  int hidden{48};      // encoder and decoder width
  int enc_blocks{2};
  int dec_blocks{2};
  int kernel{3};       // conv kernel, odd
  int dur_hidden{32};  // duration predictor width
  double hop_seconds{0.005};
  EmbeddingConfig embedding;

  int linguistic_input_dim() const { return linguistic_dim(inventory); }

  void validate() const {
    if (inventory < 1 || mel_bins < 1 || hidden < 1 || dur_hidden < 1 ||
        enc_blocks < 1 || dec_blocks < 1) {
      throw ConfigError("model config must have positive dimensions");
    }
    if (kernel < 1 || kernel % 2 == 0) {
      throw ConfigError("model kernel must be odd and positive");
    }
    if (hop_seconds <= 0) throw ConfigError("hop_seconds must be positive");
    if (embedding.layers < 1 || embedding.feature_dim < 1 ||
        embedding.embed_dim < 1) {
      throw ConfigError("embedding dimensions must be positive");
    }
  }
};

inline std::string role_name(ConditioningMode mode, bool duration_role) {
  if (mode == ConditioningMode::common) return "shared";
  return duration_role ? "duration" : "acoustic";
}

struct RoleEmbedding {
  std::string role;
  std::vector<float> values;
};

struct SynthesisResult {
  MelSpectrogram mel;
  std::vector<int> predicted_durations;  // always from the predictor
  std::vector<int> used_durations;       // what drove the length regulator
  std::vector<RoleEmbedding> embeddings;
};

// Constant [L+1][F][D] tensor view of an extracted stack.
template <typename S>
Tensor<S> stack_to_tensor(const RepresentationStack& stack) {
  std::vector<S> values(stack.data.begin(), stack.data.end());
  return Tensor<S>::from({stack.layers, stack.frames, stack.dim},
                         std::move(values));
}

template <typename S>
Tensor<S> mel_to_tensor(const MelSpectrogram& mel) {
  std::vector<S> values(mel.data.begin(), mel.data.end());
  return Tensor<S>::from({mel.frames, mel.bins}, std::move(values));
}

template <typename S>
Tensor<S> linguistic_tensor(const PhonemeSequence& seq) {
  std::vector<float> feats = linguistic_features(seq);
  std::vector<S> values(feats.begin(), feats.end());
  return Tensor<S>::from({seq.length(), linguistic_dim(seq.inventory)},
                         std::move(values));
}

// Non-autoregressive synthesizer: phoneme encoder, duration predictor,
// length regulator, mel decoder. Reference speech conditions the model
// through fixed-length embeddings; in separate mode the duration predictor
// and the mel path own independent embedding modules, in common mode one
// shared module feeds every injection site. Injection is always a learned
// projection of the embedding added to each sequence position.
template <typename S>
class AcousticModel {
 public:
  AcousticModel(const ModelConfig& cfg, ParamRegistry<S>& params, Rng& rng)
      : cfg_(cfg) {
    cfg_.validate();
    const int h = cfg_.hidden;
    const int e = cfg_.embedding.embed_dim;
    const int k = cfg_.kernel;
    const int dh = cfg_.dur_hidden;

    if (cfg_.mode == ConditioningMode::separate) {
      emb_acoustic_.emplace(cfg_.embedding, "emb/acoustic", params, rng);
      emb_duration_.emplace(cfg_.embedding, "emb/duration", params, rng);
    } else {
      emb_shared_.emplace(cfg_.embedding, "emb/shared", params, rng);
    }

    enc_in_w_ = params.create("model/enc/in_w",
                              {h, cfg_.linguistic_input_dim()},
                              cfg_.linguistic_input_dim(), rng);
    enc_in_b_ = params.create_zeros("model/enc/in_b", {h});
    for (int i = 0; i < cfg_.enc_blocks; ++i) {
      const std::string p = "model/enc/block" + std::to_string(i);
      enc_w_.push_back(params.create(p + "/w", {h, h, k}, h * k, rng));
      enc_b_.push_back(params.create_zeros(p + "/b", {h}));
    }
    if (cfg_.mode == ConditioningMode::common) {
      enc_cond_w_ = params.create("model/enc/cond_w", {h, e}, e, rng);
      enc_cond_b_ = params.create_zeros("model/enc/cond_b", {h});
    }

    dur_cond_w_ = params.create("model/dur/cond_w", {h, e}, e, rng);
    dur_cond_b_ = params.create_zeros("model/dur/cond_b", {h});
    dur_w0_ = params.create("model/dur/conv0/w", {dh, h, k}, h * k, rng);
    dur_b0_ = params.create_zeros("model/dur/conv0/b", {dh});
    dur_w1_ = params.create("model/dur/conv1/w", {dh, dh, k}, dh * k, rng);
    dur_b1_ = params.create_zeros("model/dur/conv1/b", {dh});
    dur_out_w_ = params.create("model/dur/out_w", {1, dh}, dh, rng);
    dur_out_b_ = params.create_zeros("model/dur/out_b", {1});

    dec_cond_w_ = params.create("model/dec/cond_w", {h, e}, e, rng);
    dec_cond_b_ = params.create_zeros("model/dec/cond_b", {h});
    for (int i = 0; i < cfg_.dec_blocks; ++i) {
      const std::string p = "model/dec/block" + std::to_string(i);
      dec_w_.push_back(params.create(p + "/w", {h, h, k}, h * k, rng));
      dec_b_.push_back(params.create_zeros(p + "/b", {h}));
    }
    dec_out_w_ = params.create("model/dec/out_w", {cfg_.mel_bins, h}, h, rng);
    dec_out_b_ = params.create_zeros("model/dec/out_b", {cfg_.mel_bins});
  }

  const ModelConfig& config() const { return cfg_; }

  Tensor<S> embed_acoustic(const Tensor<S>& stack) const {
    return acoustic_module().forward(stack);
  }
  Tensor<S> embed_duration(const Tensor<S>& stack) const {
    return duration_module().forward(stack);
  }

  const EmbeddingModule<S>& acoustic_module() const {
    return cfg_.mode == ConditioningMode::separate ? *emb_acoustic_
                                                   : *emb_shared_;
  }
  const EmbeddingModule<S>& duration_module() const {
    return cfg_.mode == ConditioningMode::separate ? *emb_duration_
                                                   : *emb_shared_;
  }

  // Per-phoneme hidden sequence. `cond` is the shared embedding in common
  // mode; pass an undefined tensor for the unconditioned separate-mode path.
  Tensor<S> encode(const Tensor<S>& ling, const Tensor<S>& cond) const {
    if (ling.rank() != 2 || ling.dim(1) != cfg_.linguistic_input_dim()) {
      throw ConfigError("encode: linguistic width mismatch");
    }
    Tensor<S> x = linear_seq(ling, enc_in_w_, enc_in_b_);
    for (std::size_t i = 0; i < enc_w_.size(); ++i) {
      x = add(x, tanh_op(conv1d_same(x, enc_w_[i], enc_b_[i])));
    }
    if (cond.defined()) {
      if (!enc_cond_w_.defined()) {
        throw ConfigError("encode: this mode has no encoder conditioning");
      }
      x = add_bias(x, linear_vec(cond, enc_cond_w_, enc_cond_b_));
    }
    return x;
  }

  // [P] log(frames + 1) predictions from the conditioned hidden sequence.
  Tensor<S> predict_log_durations(const Tensor<S>& hidden,
                                  const Tensor<S>& e_dur) const {
    Tensor<S> x = add_bias(hidden, linear_vec(e_dur, dur_cond_w_, dur_cond_b_));
    x = tanh_op(conv1d_same(x, dur_w0_, dur_b0_));
    x = tanh_op(conv1d_same(x, dur_w1_, dur_b1_));
    Tensor<S> out = linear_seq(x, dur_out_w_, dur_out_b_);
    return reshape(out, {hidden.dim(0)});
  }

  // Frame-level decode to [T][mel_bins] log-mel.
  Tensor<S> decode(const Tensor<S>& frames, const Tensor<S>& e_ac) const {
    Tensor<S> x = add_bias(frames, linear_vec(e_ac, dec_cond_w_, dec_cond_b_));
    for (std::size_t i = 0; i < dec_w_.size(); ++i) {
      x = add(x, tanh_op(conv1d_same(x, dec_w_[i], dec_b_[i])));
    }
    return linear_seq(x, dec_out_w_, dec_out_b_);
  }

  struct TeacherForward {
    Tensor<S> log_durations;  // [P]
    Tensor<S> mel;            // [sum(durations)][M]
  };

  // Training path: the utterance's own stack conditions every role, and the
  // ground-truth durations drive the length regulator so predicted and
  // target mel align frame for frame.
  TeacherForward forward_teacher(const PhonemeSequence& ph,
                                 const Tensor<S>& stack,
                                 const std::vector<int>& durations) const {
    if (static_cast<int>(durations.size()) != ph.length()) {
      throw DataError("teacher durations length mismatch");
    }
    Tensor<S> ling = linguistic_tensor<S>(ph);
    TeacherForward out;
    if (cfg_.mode == ConditioningMode::common) {
      Tensor<S> e = emb_shared_->forward(stack);
      Tensor<S> hidden = encode(ling, e);
      out.log_durations = predict_log_durations(hidden, e);
      out.mel = decode(repeat_rows(hidden, durations), e);
    } else {
      Tensor<S> e_ac = emb_acoustic_->forward(stack);
      Tensor<S> e_dur = emb_duration_->forward(stack);
      Tensor<S> hidden = encode(ling, Tensor<S>());
      out.log_durations = predict_log_durations(hidden, e_dur);
      out.mel = decode(repeat_rows(hidden, durations), e_ac);
    }
    return out;
  }

  // Inference: embeds the references, predicts durations, expands, decodes.
  // dur_ref selects the rhythm source in separate mode; common mode forbids
  // it. teacher_durations, when given, drive the expansion instead of the
  // rounded predictions (the predictor still runs and is reported).
  SynthesisResult synthesize(
      const PhonemeSequence& ph, const RepresentationStack& ac_ref,
      const RepresentationStack* dur_ref = nullptr,
      const std::vector<int>* teacher_durations = nullptr) const {
    NoGradGuard guard;
    ph.validate();
    if (cfg_.mode == ConditioningMode::common && dur_ref != nullptr) {
      throw ConfigError(
          "common conditioning cannot take a duration reference; "
          "rhythm transfer needs a separate-mode checkpoint");
    }
    Tensor<S> ac_stack = stack_to_tensor<S>(ac_ref);
    Tensor<S> dur_stack =
        dur_ref ? stack_to_tensor<S>(*dur_ref) : ac_stack;

    SynthesisResult result;
    Tensor<S> ling = linguistic_tensor<S>(ph);
    Tensor<S> hidden, e_ac, e_dur;
    if (cfg_.mode == ConditioningMode::common) {
      e_ac = emb_shared_->forward(ac_stack);
      e_dur = e_ac;
      hidden = encode(ling, e_ac);
      result.embeddings.push_back({"shared", to_float_vec(e_ac)});
    } else {
      e_ac = emb_acoustic_->forward(ac_stack);
      e_dur = emb_duration_->forward(dur_stack);
      hidden = encode(ling, Tensor<S>());
      result.embeddings.push_back({"acoustic", to_float_vec(e_ac)});
      result.embeddings.push_back({"duration", to_float_vec(e_dur)});
    }

    Tensor<S> log_dur = predict_log_durations(hidden, e_dur);
    result.predicted_durations = to_frames(log_dur.values());
    result.used_durations =
        teacher_durations ? *teacher_durations : result.predicted_durations;
    if (static_cast<int>(result.used_durations.size()) != ph.length()) {
      throw DataError("teacher durations length mismatch");
    }

    Tensor<S> mel = decode(repeat_rows(hidden, result.used_durations), e_ac);
    result.mel.frames = mel.dim(0);
    result.mel.bins = mel.dim(1);
    result.mel.hop_seconds = cfg_.hop_seconds;
    result.mel.data.assign(mel.data(), mel.data() + mel.numel());
    return result;
  }

 private:
  static std::vector<float> to_float_vec(const Tensor<S>& t) {
    return std::vector<float>(t.data(), t.data() + t.numel());
  }

  ModelConfig cfg_;
  std::optional<EmbeddingModule<S>> emb_acoustic_, emb_duration_, emb_shared_;
  Tensor<S> enc_in_w_, enc_in_b_;
  std::vector<Tensor<S>> enc_w_, enc_b_;
  Tensor<S> enc_cond_w_, enc_cond_b_;
  Tensor<S> dur_cond_w_, dur_cond_b_;
  Tensor<S> dur_w0_, dur_b0_, dur_w1_, dur_b1_, dur_out_w_, dur_out_b_;
  Tensor<S> dec_cond_w_, dec_cond_b_;
  std::vector<Tensor<S>> dec_w_, dec_b_;
  Tensor<S> dec_out_w_, dec_out_b_;
};

}  // namespace cadence
