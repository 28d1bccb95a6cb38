#pragma once

#include <string>
#include <vector>

#include "cadence/autodiff.hpp"
#include "cadence/errors.hpp"
#include "cadence/optim.hpp"
#include "cadence/params.hpp"
#include "cadence/rng.hpp"

namespace cadence {

enum class Aggregator { average, lstm };

inline Aggregator parse_aggregator(const std::string& s) {
  if (s == "average" || s == "avg") return Aggregator::average;
  if (s == "lstm" || s == "lstm_attention" || s == "attentive") {
    return Aggregator::lstm;
  }
  throw ConfigError("unknown aggregator '" + s + "' (want average or lstm)");
}

inline std::string aggregator_name(Aggregator a) {
  return a == Aggregator::average ? "average" : "lstm";
}

struct EmbeddingConfig {
  int layers{0};       // L + 1 planes expected in the stack
  int feature_dim{0};  // D_l
  int embed_dim{0};    // E
  int lstm_hidden{0};  // H; only read by the lstm aggregator
  Aggregator aggregator{Aggregator::lstm};
};

// Turns a layer stack [L+1][F][D] into a fixed-length vector [E]. A learned
// softmax over layer logits mixes the stack into one sequence; the aggregator
// then pools over frames. The average aggregator is a frame mean plus linear
// projection. The lstm aggregator runs a unidirectional LSTM and pools hidden
// states with additive attention before projecting.
template <typename S>
class EmbeddingModule {
 public:
  EmbeddingModule(const EmbeddingConfig& cfg, const std::string& prefix,
                  ParamRegistry<S>& params, Rng& rng)
      : cfg_(cfg) {
    if (cfg_.layers < 1 || cfg_.feature_dim < 1 || cfg_.embed_dim < 1) {
      throw ConfigError("embedding config must have positive dimensions");
    }
    if (cfg_.lstm_hidden <= 0) cfg_.lstm_hidden = cfg_.embed_dim;
    logits_ = params.create_zeros(prefix + "/layer_logits", {cfg_.layers});
    if (cfg_.aggregator == Aggregator::average) {
      proj_w_ = params.create(prefix + "/proj_w",
                              {cfg_.embed_dim, cfg_.feature_dim},
                              cfg_.feature_dim, rng);
      proj_b_ = params.create_zeros(prefix + "/proj_b", {cfg_.embed_dim});
    } else {
      const int h = cfg_.lstm_hidden;
      if (h < 1) throw ConfigError("lstm aggregator needs lstm_hidden >= 1");
      lstm_wih_ = params.create(prefix + "/lstm_wih", {4 * h, cfg_.feature_dim},
                                cfg_.feature_dim, rng);
      lstm_whh_ = params.create(prefix + "/lstm_whh", {4 * h, h}, h, rng);
      lstm_b_ = params.create_zeros(prefix + "/lstm_b", {4 * h});
      // start with an open forget gate so early gradients reach back in time
      for (int i = h; i < 2 * h; ++i) lstm_b_.data()[i] = S(1);
      attn_v_ = params.create(prefix + "/attn_v", {1, h}, h, rng);
      attn_b_ = params.create_zeros(prefix + "/attn_b", {1});
      proj_w_ = params.create(prefix + "/proj_w", {cfg_.embed_dim, h}, h, rng);
      proj_b_ = params.create_zeros(prefix + "/proj_b", {cfg_.embed_dim});
    }
  }

  const EmbeddingConfig& config() const { return cfg_; }

  Tensor<S> forward(const Tensor<S>& stack) const {
    if (stack.rank() != 3 || stack.dim(0) != cfg_.layers ||
        stack.dim(2) != cfg_.feature_dim) {
      throw ConfigError("embedding: stack shape mismatch");
    }
    Tensor<S> w = softmax_vec(logits_);
    Tensor<S> seq = weighted_stack(w, stack);  // [F][D]
    if (cfg_.aggregator == Aggregator::average) {
      return linear_vec(mean_rows(seq), proj_w_, proj_b_);
    }
    return linear_vec(attend(seq), proj_w_, proj_b_);
  }

  // Softmaxed layer weights as plain values, for reports and analysis.
  std::vector<S> layer_weights() const { return softmax(logits_.values()); }

  // Attention distribution over frames for one stack; lstm aggregator only.
  std::vector<S> attention_profile(const Tensor<S>& stack) const {
    if (cfg_.aggregator != Aggregator::lstm) {
      throw ConfigError("attention profile: aggregator has no attention");
    }
    if (stack.rank() != 3 || stack.dim(0) != cfg_.layers ||
        stack.dim(2) != cfg_.feature_dim) {
      throw ConfigError("embedding: stack shape mismatch");
    }
    NoGradGuard guard;
    Tensor<S> seq = weighted_stack(softmax_vec(logits_), stack);
    Tensor<S> att;
    attend(seq, &att);
    return att.values();
  }

 private:
  Tensor<S> attend(const Tensor<S>& seq, Tensor<S>* att_out = nullptr) const {
    const int frames = seq.dim(0);
    const int h = cfg_.lstm_hidden;
    Tensor<S> hidden = Tensor<S>::zeros({h});
    Tensor<S> cell = Tensor<S>::zeros({h});
    std::vector<Tensor<S>> states;
    states.reserve(frames);
    for (int t = 0; t < frames; ++t) {
      Tensor<S> gates = add(add(matvec(lstm_wih_, slice_row(seq, t)),
                                matvec(lstm_whh_, hidden)),
                            lstm_b_);
      Tensor<S> in_g = sigmoid_op(slice_vec(gates, 0, h));
      Tensor<S> forget_g = sigmoid_op(slice_vec(gates, h, h));
      Tensor<S> cand = tanh_op(slice_vec(gates, 2 * h, h));
      Tensor<S> out_g = sigmoid_op(slice_vec(gates, 3 * h, h));
      cell = add(mul(forget_g, cell), mul(in_g, cand));
      hidden = mul(out_g, tanh_op(cell));
      states.push_back(hidden);
    }
    std::vector<Tensor<S>> scores;
    scores.reserve(frames);
    for (int t = 0; t < frames; ++t) {
      scores.push_back(add(matvec(attn_v_, tanh_op(states[t])), attn_b_));
    }
    Tensor<S> att =
        softmax_vec(reshape(stack_rows(scores), {frames}));
    if (att_out != nullptr) *att_out = att;
    return vecmat(att, stack_rows(states));  // [H]
  }

  EmbeddingConfig cfg_;
  Tensor<S> logits_;
  Tensor<S> lstm_wih_, lstm_whh_, lstm_b_;
  Tensor<S> attn_v_, attn_b_;
  Tensor<S> proj_w_, proj_b_;
};

// Baseline speaker vector in the spirit of recognition-style embeddings:
// per-bin mean and deviation pooled over mel frames, linearly projected.
// Untrained stand-in for comparison tooling; needs >= 2 frames.
template <typename S>
class StatsPoolEmbedder {
 public:
  StatsPoolEmbedder(int mel_bins, int embed_dim, const std::string& prefix,
                    ParamRegistry<S>& params, Rng& rng)
      : bins_(mel_bins) {
    if (mel_bins < 1 || embed_dim < 1) {
      throw ConfigError("stats pool embedder config invalid");
    }
    proj_w_ = params.create(prefix + "/proj_w", {embed_dim, 2 * mel_bins},
                            2 * mel_bins, rng);
    proj_b_ = params.create_zeros(prefix + "/proj_b", {embed_dim});
  }

  Tensor<S> forward(const Tensor<S>& mel) const {
    if (mel.rank() != 2 || mel.dim(1) != bins_) {
      throw ConfigError("stats pool: mel shape mismatch");
    }
    if (mel.dim(0) < 2) {
      throw ConfigError("stats pool: needs at least 2 frames");
    }
    return linear_vec(stats_pool(mel), proj_w_, proj_b_);
  }

 private:
  int bins_;
  Tensor<S> proj_w_, proj_b_;
};

}  // namespace cadence
