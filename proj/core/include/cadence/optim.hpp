#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "cadence/errors.hpp"
#include "cadence/params.hpp"

namespace cadence {

// Plain-vector softmax with max subtraction. Empty or non-finite input is a
// caller error.
template <typename S>
std::vector<S> softmax(const std::vector<S>& v) {
  if (v.empty()) throw ConfigError("softmax: empty input");
  S mx = v[0];
  for (S x : v) {
    if (!std::isfinite(static_cast<double>(x))) {
      throw ConfigError("softmax: non-finite input");
    }
    mx = std::max(mx, x);
  }
  std::vector<S> out(v.size());
  S denom = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - mx);
    denom += out[i];
  }
  for (auto& x : out) x /= denom;
  return out;
}

// lr(step) = scale * model_dim^-0.5 * min(step^-0.5, step * warmup^-1.5).
// Rises linearly to the crossover at step == warmup, then decays as step^-0.5.
inline double noam_lr(std::int64_t step, int model_dim, int warmup,
                      double scale) {
  if (step < 1) throw ConfigError("noam_lr: step must be >= 1");
  if (model_dim < 1 || warmup < 1) {
    throw ConfigError("noam_lr: model_dim and warmup must be positive");
  }
  const double s = static_cast<double>(step);
  const double w = static_cast<double>(warmup);
  return scale / std::sqrt(static_cast<double>(model_dim)) *
         std::min(1.0 / std::sqrt(s), s / (w * std::sqrt(w)));
}

// Adam with bias correction. Moment buffers are created lazily on the first
// update and always mirror their parameter shapes.
template <typename S>
class Adam {
 public:
  struct Hyper {
    double beta1{0.9};
    double beta2{0.999};
    double epsilon{1e-8};
  };

  explicit Adam(Hyper hyper = {}) : hyper_(hyper) {}

  std::int64_t step() const { return step_; }
  const Hyper& hyper() const { return hyper_; }

  void update(ParamRegistry<S>& params, double lr) {
    if (lr <= 0) throw ConfigError("adam: lr must be positive");
    ensure_state(params);
    ++step_;
    const double b1 = hyper_.beta1, b2 = hyper_.beta2;
    const double corr1 = 1.0 - std::pow(b1, static_cast<double>(step_));
    const double corr2 = 1.0 - std::pow(b2, static_cast<double>(step_));
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
      auto& p = params.all()[pi].tensor;
      auto& m = m_[pi];
      auto& v = v_[pi];
      for (std::size_t i = 0; i < p.numel(); ++i) {
        const double g = static_cast<double>(p.grad()[i]);
        if (!std::isfinite(g)) {
          throw TrainingDiverged(
              "non-finite gradient in parameter " + params.all()[pi].name,
              params.all()[pi].name);
        }
        m[i] = static_cast<S>(b1 * static_cast<double>(m[i]) + (1.0 - b1) * g);
        v[i] = static_cast<S>(b2 * static_cast<double>(v[i]) + (1.0 - b2) * g * g);
        const double mhat = static_cast<double>(m[i]) / corr1;
        const double vhat = static_cast<double>(v[i]) / corr2;
        p.data()[i] = static_cast<S>(static_cast<double>(p.data()[i]) -
                                     lr * mhat / (std::sqrt(vhat) + hyper_.epsilon));
      }
    }
  }

  // Serialization hooks; the checkpoint module stores moments next to their
  // parameters under reserved names.
  const std::vector<S>& first_moment(std::size_t param_index) const {
    return m_[param_index];
  }
  const std::vector<S>& second_moment(std::size_t param_index) const {
    return v_[param_index];
  }
  bool has_state() const { return !m_.empty(); }

  void restore(std::int64_t step, std::vector<std::vector<S>> m,
               std::vector<std::vector<S>> v) {
    step_ = step;
    m_ = std::move(m);
    v_ = std::move(v);
  }

  void ensure_state(const ParamRegistry<S>& params) {
    if (!m_.empty()) {
      if (m_.size() != params.size()) {
        throw CheckpointError("adam: state/parameter count mismatch");
      }
      return;
    }
    m_.resize(params.size());
    v_.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i].assign(params.all()[i].tensor.numel(), S(0));
      v_[i].assign(params.all()[i].tensor.numel(), S(0));
    }
  }

 private:
  Hyper hyper_;
  std::int64_t step_{0};
  std::vector<std::vector<S>> m_;
  std::vector<std::vector<S>> v_;
};

}  // namespace cadence
