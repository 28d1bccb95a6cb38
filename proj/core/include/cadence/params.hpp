#pragma once

#include <cmath>
#include <string>
#include <unordered_map>
#include <vector>

#include "cadence/errors.hpp"
#include "cadence/rng.hpp"
#include "cadence/tensor.hpp"

namespace cadence {

// A named learnable leaf tensor. The gradient buffer always matches the value
// shape; Tensor allocates it on construction for requires_grad leaves.
template <typename S>
struct Parameter {
  std::string name;
  Tensor<S> tensor;
};

// Owns every learnable tensor of a model in registration order. Registration
// order is deterministic (it follows module construction), which fixes the
// optimizer iteration order and the checkpoint layout.
template <typename S>
class ParamRegistry {
 public:
  // Uniform init scaled by fan-in; used for linear, conv and recurrent
  // weights alike (recurrent fan-in = hidden size). Draws are generated in
  // double and cast, so float and double instantiations share weights.
  Tensor<S>& create(const std::string& name, std::vector<int> shape,
                    int fan_in, Rng& rng) {
    const double bound = fan_in > 0 ? 1.0 / std::sqrt(static_cast<double>(fan_in)) : 0.0;
    Tensor<S> t = Tensor<S>::zeros(std::move(shape), true);
    for (std::size_t i = 0; i < t.numel(); ++i) {
      t.data()[i] = static_cast<S>(rng.uniform(-bound, bound));
    }
    return add(name, std::move(t));
  }

  Tensor<S>& create_zeros(const std::string& name, std::vector<int> shape) {
    return add(name, Tensor<S>::zeros(std::move(shape), true));
  }

  Tensor<S>& add(const std::string& name, Tensor<S> t) {
    if (index_.count(name)) {
      throw ConfigError("parameter registered twice: " + name);
    }
    index_[name] = params_.size();
    params_.push_back(Parameter<S>{name, std::move(t)});
    return params_.back().tensor;
  }

  Tensor<S>& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
    return params_[it->second].tensor;
  }

  bool contains(const std::string& name) const { return index_.count(name) > 0; }

  std::vector<Parameter<S>>& all() { return params_; }
  const std::vector<Parameter<S>>& all() const { return params_; }
  std::size_t size() const { return params_.size(); }

  void zero_grad() {
    for (auto& p : params_) p.tensor.zero_grad();
  }

  std::size_t total_values() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.tensor.numel();
    return n;
  }

 private:
  std::vector<Parameter<S>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace cadence
