#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "cadence/acoustic.hpp"
#include "cadence/checkpoint.hpp"
#include "cadence/extractor.hpp"
#include "cadence/optim.hpp"
#include "cadence/params.hpp"

namespace cadence {

// Run facts carried inside every checkpoint besides the raw parameters, so a
// checkpoint alone is enough to rebuild the model and enforce the evaluation
// protocol (unseen-speaker checks, resume guards).
struct SystemMeta {
  ExtractorConfig extractor;
  ModelConfig model;
  std::uint64_t train_seed{0};
  int sample_rate{16000};
  float best_val{0.0f};          // +inf until the first validation pass
  bool has_best_val{false};
  std::vector<std::string> train_speakers;
};

void save_system(const std::string& path, const ParamRegistry<float>& params,
                 const Adam<float>* optimizer, const SystemMeta& meta);

struct LoadedSystem {
  SystemMeta meta;
  std::shared_ptr<ParamRegistry<float>> params;
  std::shared_ptr<AcousticModel<float>> model;
  bool has_optimizer{false};
  std::int64_t opt_step{0};
  std::vector<std::vector<float>> opt_m, opt_v;  // registry order
};

LoadedSystem load_system(const std::string& path);

}  // namespace cadence
