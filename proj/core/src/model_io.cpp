#include "cadence/model_io.hpp"

#include <cmath>
#include <limits>

#include "cadence/errors.hpp"

namespace cadence {

namespace {

// Small nonneg integers are exact in f32 up to 2^24; everything stored this
// way stays well below that.
void put_int(Checkpoint& c, const std::string& name, long v) {
  c.add(name, {1}, {static_cast<float>(v)});
}

long get_int(const Checkpoint& c, const std::string& name) {
  const auto& e = c.at(name);
  if (e.values.size() != 1) {
    throw CheckpointError("meta entry " + name + " must hold one value");
  }
  return std::lround(static_cast<double>(e.values[0]));
}

void put_f32(Checkpoint& c, const std::string& name, float v) {
  c.add(name, {1}, {v});
}

float get_f32(const Checkpoint& c, const std::string& name) {
  const auto& e = c.at(name);
  if (e.values.size() != 1) {
    throw CheckpointError("meta entry " + name + " must hold one value");
  }
  return e.values[0];
}

// u64 split into four 16-bit words, little end first; each word is exact
// in f32.
void put_u64(Checkpoint& c, const std::string& name, std::uint64_t v) {
  std::vector<float> words(4);
  for (int i = 0; i < 4; ++i) {
    words[i] = static_cast<float>((v >> (16 * i)) & 0xffffu);
  }
  c.add(name, {4}, std::move(words));
}

std::uint64_t get_u64(const Checkpoint& c, const std::string& name) {
  const auto& e = c.at(name);
  if (e.values.size() != 4) {
    throw CheckpointError("meta entry " + name + " must hold four words");
  }
  std::uint64_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint64_t>(std::lround(e.values[i])) << (16 * i);
  }
  return v;
}

void put_text(Checkpoint& c, const std::string& name, const std::string& s) {
  std::vector<float> codes(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    codes[i] = static_cast<float>(static_cast<unsigned char>(s[i]));
  }
  c.add(name, {static_cast<int>(s.size())}, std::move(codes));
}

std::string get_text(const Checkpoint& c, const std::string& name) {
  const auto& e = c.at(name);
  std::string s(e.values.size(), '\0');
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = static_cast<char>(std::lround(e.values[i]));
  }
  return s;
}

std::string join(const std::vector<std::string>& parts) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out += ',';
    out += parts[i];
  }
  return out;
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    std::size_t end = s.find(',', start);
    if (end == std::string::npos) end = s.size();
    if (end > start) out.push_back(s.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

}  // namespace

void save_system(const std::string& path, const ParamRegistry<float>& params,
                 const Adam<float>* optimizer, const SystemMeta& meta) {
  Checkpoint ckpt;

  const ExtractorConfig& ex = meta.extractor;
  put_int(ckpt, "meta/ext_blocks", ex.blocks);
  put_int(ckpt, "meta/ext_dim", ex.dim);
  put_int(ckpt, "meta/ext_window", ex.window);
  put_int(ckpt, "meta/ext_stride", ex.stride);
  put_f32(ckpt, "meta/ext_gain_base", ex.gain_base);
  put_f32(ckpt, "meta/ext_gain_step", ex.gain_step);
  put_f32(ckpt, "meta/ext_residual", ex.residual);
  put_f32(ckpt, "meta/ext_hp_step", ex.hp_step);
  put_u64(ckpt, "meta/ext_seed", ex.seed);

  const ModelConfig& m = meta.model;
  put_int(ckpt, "meta/mode", m.mode == ConditioningMode::separate ? 1 : 0);
  put_int(ckpt, "meta/inventory", m.inventory);
  put_int(ckpt, "meta/mel_bins", m.mel_bins);
  put_int(ckpt, "meta/hidden", m.hidden);
  put_int(ckpt, "meta/enc_blocks", m.enc_blocks);
  put_int(ckpt, "meta/dec_blocks", m.dec_blocks);
  put_int(ckpt, "meta/kernel", m.kernel);
  put_int(ckpt, "meta/dur_hidden", m.dur_hidden);
  put_int(ckpt, "meta/hop_us", std::lround(m.hop_seconds * 1e6));
  put_int(ckpt, "meta/emb_layers", m.embedding.layers);
  put_int(ckpt, "meta/emb_feature_dim", m.embedding.feature_dim);
  put_int(ckpt, "meta/embed_dim", m.embedding.embed_dim);
  put_int(ckpt, "meta/lstm_hidden", m.embedding.lstm_hidden);
  put_int(ckpt, "meta/aggregator",
          m.embedding.aggregator == Aggregator::lstm ? 1 : 0);

  put_u64(ckpt, "meta/train_seed", meta.train_seed);
  put_int(ckpt, "meta/sample_rate", meta.sample_rate);
  put_f32(ckpt, "meta/best_val",
          meta.has_best_val ? meta.best_val
                            : std::numeric_limits<float>::infinity());
  put_text(ckpt, "meta/train_speakers", join(meta.train_speakers));

  for (const auto& p : params.all()) {
    ckpt.add(p.name, p.tensor.shape(), p.tensor.values());
  }

  if (optimizer != nullptr && optimizer->has_state()) {
    put_int(ckpt, "opt/step", optimizer->step());
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto& p = params.all()[i];
      ckpt.add("opt/m/" + p.name, p.tensor.shape(), optimizer->first_moment(i));
      ckpt.add("opt/v/" + p.name, p.tensor.shape(),
               optimizer->second_moment(i));
    }
  }

  ckpt.save(path);
}

LoadedSystem load_system(const std::string& path) {
  Checkpoint ckpt = Checkpoint::load(path);

  LoadedSystem sys;
  ExtractorConfig& ex = sys.meta.extractor;
  ex.blocks = static_cast<int>(get_int(ckpt, "meta/ext_blocks"));
  ex.dim = static_cast<int>(get_int(ckpt, "meta/ext_dim"));
  ex.window = static_cast<int>(get_int(ckpt, "meta/ext_window"));
  ex.stride = static_cast<int>(get_int(ckpt, "meta/ext_stride"));
  ex.gain_base = get_f32(ckpt, "meta/ext_gain_base");
  ex.gain_step = get_f32(ckpt, "meta/ext_gain_step");
  ex.residual = get_f32(ckpt, "meta/ext_residual");
  ex.hp_step = get_f32(ckpt, "meta/ext_hp_step");
  ex.seed = get_u64(ckpt, "meta/ext_seed");

  ModelConfig& m = sys.meta.model;
  m.mode = get_int(ckpt, "meta/mode") == 1 ? ConditioningMode::separate
                                           : ConditioningMode::common;
  m.inventory = static_cast<int>(get_int(ckpt, "meta/inventory"));
  m.mel_bins = static_cast<int>(get_int(ckpt, "meta/mel_bins"));
  m.hidden = static_cast<int>(get_int(ckpt, "meta/hidden"));
  m.enc_blocks = static_cast<int>(get_int(ckpt, "meta/enc_blocks"));
  m.dec_blocks = static_cast<int>(get_int(ckpt, "meta/dec_blocks"));
  m.kernel = static_cast<int>(get_int(ckpt, "meta/kernel"));
  m.dur_hidden = static_cast<int>(get_int(ckpt, "meta/dur_hidden"));
  m.hop_seconds = static_cast<double>(get_int(ckpt, "meta/hop_us")) * 1e-6;
  m.embedding.layers = static_cast<int>(get_int(ckpt, "meta/emb_layers"));
  m.embedding.feature_dim =
      static_cast<int>(get_int(ckpt, "meta/emb_feature_dim"));
  m.embedding.embed_dim = static_cast<int>(get_int(ckpt, "meta/embed_dim"));
  m.embedding.lstm_hidden =
      static_cast<int>(get_int(ckpt, "meta/lstm_hidden"));
  m.embedding.aggregator = get_int(ckpt, "meta/aggregator") == 1
                               ? Aggregator::lstm
                               : Aggregator::average;

  sys.meta.train_seed = get_u64(ckpt, "meta/train_seed");
  sys.meta.sample_rate = static_cast<int>(get_int(ckpt, "meta/sample_rate"));
  const float best = get_f32(ckpt, "meta/best_val");
  sys.meta.has_best_val = std::isfinite(best);
  sys.meta.best_val = sys.meta.has_best_val ? best : 0.0f;
  sys.meta.train_speakers = split_commas(get_text(ckpt, "meta/train_speakers"));

  sys.params = std::make_shared<ParamRegistry<float>>();
  Rng rng(substream(sys.meta.train_seed, "init", 0));
  sys.model = std::make_shared<AcousticModel<float>>(m, *sys.params, rng);

  for (auto& p : sys.params->all()) {
    const CheckpointEntry& e = ckpt.at(p.name);
    if (e.shape != p.tensor.shape()) {
      throw CheckpointError("checkpoint entry " + p.name +
                            " has an unexpected shape");
    }
    for (float v : e.values) {
      if (!std::isfinite(v)) {
        throw CheckpointError("non-finite value in parameter " + p.name);
      }
    }
    p.tensor.values() = e.values;
  }

  sys.has_optimizer = ckpt.has("opt/step");
  if (sys.has_optimizer) {
    sys.opt_step = get_int(ckpt, "opt/step");
    sys.opt_m.reserve(sys.params->size());
    sys.opt_v.reserve(sys.params->size());
    for (const auto& p : sys.params->all()) {
      const CheckpointEntry& em = ckpt.at("opt/m/" + p.name);
      const CheckpointEntry& ev = ckpt.at("opt/v/" + p.name);
      if (em.values.size() != p.tensor.numel() ||
          ev.values.size() != p.tensor.numel()) {
        throw CheckpointError("optimizer state for " + p.name +
                              " has an unexpected size");
      }
      sys.opt_m.push_back(em.values);
      sys.opt_v.push_back(ev.values);
    }
  }
  return sys;
}

}  // namespace cadence
