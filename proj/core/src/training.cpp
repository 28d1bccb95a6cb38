#include "cadence/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <unordered_map>

#include "cadence/util.hpp"

namespace cadence {

void TrainConfig::validate() const {
  if (max_steps < 0) throw ConfigError("max_steps must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (warmup < 1) throw ConfigError("warmup must be >= 1");
  if (noam_scale <= 0) throw ConfigError("noam_scale must be positive");
  if (lambda_mel < 0 || lambda_dur < 0 ||
      (lambda_mel == 0 && lambda_dur == 0)) {
    throw ConfigError("loss weights must be nonnegative and not both zero");
  }
  if (val_interval < 1) throw ConfigError("val_interval must be >= 1");
  if (val_fraction < 0 || val_fraction >= 1) {
    throw ConfigError("val_fraction must be in [0, 1)");
  }
  if (threads < 1) throw ConfigError("threads must be >= 1");
  if (run_dir.empty()) throw ConfigError("run_dir must be set");
}

Dataset::Dataset(const Manifest& manifest, const PseudoSslExtractor& extractor,
                 int inventory, int mel_bins, double hop_seconds, int threads)
    : manifest_(manifest) {
  const auto& recs = manifest_.records;
  items_.resize(recs.size());
  parallel_for(recs.size(), threads, [&](std::size_t i) {
    const UtteranceRecord& rec = recs[i];
    TrainItem item;
    item.record = rec;
    item.phonemes = PhonemeSequence{inventory, rec.phonemes};
    item.phonemes.validate();

    MelSpectrogram mel = load_mel_file(resolve_path(manifest_, rec.mel_path));
    mel.validate();
    if (mel.bins != mel_bins) {
      throw DataError(rec.utt_id + ": mel has " + std::to_string(mel.bins) +
                      " bins, model expects " + std::to_string(mel_bins));
    }
    if (std::abs(mel.hop_seconds - hop_seconds) > 1e-9) {
      throw DataError(rec.utt_id + ": mel hop does not match the model hop");
    }

    RepresentationStack stack;
    if (!rec.feat_path.empty()) {
      stack = load_feature_file(resolve_path(manifest_, rec.feat_path));
      stack.validate();
      if (stack.layers != extractor.config().blocks + 1 ||
          stack.dim != extractor.config().dim) {
        throw DataError(rec.utt_id +
                        ": cached features do not match the extractor shape");
      }
    } else {
      Waveform wav = load_wav(resolve_path(manifest_, rec.wav_path));
      stack = extractor.extract(wav);
    }

    item.stack = stack_to_tensor<float>(stack);
    item.mel = mel_to_tensor<float>(mel);
    item.log_dur_target =
        Tensor<float>::from({static_cast<int>(rec.durations.size())},
                            log_duration_targets(rec.durations));
    item.raw_stack = std::move(stack);
    items_[i] = std::move(item);
  });
}

void Trainer::holdout_split(const Dataset& data, double fraction,
                            std::uint64_t seed,
                            std::vector<std::size_t>& train_idx,
                            std::vector<std::size_t>& val_idx) {
  train_idx.clear();
  val_idx.clear();
  std::vector<std::string> order;
  std::unordered_map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < data.items().size(); ++i) {
    const std::string& id = data.items()[i].record.speaker_id;
    auto& g = groups[id];
    if (g.empty()) order.push_back(id);
    g.push_back(i);
  }
  for (std::size_t s = 0; s < order.size(); ++s) {
    std::vector<std::size_t> idxs = groups[order[s]];
    if (idxs.size() < 2 || fraction <= 0) {
      train_idx.insert(train_idx.end(), idxs.begin(), idxs.end());
      continue;
    }
    Rng rng(substream(seed, "holdout", s));
    for (std::size_t i = idxs.size() - 1; i > 0; --i) {
      const std::size_t j =
          static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i)));
      std::swap(idxs[i], idxs[j]);
    }
    std::size_t k = std::max<std::size_t>(
        1, static_cast<std::size_t>(fraction * static_cast<double>(idxs.size())));
    if (k >= idxs.size()) k = idxs.size() - 1;
    val_idx.insert(val_idx.end(), idxs.begin(), idxs.begin() + k);
    train_idx.insert(train_idx.end(), idxs.begin() + k, idxs.end());
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(val_idx.begin(), val_idx.end());
}

namespace {

void check_resume_match(const SystemMeta& meta, const TrainConfig& cfg,
                        const ModelConfig& model_cfg,
                        const ExtractorConfig& ext_cfg) {
  auto fail = [](const std::string& field) {
    throw ConfigError("resume: checkpoint disagrees with the config on " +
                      field);
  };
  if (meta.train_seed != cfg.seed) fail("seed");
  const ModelConfig& m = meta.model;
  if (m.mode != model_cfg.mode) fail("conditioning mode");
  if (m.inventory != model_cfg.inventory) fail("inventory");
  if (m.mel_bins != model_cfg.mel_bins) fail("mel_bins");
  if (m.hidden != model_cfg.hidden) fail("hidden");
  if (m.enc_blocks != model_cfg.enc_blocks) fail("enc_blocks");
  if (m.dec_blocks != model_cfg.dec_blocks) fail("dec_blocks");
  if (m.kernel != model_cfg.kernel) fail("kernel");
  if (m.dur_hidden != model_cfg.dur_hidden) fail("dur_hidden");
  if (std::abs(m.hop_seconds - model_cfg.hop_seconds) > 1e-9) {
    fail("hop_seconds");
  }
  const EmbeddingConfig& e = m.embedding;
  if (e.layers != model_cfg.embedding.layers) fail("embedding layers");
  if (e.feature_dim != model_cfg.embedding.feature_dim) {
    fail("embedding feature_dim");
  }
  if (e.embed_dim != model_cfg.embedding.embed_dim) fail("embed_dim");
  if (e.aggregator != model_cfg.embedding.aggregator) fail("aggregator");
  const ExtractorConfig& x = meta.extractor;
  if (x.blocks != ext_cfg.blocks || x.dim != ext_cfg.dim ||
      x.window != ext_cfg.window || x.stride != ext_cfg.stride ||
      x.seed != ext_cfg.seed || x.gain_base != ext_cfg.gain_base ||
      x.gain_step != ext_cfg.gain_step || x.residual != ext_cfg.residual ||
      x.hp_step != ext_cfg.hp_step) {
    fail("extractor");
  }
}

void write_metrics_header(std::ostream& os) {
  os << "step\tlr\tloss\tmel_mae\tdur_mse\tval_loss\tval_mel_mae\tval_dur_mse\n";
}

void write_metrics_row(std::ostream& os, const MetricsRow& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%ld\t%.8g\t%.8g\t%.8g\t%.8g", r.step, r.lr,
                r.loss, r.mel_mae, r.dur_mse);
  os << buf;
  if (r.has_val) {
    std::snprintf(buf, sizeof buf, "\t%.8g\t%.8g\t%.8g", r.val_loss,
                  r.val_mel_mae, r.val_dur_mse);
    os << buf;
  } else {
    os << "\t-\t-\t-";
  }
  os << '\n';
  os.flush();
}

}  // namespace

Trainer::Trainer(const TrainConfig& cfg, const ModelConfig& model_cfg,
                 const ExtractorConfig& ext_cfg, const Manifest& train_manifest)
    : cfg_(cfg), model_cfg_(model_cfg), ext_cfg_(ext_cfg),
      manifest_(train_manifest) {
  cfg_.validate();
  model_cfg_.validate();
}

TrainOutcome Trainer::run(bool resume) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg_.run_dir);
  const std::string last_path = cfg_.run_dir + "/last.ckpt";
  const std::string best_path = cfg_.run_dir + "/best.ckpt";
  const std::string metrics_path = cfg_.run_dir + "/metrics.tsv";

  PseudoSslExtractor extractor(ext_cfg_);
  Dataset data(manifest_, extractor, model_cfg_.inventory, model_cfg_.mel_bins,
               model_cfg_.hop_seconds, cfg_.threads);
  if (data.items().empty()) {
    throw DataError("training manifest has no records");
  }
  std::vector<std::size_t> train_idx, val_idx;
  holdout_split(data, cfg_.val_fraction, cfg_.seed, train_idx, val_idx);
  if (train_idx.empty()) {
    throw DataError("no training items left after the validation holdout");
  }

  SystemMeta meta;
  meta.extractor = ext_cfg_;
  meta.model = model_cfg_;
  meta.train_seed = cfg_.seed;
  meta.train_speakers = manifest_.speaker_order();

  auto params = std::make_shared<ParamRegistry<float>>();
  std::shared_ptr<AcousticModel<float>> model;
  Adam<float> opt;
  long start_step = 0;
  float best = std::numeric_limits<float>::infinity();

  if (resume) {
    LoadedSystem sys = load_system(last_path);
    check_resume_match(sys.meta, cfg_, model_cfg_, ext_cfg_);
    params = sys.params;
    model = sys.model;
    if (sys.has_optimizer) {
      opt.restore(sys.opt_step, std::move(sys.opt_m), std::move(sys.opt_v));
      start_step = static_cast<long>(sys.opt_step);
    }
    if (sys.meta.has_best_val) best = sys.meta.best_val;
  } else {
    Rng init_rng(substream(cfg_.seed, "init", 0));
    model = std::make_shared<AcousticModel<float>>(model_cfg_, *params,
                                                   init_rng);
  }

  std::ofstream metrics;
  const bool had_metrics = fs::exists(metrics_path);
  metrics.open(metrics_path,
               resume ? (std::ios::out | std::ios::app) : std::ios::out);
  if (!metrics) throw DataError("cannot open " + metrics_path);
  if (!resume || !had_metrics) write_metrics_header(metrics);

  auto save_ckpt = [&](const std::string& path) {
    SystemMeta m = meta;
    m.has_best_val = std::isfinite(best);
    m.best_val =
        m.has_best_val ? best : std::numeric_limits<float>::infinity();
    save_system(path, *params, opt.has_state() ? &opt : nullptr, m);
  };

  auto run_validation = [&](double& vmel, double& vdur) {
    NoGradGuard guard;
    double ms = 0, ds = 0;
    for (std::size_t idx : val_idx) {
      const TrainItem& it = data.items()[idx];
      auto tf = model->forward_teacher(it.phonemes, it.stack,
                                       it.record.durations);
      auto lb = compute_loss(tf.mel, it.mel, tf.log_durations,
                             it.log_dur_target, cfg_.lambda_mel,
                             cfg_.lambda_dur);
      ms += lb.mel_mae;
      ds += lb.dur_mse;
    }
    vmel = ms / static_cast<double>(val_idx.size());
    vdur = ds / static_cast<double>(val_idx.size());
  };

  TrainOutcome out;
  out.last_path = last_path;

  for (long step = start_step + 1; step <= cfg_.max_steps; ++step) {
    Rng batch_rng(substream(cfg_.seed, "batch",
                            static_cast<std::uint64_t>(step)));
    params->zero_grad();
    Tensor<float> total;
    double mel_sum = 0, dur_sum = 0;
    for (int b = 0; b < cfg_.batch_size; ++b) {
      const std::size_t pick = static_cast<std::size_t>(batch_rng.uniform_int(
          0, static_cast<int>(train_idx.size()) - 1));
      const TrainItem& it = data.items()[train_idx[pick]];
      auto tf = model->forward_teacher(it.phonemes, it.stack,
                                       it.record.durations);
      auto lb = compute_loss(tf.mel, it.mel, tf.log_durations,
                             it.log_dur_target, cfg_.lambda_mel,
                             cfg_.lambda_dur);
      mel_sum += lb.mel_mae;
      dur_sum += lb.dur_mse;
      total = b == 0 ? lb.total : add(total, lb.total);
    }
    total = scale(total, 1.0f / static_cast<float>(cfg_.batch_size));
    const double loss_val = static_cast<double>(total.item());
    if (!std::isfinite(loss_val)) {
      throw TrainingDiverged("training loss became non-finite at step " +
                                 std::to_string(step),
                             "loss");
    }
    backward(total);
    const double lr =
        noam_lr(step, model_cfg_.hidden, cfg_.warmup, cfg_.noam_scale);
    opt.update(*params, lr);

    MetricsRow row;
    row.step = step;
    row.lr = lr;
    row.loss = loss_val;
    row.mel_mae = mel_sum / cfg_.batch_size;
    row.dur_mse = dur_sum / cfg_.batch_size;

    if (step % cfg_.val_interval == 0 || step == cfg_.max_steps) {
      if (!val_idx.empty()) {
        double vmel = 0, vdur = 0;
        run_validation(vmel, vdur);
        row.has_val = true;
        row.val_mel_mae = vmel;
        row.val_dur_mse = vdur;
        row.val_loss = cfg_.lambda_mel * vmel + cfg_.lambda_dur * vdur;
        if (static_cast<float>(row.val_loss) < best) {
          best = static_cast<float>(row.val_loss);
          save_ckpt(best_path);
        }
      }
      save_ckpt(last_path);
    }
    write_metrics_row(metrics, row);
    out.history.push_back(row);
  }

  if (cfg_.max_steps <= start_step && !resume) {
    save_ckpt(last_path);  // zero-step run still leaves a usable checkpoint
  }

  out.steps_run = std::max<long>(0, cfg_.max_steps - start_step);
  out.has_best = std::isfinite(best);
  out.best_val = best;
  if (out.has_best) out.best_path = best_path;
  return out;
}

}  // namespace cadence
