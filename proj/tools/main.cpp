#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cadence/config.hpp"
#include "cadence/corpus.hpp"
#include "cadence/errors.hpp"
#include "cadence/evaluation.hpp"
#include "cadence/model_io.hpp"
#include "cadence/training.hpp"

namespace fs = std::filesystem;
using namespace cadence;

namespace {

void apply_sets(KeyValueConfig& cfg, const std::vector<std::string>& sets) {
  for (const auto& s : sets) {
    const std::size_t eq = s.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError("--set wants key=value, got '" + s + "'");
    }
    cfg.set(s.substr(0, eq), s.substr(eq + 1));
  }
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open " + path + " for writing");
  os << content;
  if (!os) throw DataError("failed writing " + path);
}

CorpusConfig corpus_from_config(KeyValueConfig& cfg) {
  CorpusConfig c;
  c.speakers = static_cast<int>(cfg.get_int("speakers", c.speakers));
  c.utterances_per_speaker = static_cast<int>(
      cfg.get_int("utterances_per_speaker", c.utterances_per_speaker));
  c.inventory = static_cast<int>(cfg.get_int("inventory", c.inventory));
  c.min_phonemes =
      static_cast<int>(cfg.get_int("min_phonemes", c.min_phonemes));
  c.max_phonemes =
      static_cast<int>(cfg.get_int("max_phonemes", c.max_phonemes));
  c.mel_bins = static_cast<int>(cfg.get_int("mel_bins", c.mel_bins));
  c.hop_seconds = cfg.get_double("hop_seconds", c.hop_seconds);
  c.sample_rate = static_cast<int>(cfg.get_int("sample_rate", c.sample_rate));
  c.dur_base_min = cfg.get_double("dur_base_min", c.dur_base_min);
  c.dur_base_max = cfg.get_double("dur_base_max", c.dur_base_max);
  c.rate_min = cfg.get_double("rate_min", c.rate_min);
  c.rate_max = cfg.get_double("rate_max", c.rate_max);
  c.jitter = cfg.get_double("jitter", c.jitter);
  c.mel_noise = cfg.get_double("mel_noise", c.mel_noise);
  c.seed = cfg.get_u64("seed", c.seed);
  return c;
}

struct TrainSetup {
  std::string manifest_path;
  TrainConfig train;
  ModelConfig model;
  ExtractorConfig extractor;
};

TrainSetup train_from_config(KeyValueConfig& cfg) {
  TrainSetup s;
  s.manifest_path = cfg.require_string("manifest");
  s.train.run_dir = cfg.require_string("run_dir");
  s.train.max_steps = cfg.get_int("max_steps", 1500);
  s.train.batch_size = static_cast<int>(cfg.get_int("batch_size", 8));
  s.train.warmup = static_cast<int>(cfg.get_int("warmup", 200));
  s.train.noam_scale = cfg.get_double("noam_scale", 0.35);
  s.train.lambda_mel = cfg.get_double("lambda_mel", 1.0);
  s.train.lambda_dur = cfg.get_double("lambda_dur", 1.0);
  s.train.val_interval = static_cast<int>(cfg.get_int("val_interval", 200));
  s.train.val_fraction = cfg.get_double("val_fraction", 0.1);
  s.train.seed = cfg.get_u64("seed", 1);

  s.model.mode = parse_mode(cfg.get_string("mode", "separate"));
  s.model.inventory = static_cast<int>(cfg.get_int("inventory", 24));
  s.model.mel_bins = static_cast<int>(cfg.get_int("mel_bins", 32));
  s.model.hidden = static_cast<int>(cfg.get_int("hidden", 48));
  s.model.enc_blocks = static_cast<int>(cfg.get_int("enc_blocks", 2));
  s.model.dec_blocks = static_cast<int>(cfg.get_int("dec_blocks", 2));
  s.model.kernel = static_cast<int>(cfg.get_int("kernel", 3));
  s.model.dur_hidden = static_cast<int>(cfg.get_int("dur_hidden", 32));
  s.model.hop_seconds = cfg.get_double("hop_seconds", 0.005);

  s.extractor.blocks = static_cast<int>(cfg.get_int("ext_blocks", 6));
  s.extractor.dim = static_cast<int>(cfg.get_int("ext_dim", 64));
  s.extractor.window = static_cast<int>(cfg.get_int("ext_window", 400));
  s.extractor.stride = static_cast<int>(cfg.get_int("ext_stride", 320));
  s.extractor.gain_base =
      static_cast<float>(cfg.get_double("ext_gain_base", 1.0));
  s.extractor.gain_step =
      static_cast<float>(cfg.get_double("ext_gain_step", 0.35));
  s.extractor.residual =
      static_cast<float>(cfg.get_double("ext_residual", 0.5));
  s.extractor.hp_step =
      static_cast<float>(cfg.get_double("ext_hp_step", 0.16));
  s.extractor.seed = cfg.get_u64("ext_seed", 7151);

  s.model.embedding.layers = s.extractor.blocks + 1;
  s.model.embedding.feature_dim = s.extractor.dim;
  s.model.embedding.embed_dim =
      static_cast<int>(cfg.get_int("embed_dim", 16));
  s.model.embedding.lstm_hidden =
      static_cast<int>(cfg.get_int("lstm_hidden", 32));
  s.model.embedding.aggregator =
      parse_aggregator(cfg.get_string("aggregator", "lstm"));
  return s;
}

int cmd_gen_corpus(const std::string& config_path, const std::string& out_dir,
                   bool overwrite, int threads, std::uint64_t seed_flag,
                   bool seed_given, const std::vector<std::string>& sets) {
  KeyValueConfig cfg = config_path.empty()
                           ? KeyValueConfig()
                           : KeyValueConfig::from_file(config_path);
  apply_sets(cfg, sets);
  if (seed_given) cfg.set("seed", std::to_string(seed_flag));

  CorpusConfig ccfg = corpus_from_config(cfg);
  const double train_ratio = cfg.get_double("train_ratio", 0.8);
  const double val_ratio = cfg.get_double("val_ratio", 0.1);
  const double test_ratio = cfg.get_double("test_ratio", 0.1);
  const std::uint64_t split_seed = cfg.get_u64("split_seed", ccfg.seed);
  cfg.finish();
  ccfg.validate();

  if (fs::exists(out_dir) && !fs::is_empty(out_dir) && !overwrite) {
    throw ConfigError("output directory " + out_dir +
                      " is not empty; pass --overwrite to replace its contents");
  }
  fs::create_directories(out_dir);

  CorpusGenerator gen(ccfg);
  Manifest manifest = gen.generate(out_dir, threads);
  SplitManifests sm =
      split(manifest, train_ratio, val_ratio, test_ratio, split_seed);
  save_manifest(sm.train, out_dir + "/train.tsv");
  save_manifest(sm.val, out_dir + "/val.tsv");
  save_manifest(sm.test, out_dir + "/test.tsv");
  write_text(out_dir + "/config.resolved", cfg.resolved());

  auto brief = [](const Manifest& m) {
    return std::to_string(m.speaker_order().size()) + " speakers / " +
           std::to_string(m.records.size()) + " utterances";
  };
  std::cout << "corpus: " << brief(manifest) << "\n"
            << "train:  " << brief(sm.train) << "\n"
            << "val:    " << brief(sm.val) << "\n"
            << "test:   " << brief(sm.test) << "\n";
  return 0;
}

int cmd_train(const std::string& config_path, bool resume, int threads,
              const std::vector<std::string>& sets) {
  KeyValueConfig cfg = config_path.empty()
                           ? KeyValueConfig()
                           : KeyValueConfig::from_file(config_path);
  apply_sets(cfg, sets);
  TrainSetup setup = train_from_config(cfg);
  cfg.finish();
  setup.train.threads = threads;

  Manifest manifest =
      load_manifest(setup.manifest_path, setup.model.inventory);
  fs::create_directories(setup.train.run_dir);
  write_text(setup.train.run_dir + "/config.resolved", cfg.resolved());

  Trainer trainer(setup.train, setup.model, setup.extractor, manifest);
  TrainOutcome out = trainer.run(resume);

  std::cout << "trained " << out.steps_run << " steps\n";
  if (!out.history.empty()) {
    const MetricsRow& last = out.history.back();
    std::cout << "final loss " << last.loss << " (mel " << last.mel_mae
              << ", dur " << last.dur_mse << ")\n";
  }
  if (out.has_best) {
    std::cout << "best validation loss " << out.best_val << " -> "
              << out.best_path << "\n";
  }
  std::cout << "checkpoint " << out.last_path << "\n";
  return 0;
}

// Reference resolution for synth: an utterance id in the manifest (cached
// features if present, else extract from the wav) or a feature file path.
RepresentationStack resolve_reference(const std::string& utt_id,
                                      const std::string& feat_file,
                                      const Manifest* manifest,
                                      const PseudoSslExtractor& extractor,
                                      std::string& label) {
  if (!feat_file.empty()) {
    label = feat_file;
    RepresentationStack stack = load_feature_file(feat_file);
    stack.validate();
    if (stack.layers != extractor.config().blocks + 1 ||
        stack.dim != extractor.config().dim) {
      throw DataError(feat_file +
                      ": feature shape does not match the checkpoint's "
                      "extractor");
    }
    return stack;
  }
  if (utt_id.empty()) {
    throw ConfigError("a reference needs an utterance id or a feature file");
  }
  if (manifest == nullptr) {
    throw ConfigError("utterance-id references need --manifest");
  }
  for (const auto& rec : manifest->records) {
    if (rec.utt_id != utt_id) continue;
    label = utt_id;
    if (!rec.feat_path.empty()) {
      RepresentationStack stack =
          load_feature_file(resolve_path(*manifest, rec.feat_path));
      stack.validate();
      return stack;
    }
    Waveform wav = load_wav(resolve_path(*manifest, rec.wav_path));
    return extractor.extract(wav);
  }
  throw DataError("utterance " + utt_id + " not found in the manifest");
}

int cmd_synth(const std::string& ckpt_path, const std::string& manifest_path,
              const std::string& utt_id, const std::string& phoneme_text,
              const std::string& ac_ref, const std::string& ac_ref_file,
              const std::string& dur_ref, const std::string& dur_ref_file,
              const std::string& out_path) {
  LoadedSystem sys = load_system(ckpt_path);
  const int inventory = sys.meta.model.inventory;

  Manifest manifest;
  bool have_manifest = false;
  if (!manifest_path.empty()) {
    manifest = load_manifest(manifest_path, inventory);
    have_manifest = true;
  }

  PhonemeSequence text;
  if (!phoneme_text.empty()) {
    text = phonemes_from_text(phoneme_text, inventory);
  } else if (!utt_id.empty()) {
    if (!have_manifest) {
      throw ConfigError("--utt needs --manifest");
    }
    bool found = false;
    for (const auto& rec : manifest.records) {
      if (rec.utt_id == utt_id) {
        text = PhonemeSequence{inventory, rec.phonemes};
        found = true;
        break;
      }
    }
    if (!found) {
      throw DataError("utterance " + utt_id + " not found in the manifest");
    }
  } else {
    throw ConfigError("synth needs --phonemes or --utt");
  }
  text.validate();

  PseudoSslExtractor extractor(sys.meta.extractor);
  const Manifest* mptr = have_manifest ? &manifest : nullptr;
  std::string ac_label, dur_label;
  RepresentationStack ac_stack =
      resolve_reference(ac_ref, ac_ref_file, mptr, extractor, ac_label);

  const bool want_dur_ref = !dur_ref.empty() || !dur_ref_file.empty();
  RepresentationStack dur_stack;
  if (want_dur_ref) {
    dur_stack =
        resolve_reference(dur_ref, dur_ref_file, mptr, extractor, dur_label);
  } else {
    dur_label = ac_label;
  }

  SynthesisResult result = sys.model->synthesize(
      text, ac_stack, want_dur_ref ? &dur_stack : nullptr);
  save_mel_file(result.mel, out_path);

  const double rate =
      speaking_rate(result.used_durations, sys.meta.model.hop_seconds);
  long total = 0;
  for (int d : result.used_durations) total += d;

  std::string listing;
  listing += "# model " + mode_name(sys.meta.model.mode) + "-" +
             aggregator_name(sys.meta.model.embedding.aggregator) + "\n";
  listing += "# acoustic_ref " + ac_label + "\n";
  listing += "# duration_ref " + dur_label + "\n";
  listing += "# phonemes " + std::to_string(text.length()) + "\n";
  listing += "# frames " + std::to_string(total) + "\n";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", rate);
  listing += "# speaking_rate " + std::string(buf) + "\n";
  for (std::size_t i = 0; i < result.used_durations.size(); ++i) {
    listing += (i ? " " : "") + std::to_string(result.used_durations[i]);
  }
  listing += "\n";
  write_text(out_path + ".txt", listing);

  std::cout << "wrote " << out_path << " (" << total << " frames), durations "
            << out_path << ".txt\n"
            << "speaking rate " << buf << " phonemes/sec\n";
  return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& manifest_path,
             const std::string& condition, std::uint64_t seed,
             const std::string& out_dir, int threads) {
  LoadedSystem sys = load_system(ckpt_path);
  Manifest manifest = load_manifest(manifest_path, sys.meta.model.inventory);
  EvalCondition cond = parse_condition(condition);
  EvalReport report = run_objective_eval(sys, manifest, cond, seed, threads);

  fs::create_directories(out_dir);
  const std::string base = out_dir + "/eval_" + report.condition;
  save_eval_tsv(report, base + ".tsv");
  save_eval_json(report, base + ".json");

  std::cout << report.model_id << " " << report.condition << " ("
            << report.utterances.size() << " utterances)\n"
            << "Spec. (mel MAE):     " << report.mel_mae_mean << "\n"
            << "Dur. (RMSE ms):      " << report.duration_rmse_ms << "\n"
            << "reports: " << base << ".tsv, " << base << ".json\n";
  return 0;
}

int cmd_rhythm_eval(const std::string& ckpt_path,
                    const std::string& corpus_dir, const std::string& out_dir,
                    std::uint64_t seed, int n_texts, double rate_a,
                    double rate_b) {
  LoadedSystem sys = load_system(ckpt_path);
  KeyValueConfig ccfg_file =
      KeyValueConfig::from_file(corpus_dir + "/config.resolved");
  CorpusConfig ccfg = corpus_from_config(ccfg_file);
  // The resolved file also records split keys; they are not corpus
  // parameters, so no finish() here.
  CorpusGenerator gen(ccfg);

  RhythmReport report =
      run_rhythm_transfer_eval(sys, gen, rate_a, rate_b, n_texts, seed);
  fs::create_directories(out_dir);
  save_rhythm_tsv(report, out_dir + "/rhythm.tsv");
  save_rhythm_json(report, out_dir + "/rhythm.json");

  auto line = [](const std::string& name, double mean, double sd) {
    std::printf("%-34s %7.3f +/- %5.3f phonemes/sec\n", name.c_str(), mean,
                sd);
  };
  std::cout << report.model_id << ", " << report.n_texts << " texts\n";
  line("original " + report.speaker_a.id, report.speaker_a.mean,
       report.speaker_a.stddev);
  line("original " + report.speaker_b.id, report.speaker_b.mean,
       report.speaker_b.stddev);
  line("acoustic " + report.a_acoustic_b_duration.acoustic_id + " + rhythm " +
           report.a_acoustic_b_duration.duration_id,
       report.a_acoustic_b_duration.mean, report.a_acoustic_b_duration.stddev);
  line("acoustic " + report.b_acoustic_a_duration.acoustic_id + " + rhythm " +
           report.b_acoustic_a_duration.duration_id,
       report.b_acoustic_a_duration.mean, report.b_acoustic_a_duration.stddev);
  std::cout << "closer to the rhythm reference: "
            << report.a_acoustic_b_duration.closer_to_duration << "/"
            << report.n_texts << " and "
            << report.b_acoustic_a_duration.closer_to_duration << "/"
            << report.n_texts << "\n";
  return 0;
}

int cmd_export_weights(const std::string& ckpt_path,
                       const std::string& out_path) {
  LoadedSystem sys = load_system(ckpt_path);
  LayerWeightTable table = export_layer_weights(sys);
  if (!out_path.empty()) save_layer_weights_tsv(table, out_path);

  std::printf("%-10s", "role");
  for (int l = 0; l < table.layers; ++l) std::printf(" layer%-2d", l);
  std::printf("\n");
  for (std::size_t r = 0; r < table.roles.size(); ++r) {
    std::printf("%-10s", table.roles[r].c_str());
    for (int l = 0; l < table.layers; ++l) {
      std::printf(" %7.4f", static_cast<double>(table.weights[r][l]));
    }
    std::printf("\n");
  }
  if (!out_path.empty()) std::cout << "wrote " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"zero-shot speaker-conditioned TTS with rhythm transfer"};
  app.require_subcommand(1);
  int exit_code = 0;

  // gen-corpus
  auto* gen = app.add_subcommand(
      "gen-corpus", "Generate the synthetic corpus and its splits");
  std::string gen_config, gen_out;
  bool gen_overwrite = false;
  int gen_threads = 1;
  std::uint64_t gen_seed = 0;
  std::vector<std::string> gen_sets;
  gen->add_option("--config", gen_config, "corpus config file");
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_flag("--overwrite", gen_overwrite,
                "allow writing into a non-empty directory");
  gen->add_option("--threads", gen_threads, "worker threads");
  auto* gen_seed_opt =
      gen->add_option("--seed", gen_seed, "override the corpus seed");
  gen->add_option("--set", gen_sets, "override a config key (key=value)");
  gen->callback([&] {
    exit_code = cmd_gen_corpus(gen_config, gen_out, gen_overwrite, gen_threads,
                               gen_seed, gen_seed_opt->count() > 0, gen_sets);
  });

  // train
  auto* train = app.add_subcommand("train", "Train a model from a manifest");
  std::string train_config;
  bool train_resume = false;
  int train_threads = 1;
  std::vector<std::string> train_sets;
  train->add_option("--config", train_config, "training config file");
  train->add_flag("--resume", train_resume,
                  "continue from the run directory's last checkpoint");
  train->add_option("--threads", train_threads, "worker threads");
  train->add_option("--set", train_sets, "override a config key (key=value)");
  train->callback([&] {
    exit_code = cmd_train(train_config, train_resume, train_threads,
                          train_sets);
  });

  // synth
  auto* synth = app.add_subcommand(
      "synth", "Synthesize a mel from references (rhythm transfer with "
               "--duration-ref)");
  std::string sy_ckpt, sy_manifest, sy_utt, sy_phonemes, sy_ac, sy_ac_file,
      sy_dur, sy_dur_file, sy_out;
  synth->add_option("--checkpoint", sy_ckpt, "model checkpoint")->required();
  synth->add_option("--manifest", sy_manifest,
                    "manifest for id-based text and references");
  synth->add_option("--utt", sy_utt, "take the phoneme text from this record");
  synth->add_option("--phonemes", sy_phonemes,
                    "space-separated phoneme ids, e.g. '3 1 4 1 5'");
  synth->add_option("--acoustic-ref", sy_ac,
                    "acoustic reference utterance id");
  synth->add_option("--acoustic-ref-file", sy_ac_file,
                    "acoustic reference feature file");
  synth->add_option("--duration-ref", sy_dur,
                    "rhythm reference utterance id (separate mode only)");
  synth->add_option("--duration-ref-file", sy_dur_file,
                    "rhythm reference feature file (separate mode only)");
  synth->add_option("--out", sy_out, "output mel path (durations go to "
                                     "<out>.txt)")
      ->required();
  synth->callback([&] {
    exit_code = cmd_synth(sy_ckpt, sy_manifest, sy_utt, sy_phonemes, sy_ac,
                          sy_ac_file, sy_dur, sy_dur_file, sy_out);
  });

  // eval
  auto* eval = app.add_subcommand(
      "eval", "Objective evaluation on a held-out manifest");
  std::string ev_ckpt, ev_manifest, ev_condition, ev_out;
  std::uint64_t ev_seed = 1;
  int ev_threads = 1;
  eval->add_option("--checkpoint", ev_ckpt, "model checkpoint")->required();
  eval->add_option("--manifest", ev_manifest, "evaluation manifest")
      ->required();
  eval->add_option("--condition", ev_condition,
                   "parallel or nonparallel reference selection")
      ->required();
  eval->add_option("--seed", ev_seed, "reference-selection seed");
  eval->add_option("--out-dir", ev_out, "report directory")->required();
  eval->add_option("--threads", ev_threads, "worker threads");
  eval->callback([&] {
    exit_code = cmd_eval(ev_ckpt, ev_manifest, ev_condition, ev_seed, ev_out,
                         ev_threads);
  });

  // rhythm-eval
  auto* rhythm = app.add_subcommand(
      "rhythm-eval", "Rhythm-transfer speaking-rate analysis on two fresh "
                     "speakers");
  std::string rh_ckpt, rh_corpus, rh_out;
  std::uint64_t rh_seed = 1;
  int rh_texts = 20;
  double rh_rate_a = 0.7, rh_rate_b = 1.4;
  rhythm->add_option("--checkpoint", rh_ckpt, "separate-mode checkpoint")
      ->required();
  rhythm->add_option("--corpus-dir", rh_corpus,
                     "corpus directory (reads config.resolved)")
      ->required();
  rhythm->add_option("--out-dir", rh_out, "report directory")->required();
  rhythm->add_option("--seed", rh_seed, "evaluation seed");
  rhythm->add_option("--texts", rh_texts, "number of test texts");
  rhythm->add_option("--rate-a", rh_rate_a, "speaker A rate factor");
  rhythm->add_option("--rate-b", rh_rate_b, "speaker B rate factor");
  rhythm->callback([&] {
    exit_code = cmd_rhythm_eval(rh_ckpt, rh_corpus, rh_out, rh_seed, rh_texts,
                                rh_rate_a, rh_rate_b);
  });

  // export-weights
  auto* weights = app.add_subcommand(
      "export-weights", "Print and save the layer-weight matrix");
  std::string w_ckpt, w_out;
  weights->add_option("--checkpoint", w_ckpt, "model checkpoint")->required();
  weights->add_option("--out", w_out, "TSV output path");
  weights->callback(
      [&] { exit_code = cmd_export_weights(w_ckpt, w_out); });

  try {
    app.parse(argc, argv);
    return exit_code;
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  } catch (const TrainingDiverged& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
