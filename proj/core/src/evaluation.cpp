#include "cadence/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include "cadence/training.hpp"
#include "cadence/util.hpp"
#include "json.hpp"

namespace cadence {

namespace {

std::string fmt_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open " + path + " for writing");
  return os;
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) /
         static_cast<double>(v.size());
}

double stddev_of(const std::vector<double>& v, double mean) {
  double s = 0;
  for (double x : v) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(v.size()));
}

std::string describe(const SystemMeta& meta) {
  return mode_name(meta.model.mode) + "-" +
         aggregator_name(meta.model.embedding.aggregator) + "-seed" +
         std::to_string(meta.train_seed);
}

}  // namespace

double mel_mae(const MelSpectrogram& a, const MelSpectrogram& b) {
  if (a.frames != b.frames || a.bins != b.bins) {
    throw ProtocolError("mel_mae: comparing a " + std::to_string(a.frames) +
                        "x" + std::to_string(a.bins) + " mel against " +
                        std::to_string(b.frames) + "x" +
                        std::to_string(b.bins));
  }
  if (a.data.empty()) throw ProtocolError("mel_mae: empty input");
  double s = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    s += std::abs(static_cast<double>(a.data[i]) -
                  static_cast<double>(b.data[i]));
  }
  return s / static_cast<double>(a.data.size());
}

double duration_rmse_ms(const std::vector<int>& pred_frames,
                        const std::vector<int>& target_frames,
                        double hop_seconds) {
  if (pred_frames.size() != target_frames.size()) {
    throw ConfigError("duration_rmse_ms: length mismatch");
  }
  if (pred_frames.empty()) throw ConfigError("duration_rmse_ms: empty input");
  if (hop_seconds <= 0) throw ConfigError("duration_rmse_ms: bad hop");
  double s = 0;
  for (std::size_t i = 0; i < pred_frames.size(); ++i) {
    const double d =
        (pred_frames[i] - target_frames[i]) * hop_seconds * 1000.0;
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(pred_frames.size()));
}

double speaking_rate(const std::vector<int>& durations_frames,
                     double hop_seconds) {
  if (durations_frames.empty()) {
    throw ConfigError("speaking_rate: empty durations");
  }
  if (hop_seconds <= 0) throw ConfigError("speaking_rate: bad hop");
  long total = 0;
  for (int d : durations_frames) {
    if (d < 0) throw ConfigError("speaking_rate: negative duration");
    total += d;
  }
  if (total == 0) throw ConfigError("speaking_rate: zero total duration");
  return static_cast<double>(durations_frames.size()) /
         (static_cast<double>(total) * hop_seconds);
}

EvalCondition parse_condition(const std::string& s) {
  if (s == "parallel") return EvalCondition::parallel;
  if (s == "nonparallel" || s == "non-parallel") {
    return EvalCondition::nonparallel;
  }
  throw ConfigError("unknown condition '" + s +
                    "' (want parallel or nonparallel)");
}

std::string condition_name(EvalCondition c) {
  return c == EvalCondition::parallel ? "parallel" : "nonparallel";
}

EvalReport run_objective_eval(const LoadedSystem& system,
                              const Manifest& manifest,
                              EvalCondition condition, std::uint64_t seed,
                              int threads) {
  const SystemMeta& meta = system.meta;
  std::unordered_set<std::string> train_set(meta.train_speakers.begin(),
                                            meta.train_speakers.end());
  for (const auto& spk : manifest.speaker_order()) {
    if (train_set.count(spk)) {
      throw ProtocolError("speaker " + spk +
                          " was seen in training; the zero-shot protocol "
                          "requires unseen speakers");
    }
  }

  PseudoSslExtractor extractor(meta.extractor);
  Dataset data(manifest, extractor, meta.model.inventory, meta.model.mel_bins,
               meta.model.hop_seconds, threads);
  const std::size_t n = data.items().size();
  if (n == 0) throw DataError("evaluation manifest has no records");

  std::unordered_map<std::string, std::vector<std::size_t>> by_spk;
  for (std::size_t i = 0; i < n; ++i) {
    by_spk[data.items()[i].record.speaker_id].push_back(i);
  }
  const std::vector<std::string> spk_order = manifest.speaker_order();
  std::unordered_map<std::string, std::size_t> ref_of;
  if (condition == EvalCondition::nonparallel) {
    for (std::size_t s = 0; s < spk_order.size(); ++s) {
      const auto& idxs = by_spk[spk_order[s]];
      Rng rng(substream(seed, "npref", s));
      ref_of[spk_order[s]] =
          idxs[rng.uniform_int(0, static_cast<int>(idxs.size()) - 1)];
    }
  }

  const double hop = meta.model.hop_seconds;
  std::vector<UtteranceEval> rows(n);
  std::vector<double> sq_sums(n, 0.0);
  parallel_for(n, threads, [&](std::size_t i) {
    const TrainItem& it = data.items()[i];
    const std::size_t ref_idx = condition == EvalCondition::parallel
                                    ? i
                                    : ref_of.at(it.record.speaker_id);
    const TrainItem& ref = data.items()[ref_idx];
    SynthesisResult r = system.model->synthesize(
        it.phonemes, ref.raw_stack, nullptr, &it.record.durations);

    MelSpectrogram target;
    target.frames = it.mel.dim(0);
    target.bins = it.mel.dim(1);
    target.hop_seconds = hop;
    target.data.assign(it.mel.data(), it.mel.data() + it.mel.numel());

    UtteranceEval ue;
    ue.utt_id = it.record.utt_id;
    ue.speaker_id = it.record.speaker_id;
    ue.ref_utt_id = ref.record.utt_id;
    ue.mel_mae = mel_mae(r.mel, target);
    ue.dur_rmse_ms =
        duration_rmse_ms(r.predicted_durations, it.record.durations, hop);
    ue.rate_target = speaking_rate(it.record.durations, hop);
    long pred_total = 0;
    for (int d : r.predicted_durations) pred_total += d;
    ue.rate_predicted =
        pred_total > 0 ? speaking_rate(r.predicted_durations, hop) : 0.0;
    ue.phoneme_count = it.phonemes.length();
    rows[i] = std::move(ue);

    double ss = 0;
    for (std::size_t p = 0; p < it.record.durations.size(); ++p) {
      const double d = (r.predicted_durations[p] - it.record.durations[p]) *
                       hop * 1000.0;
      ss += d * d;
    }
    sq_sums[i] = ss;
  });

  EvalReport report;
  report.condition = condition_name(condition);
  report.seed = seed;
  report.model_id = describe(meta);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return rows[a].utt_id < rows[b].utt_id;
  });

  double mel_sum = 0, sq_total = 0, rate_t = 0, rate_p = 0;
  long phoneme_total = 0;
  for (std::size_t i : order) {
    mel_sum += rows[i].mel_mae;
    sq_total += sq_sums[i];
    phoneme_total += rows[i].phoneme_count;
    rate_t += rows[i].rate_target;
    rate_p += rows[i].rate_predicted;
    report.utterances.push_back(rows[i]);
  }
  report.mel_mae_mean = mel_sum / static_cast<double>(n);
  report.duration_rmse_ms =
      std::sqrt(sq_total / static_cast<double>(phoneme_total));
  report.rate_target_mean = rate_t / static_cast<double>(n);
  report.rate_predicted_mean = rate_p / static_cast<double>(n);
  return report;
}

void save_eval_tsv(const EvalReport& report, const std::string& path) {
  std::ofstream os = open_out(path);
  os << "utt_id\tspeaker\tref_utt\tmel_mae\tdur_rmse_ms\trate_target\t"
        "rate_predicted\tphonemes\n";
  for (const auto& u : report.utterances) {
    os << u.utt_id << '\t' << u.speaker_id << '\t' << u.ref_utt_id << '\t'
       << fmt_g(u.mel_mae) << '\t' << fmt_g(u.dur_rmse_ms) << '\t'
       << fmt_g(u.rate_target) << '\t' << fmt_g(u.rate_predicted) << '\t'
       << u.phoneme_count << '\n';
  }
  if (!os) throw DataError("failed writing " + path);
}

void save_eval_json(const EvalReport& report, const std::string& path) {
  nlohmann::ordered_json j;
  j["condition"] = report.condition;
  j["seed"] = report.seed;
  j["model"] = report.model_id;
  j["aggregate"] = {{"mel_mae", report.mel_mae_mean},
                    {"duration_rmse_ms", report.duration_rmse_ms},
                    {"rate_target_mean", report.rate_target_mean},
                    {"rate_predicted_mean", report.rate_predicted_mean}};
  j["utterances"] = nlohmann::ordered_json::array();
  for (const auto& u : report.utterances) {
    j["utterances"].push_back({{"utt_id", u.utt_id},
                               {"speaker", u.speaker_id},
                               {"ref_utt", u.ref_utt_id},
                               {"mel_mae", u.mel_mae},
                               {"dur_rmse_ms", u.dur_rmse_ms},
                               {"rate_target", u.rate_target},
                               {"rate_predicted", u.rate_predicted},
                               {"phonemes", u.phoneme_count}});
  }
  std::ofstream os = open_out(path);
  os << j.dump(2) << '\n';
  if (!os) throw DataError("failed writing " + path);
}

RhythmReport run_rhythm_transfer_eval(const LoadedSystem& system,
                                      const CorpusGenerator& generator,
                                      double rate_a, double rate_b,
                                      int n_texts, std::uint64_t seed) {
  const SystemMeta& meta = system.meta;
  if (meta.model.mode != ConditioningMode::separate) {
    throw ProtocolError("rhythm transfer needs a separate-mode checkpoint");
  }
  if (n_texts < 1) throw ConfigError("rhythm eval needs at least one text");
  if (rate_a <= 0 || rate_b <= 0) {
    throw ConfigError("rate factors must be positive");
  }
  const CorpusConfig& ccfg = generator.config();
  if (ccfg.inventory != meta.model.inventory) {
    throw ProtocolError("corpus inventory does not match the checkpoint");
  }
  if (std::abs(ccfg.hop_seconds - meta.model.hop_seconds) > 1e-9) {
    throw ProtocolError("corpus hop does not match the checkpoint");
  }

  PseudoSslExtractor extractor(meta.extractor);
  const SpeakerProfile a =
      generator.forced_rate_profile("rhythm_a", "rhythm_eval/a", seed, rate_a);
  const SpeakerProfile b =
      generator.forced_rate_profile("rhythm_b", "rhythm_eval/b", seed, rate_b);
  const auto ref_a = generator.render_utterance(a, "rhythm_eval/a/ref", seed);
  const auto ref_b = generator.render_utterance(b, "rhythm_eval/b/ref", seed);
  const RepresentationStack stack_a = extractor.extract(ref_a.wav);
  const RepresentationStack stack_b = extractor.extract(ref_b.wav);
  const double hop = ccfg.hop_seconds;

  RhythmReport rep;
  rep.seed = seed;
  rep.n_texts = n_texts;
  rep.model_id = describe(meta);
  rep.speaker_a.id = a.id;
  rep.speaker_a.rate_factor = rate_a;
  rep.speaker_b.id = b.id;
  rep.speaker_b.rate_factor = rate_b;
  rep.a_acoustic_b_duration.acoustic_id = a.id;
  rep.a_acoustic_b_duration.duration_id = b.id;
  rep.b_acoustic_a_duration.acoustic_id = b.id;
  rep.b_acoustic_a_duration.duration_id = a.id;

  for (int t = 0; t < n_texts; ++t) {
    const std::uint64_t sidx =
        seed * 1000003ull + static_cast<std::uint64_t>(t);
    Rng text_rng(substream(ccfg.seed, "rhythm_eval/text", sidx));
    PhonemeSequence text = generator.sample_text(text_rng);
    Rng dur_rng_a(substream(ccfg.seed, "rhythm_eval/dur_a", sidx));
    Rng dur_rng_b(substream(ccfg.seed, "rhythm_eval/dur_b", sidx));
    const auto dur_a = generator.sample_durations(a, text, dur_rng_a);
    const auto dur_b = generator.sample_durations(b, text, dur_rng_b);
    rep.speaker_a.rates.push_back(speaking_rate(dur_a, hop));
    rep.speaker_b.rates.push_back(speaking_rate(dur_b, hop));

    const auto gen_ab = system.model->synthesize(text, stack_a, &stack_b);
    const auto gen_ba = system.model->synthesize(text, stack_b, &stack_a);
    rep.a_acoustic_b_duration.rates.push_back(
        speaking_rate(gen_ab.used_durations, hop));
    rep.b_acoustic_a_duration.rates.push_back(
        speaking_rate(gen_ba.used_durations, hop));
  }

  auto finalize_speaker = [](SpeakerRateRow& row) {
    row.mean = mean_of(row.rates);
    row.stddev = stddev_of(row.rates, row.mean);
  };
  finalize_speaker(rep.speaker_a);
  finalize_speaker(rep.speaker_b);

  auto finalize_transfer = [&](TransferRow& row, double dur_mean,
                               double ac_mean) {
    row.mean = mean_of(row.rates);
    row.stddev = stddev_of(row.rates, row.mean);
    row.closer_to_duration = 0;
    for (double r : row.rates) {
      if (std::abs(r - dur_mean) < std::abs(r - ac_mean)) {
        ++row.closer_to_duration;
      }
    }
  };
  finalize_transfer(rep.a_acoustic_b_duration, rep.speaker_b.mean,
                    rep.speaker_a.mean);
  finalize_transfer(rep.b_acoustic_a_duration, rep.speaker_a.mean,
                    rep.speaker_b.mean);
  return rep;
}

void save_rhythm_tsv(const RhythmReport& report, const std::string& path) {
  std::ofstream os = open_out(path);
  os << "row\tacoustic_ref\tduration_ref\tmean_rate\tstd_rate\t"
        "closer_to_duration\n";
  auto speaker_row = [&](const char* label, const SpeakerRateRow& r) {
    os << label << '\t' << r.id << '\t' << r.id << '\t' << fmt_g(r.mean)
       << '\t' << fmt_g(r.stddev) << "\t-\n";
  };
  auto transfer_row = [&](const char* label, const TransferRow& r,
                          int n_texts) {
    os << label << '\t' << r.acoustic_id << '\t' << r.duration_id << '\t'
       << fmt_g(r.mean) << '\t' << fmt_g(r.stddev) << '\t'
       << r.closer_to_duration << '/' << n_texts << '\n';
  };
  speaker_row("original_a", report.speaker_a);
  speaker_row("original_b", report.speaker_b);
  transfer_row("transfer_a_acoustic_b_duration",
               report.a_acoustic_b_duration, report.n_texts);
  transfer_row("transfer_b_acoustic_a_duration",
               report.b_acoustic_a_duration, report.n_texts);
  if (!os) throw DataError("failed writing " + path);
}

void save_rhythm_json(const RhythmReport& report, const std::string& path) {
  nlohmann::ordered_json j;
  j["seed"] = report.seed;
  j["n_texts"] = report.n_texts;
  j["model"] = report.model_id;
  auto speaker_json = [](const SpeakerRateRow& r) {
    return nlohmann::ordered_json{{"id", r.id},
                                  {"rate_factor", r.rate_factor},
                                  {"mean_rate", r.mean},
                                  {"std_rate", r.stddev},
                                  {"rates", r.rates}};
  };
  auto transfer_json = [](const TransferRow& r) {
    return nlohmann::ordered_json{{"acoustic_ref", r.acoustic_id},
                                  {"duration_ref", r.duration_id},
                                  {"mean_rate", r.mean},
                                  {"std_rate", r.stddev},
                                  {"closer_to_duration", r.closer_to_duration},
                                  {"rates", r.rates}};
  };
  j["speaker_a"] = speaker_json(report.speaker_a);
  j["speaker_b"] = speaker_json(report.speaker_b);
  j["transfer_a_acoustic_b_duration"] =
      transfer_json(report.a_acoustic_b_duration);
  j["transfer_b_acoustic_a_duration"] =
      transfer_json(report.b_acoustic_a_duration);
  std::ofstream os = open_out(path);
  os << j.dump(2) << '\n';
  if (!os) throw DataError("failed writing " + path);
}

LayerWeightTable export_layer_weights(const LoadedSystem& system) {
  const AcousticModel<float>& model = *system.model;
  LayerWeightTable table;
  if (system.meta.model.mode == ConditioningMode::separate) {
    table.roles = {"acoustic", "duration"};
    table.weights.push_back(model.acoustic_module().layer_weights());
    table.weights.push_back(model.duration_module().layer_weights());
  } else {
    table.roles = {"shared"};
    table.weights.push_back(model.acoustic_module().layer_weights());
  }
  table.layers = static_cast<int>(table.weights[0].size());
  return table;
}

void save_layer_weights_tsv(const LayerWeightTable& table,
                            const std::string& path) {
  std::ofstream os = open_out(path);
  os << "role";
  for (int l = 0; l < table.layers; ++l) os << "\tlayer" << l;
  os << '\n';
  for (std::size_t r = 0; r < table.roles.size(); ++r) {
    os << table.roles[r];
    for (int l = 0; l < table.layers; ++l) {
      os << '\t' << fmt_g(static_cast<double>(table.weights[r][l]));
    }
    os << '\n';
  }
  if (!os) throw DataError("failed writing " + path);
}

}  // namespace cadence
