#include "cadence/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "cadence/errors.hpp"
#include "cadence/util.hpp"

namespace fs = std::filesystem;

namespace cadence {

void CorpusConfig::validate() const {
  if (speakers < 1 || utterances_per_speaker < 1 || inventory < 1) {
    throw ConfigError("corpus needs positive speakers, utterances, inventory");
  }
  if (min_phonemes < 1 || max_phonemes < min_phonemes) {
    throw ConfigError("corpus phoneme length range is invalid");
  }
  if (mel_bins < 1 || sample_rate < 1 || hop_seconds <= 0) {
    throw ConfigError("corpus mel/waveform dimensions are invalid");
  }
  if (dur_base_min < 1 || dur_base_max < dur_base_min) {
    throw ConfigError("corpus duration base range is invalid");
  }
  if (rate_min <= 0 || rate_max < rate_min) {
    throw ConfigError("corpus rate range is invalid");
  }
  if (jitter < 0 || mel_noise < 0 || utt_timbre < 0) {
    throw ConfigError("corpus noise scales must be nonnegative");
  }
}

std::vector<std::string> Manifest::speaker_order() const {
  std::vector<std::string> order;
  for (const auto& r : records) {
    if (std::find(order.begin(), order.end(), r.speaker_id) == order.end()) {
      order.push_back(r.speaker_id);
    }
  }
  return order;
}

std::string resolve_path(const Manifest& m, const std::string& rel) {
  if (rel.empty()) return rel;
  fs::path p(rel);
  if (p.is_absolute()) return rel;
  return (fs::path(m.root) / p).string();
}

namespace {

std::string join_ints(const std::vector<int>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i > 0) os << ' ';
    os << v[i];
  }
  return os.str();
}

std::vector<int> parse_ints(const std::string& s, const std::string& what) {
  std::vector<int> out;
  std::istringstream is(s);
  std::string token;
  while (is >> token) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(token, &used));
      if (used != token.size()) throw std::invalid_argument(token);
    } catch (const std::exception&) {
      throw DataError(what + ": bad integer token '" + token + "'");
    }
  }
  return out;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return fields;
}

}  // namespace

void save_manifest(const Manifest& m, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot open for write: " + path);
  os << "# utt_id\tspeaker_id\tphonemes\tdurations\tmel\twav\tfeat\n";
  for (const auto& r : m.records) {
    os << r.utt_id << '\t' << r.speaker_id << '\t' << join_ints(r.phonemes)
       << '\t' << join_ints(r.durations) << '\t' << r.mel_path << '\t'
       << r.wav_path << '\t' << (r.feat_path.empty() ? "-" : r.feat_path)
       << '\n';
  }
  if (!os) throw DataError("short write: " + path);
}

Manifest load_manifest(const std::string& path, int inventory) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open manifest: " + path);
  Manifest m;
  m.root = fs::path(path).parent_path().string();
  if (m.root.empty()) m.root = ".";

  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    auto fields = split_tabs(line);
    if (fields.size() != 7) {
      throw DataError("manifest " + path + " line " + std::to_string(line_no) +
                      ": expected 7 tab-separated fields, got " +
                      std::to_string(fields.size()));
    }
    UtteranceRecord r;
    r.utt_id = fields[0];
    r.speaker_id = fields[1];
    r.phonemes = parse_ints(fields[2], "record " + r.utt_id);
    r.durations = parse_ints(fields[3], "record " + r.utt_id);
    r.mel_path = fields[4];
    r.wav_path = fields[5];
    r.feat_path = fields[6] == "-" ? "" : fields[6];

    if (r.phonemes.empty() || r.phonemes.size() != r.durations.size()) {
      throw DataError("record " + r.utt_id +
                      ": phoneme and duration counts disagree");
    }
    long total = 0;
    for (int p : r.phonemes) {
      if (p < 0 || p >= inventory) {
        throw DataError("record " + r.utt_id + ": phoneme id " +
                        std::to_string(p) + " outside inventory " +
                        std::to_string(inventory));
      }
    }
    for (int d : r.durations) {
      if (d < 0) throw DataError("record " + r.utt_id + ": negative duration");
      total += d;
    }
    if (total < 1) {
      throw DataError("record " + r.utt_id + ": durations sum to zero");
    }

    const std::string mel_abs = resolve_path(m, r.mel_path);
    const std::string wav_abs = resolve_path(m, r.wav_path);
    if (!fs::exists(mel_abs)) {
      throw DataError("record " + r.utt_id + ": missing mel file " + mel_abs);
    }
    if (!fs::exists(wav_abs)) {
      throw DataError("record " + r.utt_id + ": missing wav file " + wav_abs);
    }
    if (!r.feat_path.empty() && !fs::exists(resolve_path(m, r.feat_path))) {
      throw DataError("record " + r.utt_id + ": missing feature file " +
                      resolve_path(m, r.feat_path));
    }
    int mel_frames = 0;
    try {
      mel_frames = peek_feature_frames(mel_abs);
    } catch (const DataError& e) {
      throw DataError("record " + r.utt_id + ": " + e.what());
    }
    if (mel_frames != static_cast<int>(total)) {
      throw DataError("record " + r.utt_id + ": mel has " +
                      std::to_string(mel_frames) + " frames but durations sum to " +
                      std::to_string(total));
    }
    m.records.push_back(std::move(r));
  }
  if (m.records.empty()) {
    std::cerr << "warning: manifest " << path << " has no records\n";
  }
  return m;
}

SplitManifests split(const Manifest& m, double train_ratio, double val_ratio,
                     double test_ratio, std::uint64_t seed) {
  const double sum = train_ratio + val_ratio + test_ratio;
  if (std::abs(sum - 1.0) > 1e-6) {
    throw ConfigError("split ratios must sum to 1 (got " +
                      std::to_string(sum) + ")");
  }
  if (train_ratio <= 0 || val_ratio <= 0 || test_ratio <= 0) {
    throw ConfigError("split ratios must all be positive");
  }
  std::vector<std::string> speakers = m.speaker_order();
  const int n = static_cast<int>(speakers.size());
  const int n_val = static_cast<int>(std::floor(n * val_ratio));
  const int n_test = static_cast<int>(std::floor(n * test_ratio));
  const int n_train = n - n_val - n_test;
  if (n_train < 1 || n_val < 1 || n_test < 1) {
    throw ConfigError("too few speakers (" + std::to_string(n) +
                      ") for a three-way split at these ratios");
  }

  Rng rng(substream(seed, "split", 0));
  for (int i = n - 1; i > 0; --i) {
    const int j = rng.uniform_int(0, i);
    std::swap(speakers[static_cast<std::size_t>(i)],
              speakers[static_cast<std::size_t>(j)]);
  }

  SplitManifests out;
  out.train.root = out.val.root = out.test.root = m.root;
  auto group_of = [&](const std::string& spk) -> Manifest& {
    for (int i = 0; i < n; ++i) {
      if (speakers[static_cast<std::size_t>(i)] == spk) {
        if (i < n_train) return out.train;
        if (i < n_train + n_val) return out.val;
        return out.test;
      }
    }
    throw DataError("split: unknown speaker " + spk);
  };
  for (const auto& r : m.records) group_of(r.speaker_id).records.push_back(r);
  return out;
}

CorpusGenerator::CorpusGenerator(const CorpusConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const int c = cfg_.inventory;
  const int mbins = cfg_.mel_bins;
  class_template_.resize(static_cast<std::size_t>(c) * mbins);
  class_dur_mean_.resize(c);
  for (int k = 0; k < c; ++k) {
    Rng rng(substream(cfg_.seed, "class", static_cast<std::uint64_t>(k)));
    // one spectral bump per class over a low floor, plus per-bin texture
    const double center = rng.uniform(0.0, mbins - 1.0);
    const double width = rng.uniform(2.0, 6.0);
    const double height = rng.uniform(0.8, 1.8);
    for (int b = 0; b < mbins; ++b) {
      const double d = (b - center) / width;
      class_template_[static_cast<std::size_t>(k) * mbins + b] =
          static_cast<float>(-1.0 + height * std::exp(-0.5 * d * d) +
                             rng.uniform(-0.15, 0.15));
    }
    class_dur_mean_[k] =
        std::log(rng.uniform(cfg_.dur_base_min, cfg_.dur_base_max));
  }
}

namespace {

// smooth per-speaker spectral deviation: a linear slope and three cosines
std::vector<float> speaker_tilt(int mel_bins, float slope, const double* coef) {
  std::vector<float> tilt(mel_bins);
  for (int b = 0; b < mel_bins; ++b) {
    const double x = mel_bins > 1 ? static_cast<double>(b) / (mel_bins - 1) : 0.0;
    double v = slope * (x - 0.5);
    for (int j = 0; j < 3; ++j) {
      v += coef[j] * std::cos(3.14159265358979323846 * (j + 1) * x);
    }
    tilt[b] = static_cast<float>(v);
  }
  return tilt;
}

}  // namespace

SpeakerProfile CorpusGenerator::forced_rate_profile(
    const std::string& id, const std::string& stream_label,
    std::uint64_t stream_index, double rate) const {
  if (rate <= 0) throw ConfigError("speaker rate must be positive");
  SpeakerProfile spk;
  spk.id = id;
  spk.rate = rate;
  spk.jitter = cfg_.jitter;

  Rng timbre(substream(cfg_.seed, stream_label + "/timbre", stream_index));
  spk.tilt_slope = static_cast<float>(timbre.uniform(-0.8, 0.8));
  double coef[3];
  for (double& cc : coef) cc = timbre.uniform(-0.3, 0.3);
  const double gain = timbre.uniform(-0.4, 0.4);
  spk.f0 = timbre.uniform(90.0, 280.0);

  const int mbins = cfg_.mel_bins;
  std::vector<float> tilt = speaker_tilt(mbins, spk.tilt_slope, coef);
  spk.class_gain.resize(class_template_.size());
  for (int k = 0; k < cfg_.inventory; ++k) {
    for (int b = 0; b < mbins; ++b) {
      const std::size_t i = static_cast<std::size_t>(k) * mbins + b;
      spk.class_gain[i] =
          class_template_[i] + tilt[static_cast<std::size_t>(b)] +
          static_cast<float>(gain);
    }
  }

  spk.log_dur_mean.resize(cfg_.inventory);
  for (int k = 0; k < cfg_.inventory; ++k) {
    spk.log_dur_mean[static_cast<std::size_t>(k)] =
        class_dur_mean_[static_cast<std::size_t>(k)] + std::log(rate);
  }
  return spk;
}

SpeakerProfile CorpusGenerator::speaker_profile(int index) const {
  if (index < 0 || index >= cfg_.speakers) {
    throw ConfigError("speaker index out of range");
  }
  char buf[16];
  std::snprintf(buf, sizeof(buf), "spk%04d", index);
  // rhythm comes from its own substream so rate is independent of timbre
  Rng rhythm(substream(cfg_.seed, "speaker/rhythm",
                       static_cast<std::uint64_t>(index)));
  const double rate = rhythm.uniform(cfg_.rate_min, cfg_.rate_max);
  return forced_rate_profile(buf, "speaker",
                             static_cast<std::uint64_t>(index), rate);
}

PhonemeSequence CorpusGenerator::sample_text(Rng& rng) const {
  PhonemeSequence text;
  text.inventory = cfg_.inventory;
  const int p = rng.uniform_int(cfg_.min_phonemes, cfg_.max_phonemes);
  text.ids.resize(p);
  for (int i = 0; i < p; ++i) {
    text.ids[static_cast<std::size_t>(i)] =
        rng.uniform_int(0, cfg_.inventory - 1);
  }
  return text;
}

std::vector<int> CorpusGenerator::sample_durations(const SpeakerProfile& spk,
                                                   const PhonemeSequence& text,
                                                   Rng& rng) const {
  std::vector<int> durations(text.ids.size());
  long total = 0;
  for (std::size_t i = 0; i < text.ids.size(); ++i) {
    const double mu = spk.log_dur_mean[static_cast<std::size_t>(text.ids[i])];
    const long d = std::lround(std::exp(rng.normal(mu, spk.jitter)));
    durations[i] = d > 0 ? static_cast<int>(d) : 0;
    total += durations[i];
  }
  if (total < 1) durations[0] = 1;  // unreachable at sane configs
  return durations;
}

MelSpectrogram CorpusGenerator::render_mel(const SpeakerProfile& spk,
                                           const PhonemeSequence& text,
                                           const std::vector<int>& durations,
                                           Rng& rng) const {
  const int mbins = cfg_.mel_bins;
  MelSpectrogram mel;
  mel.bins = mbins;
  mel.hop_seconds = cfg_.hop_seconds;
  mel.frames = 0;
  for (int d : durations) mel.frames += d;
  mel.data.resize(static_cast<std::size_t>(mel.frames) * mbins);
  std::size_t row = 0;
  for (std::size_t p = 0; p < text.ids.size(); ++p) {
    const float* gain =
        spk.class_gain.data() +
        static_cast<std::size_t>(text.ids[p]) * mbins;
    for (int rep = 0; rep < durations[p]; ++rep) {
      for (int b = 0; b < mbins; ++b) {
        mel.data[row * mbins + b] =
            gain[b] + static_cast<float>(cfg_.mel_noise * rng.normal());
      }
      ++row;
    }
  }
  return mel;
}

Waveform CorpusGenerator::render_wav(const SpeakerProfile& spk,
                                     const PhonemeSequence& text,
                                     const std::vector<int>& durations,
                                     Rng& rng) const {
  constexpr int kHarmonics = 4;
  const int samples_per_frame =
      static_cast<int>(std::lround(cfg_.hop_seconds * cfg_.sample_rate));
  Waveform wav;
  wav.sample_rate = cfg_.sample_rate;
  long total_frames = 0;
  for (int d : durations) total_frames += d;
  wav.samples.resize(static_cast<std::size_t>(total_frames) *
                     samples_per_frame);

  std::size_t pos = 0;
  for (std::size_t p = 0; p < text.ids.size(); ++p) {
    const int n = durations[p] * samples_per_frame;
    if (n == 0) continue;
    const float* gain =
        spk.class_gain.data() + static_cast<std::size_t>(text.ids[p]) * cfg_.mel_bins;
    // harmonic amplitudes sampled from the class timbre curve
    double amp[kHarmonics];
    double amp_sum = 0;
    double phase[kHarmonics];
    for (int h = 0; h < kHarmonics; ++h) {
      const int bin = (h + 1) * cfg_.mel_bins / (kHarmonics + 1);
      amp[h] = std::exp(0.5 * gain[bin]);
      amp_sum += amp[h];
      phase[h] = rng.uniform(0.0, 6.283185307179586);
    }
    for (int i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / cfg_.sample_rate;
      double v = 0;
      for (int h = 0; h < kHarmonics; ++h) {
        v += amp[h] * std::sin(6.283185307179586 * (h + 1) * spk.f0 * t +
                               phase[h]);
      }
      v = 0.7 * v / amp_sum + 0.01 * rng.normal();
      wav.samples[pos + static_cast<std::size_t>(i)] =
          static_cast<float>(std::clamp(v, -1.0, 1.0));
    }
    pos += static_cast<std::size_t>(n);
  }
  return wav;
}

CorpusGenerator::Rendered CorpusGenerator::render_utterance(
    const SpeakerProfile& spk, const std::string& stream_label,
    std::uint64_t stream_index) const {
  Rng rng(substream(cfg_.seed, stream_label, stream_index));
  Rendered r;
  r.text = sample_text(rng);
  r.durations = sample_durations(spk, r.text, rng);
  r.mel = render_mel(spk, r.text, r.durations, rng);
  r.wav = render_wav(spk, r.text, r.durations, rng);
  return r;
}

Manifest CorpusGenerator::generate(const std::string& out_dir,
                                   int threads) const {
  fs::create_directories(fs::path(out_dir) / "mel");
  fs::create_directories(fs::path(out_dir) / "wav");

  const int per = cfg_.utterances_per_speaker;
  const std::size_t total =
      static_cast<std::size_t>(cfg_.speakers) * per;

  std::vector<SpeakerProfile> profiles(cfg_.speakers);
  parallel_for(cfg_.speakers, threads, [&](std::size_t s) {
    profiles[s] = speaker_profile(static_cast<int>(s));
  });

  Manifest manifest;
  manifest.root = out_dir;
  manifest.records.resize(total);

  parallel_for(total, threads, [&](std::size_t i) {
    const int s = static_cast<int>(i) / per;
    const int u = static_cast<int>(i) % per;
    const SpeakerProfile& spk = profiles[static_cast<std::size_t>(s)];
    Rendered r = render_utterance(
        spk, "utt", static_cast<std::uint64_t>(s) * 1000003u + u);

    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s_u%03d", spk.id.c_str(), u);
    UtteranceRecord rec;
    rec.utt_id = buf;
    rec.speaker_id = spk.id;
    rec.phonemes = r.text.ids;
    rec.durations = r.durations;
    rec.mel_path = std::string("mel/") + buf + ".mel";
    rec.wav_path = std::string("wav/") + buf + ".wav";
    save_mel_file(r.mel, resolve_path(manifest, rec.mel_path));
    save_wav(r.wav, resolve_path(manifest, rec.wav_path));
    manifest.records[i] = std::move(rec);
  });

  save_manifest(manifest, (fs::path(out_dir) / "corpus.tsv").string());

  std::ofstream spk_os((fs::path(out_dir) / "speakers.tsv").string(),
                       std::ios::trunc);
  spk_os << "# speaker_id\trate\ttilt_slope\tf0\tjitter\n";
  char num[64];
  for (const auto& spk : profiles) {
    std::snprintf(num, sizeof(num), "%.6f\t%.6f\t%.3f\t%.4f", spk.rate,
                  static_cast<double>(spk.tilt_slope), spk.f0, spk.jitter);
    spk_os << spk.id << '\t' << num << '\n';
  }
  if (!spk_os) throw DataError("short write: speakers.tsv");
  return manifest;
}

}  // namespace cadence
