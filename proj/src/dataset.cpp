#include "auscnmf/dataset.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>

#include "auscnmf/wav.hpp"

namespace auscnmf {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kTargetRms = 0.1;

std::size_t sample_count(double duration_s, int sample_rate) {
  if (!(duration_s > 0.0) || sample_rate <= 0) {
    throw InvalidInput("duration and sample rate must be positive");
  }
  return static_cast<std::size_t>(std::llround(duration_s * sample_rate));
}

// splitmix64; decorrelates derived seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void normalize_rms(std::vector<double>& x, double target = kTargetRms) {
  const double p = mean_power(x);
  if (p <= 0.0) return;
  const double g = target / std::sqrt(p);
  for (auto& v : x) v *= g;
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// Smooth inhale/exhale swell: floor + (1 - floor) sin^2(pi t / period).
double breathing_envelope(double t, double period, double phase, double floor) {
  const double s = std::sin(std::numbers::pi * (t / period + phase));
  return floor + (1.0 - floor) * s * s;
}

struct OnePole {
  double a = 0.0;
  double state = 0.0;
  OnePole(double cutoff_hz, int sample_rate) : a(std::exp(-kTwoPi * cutoff_hz / sample_rate)) {}
  double lowpass(double x) { return state = (1.0 - a) * x + a * state; }
  double highpass(double x) { return x - lowpass(x); }
};

std::vector<double> gaussian_noise(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<double> x(n);
  for (auto& v : x) v = nd(rng);
  return x;
}

std::vector<double> siren(std::size_t n, int sr, std::mt19937_64& rng) {
  std::vector<double> x(n);
  const double offset = uniform(rng, 0.0, kSirenPeriodS);
  double phase = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sr + offset;
    const double frac = std::fmod(t, kSirenPeriodS) / kSirenPeriodS;
    const double f = kSirenLowHz + (kSirenHighHz - kSirenLowHz) * frac;
    phase = std::fmod(phase + kTwoPi * f / sr, kTwoPi);
    x[i] = std::sin(phase) + 0.3 * std::sin(2.0 * phase);
  }
  return x;
}

std::vector<double> babble(std::size_t n, int sr, std::mt19937_64& rng) {
  std::vector<double> x(n, 0.0);
  const double nyquist = 0.45 * sr;
  for (int talker = 0; talker < 4; ++talker) {
    std::size_t pos = static_cast<std::size_t>(uniform(rng, 0.0, 0.2) * sr);
    while (pos < n) {
      const auto len = static_cast<std::size_t>(uniform(rng, 0.08, 0.30) * sr);
      const double f0 = uniform(rng, 100.0, 240.0);
      const double f1 = uniform(rng, 300.0, 900.0);
      const double f2 = uniform(rng, 900.0, 2500.0);
      const int harmonics = static_cast<int>(std::min(3000.0, nyquist) / f0);
      std::vector<double> amp(static_cast<std::size_t>(harmonics) + 1, 0.0);
      for (int h = 1; h <= harmonics; ++h) {
        const double fh = h * f0;
        const double formant = std::exp(-0.5 * std::pow((fh - f1) / 150.0, 2)) +
                               0.6 * std::exp(-0.5 * std::pow((fh - f2) / 250.0, 2));
        amp[h] = (0.2 + formant) / h;
      }
      const double phase0 = uniform(rng, 0.0, kTwoPi);
      for (std::size_t i = 0; i < len && pos + i < n; ++i) {
        const double env = std::sin(std::numbers::pi * static_cast<double>(i) / len);
        const double base = kTwoPi * f0 * static_cast<double>(i) / sr + phase0;
        double s = 0.0;
        for (int h = 1; h <= harmonics; ++h) s += amp[h] * std::sin(h * base);
        x[pos + i] += env * s;
      }
      pos += len + static_cast<std::size_t>(uniform(rng, 0.02, 0.15) * sr);
    }
  }
  auto hiss = gaussian_noise(n, rng);
  for (std::size_t i = 0; i < n; ++i) x[i] += 0.02 * hiss[i];
  return x;
}

std::vector<double> tonal_interferer(std::size_t n, int sr, std::mt19937_64& rng) {
  std::vector<double> x(n);
  const double hum = uniform(rng, 50.0, 60.0) * 2.0;
  const double beep = uniform(rng, 800.0, 2000.0);
  const double cycle = uniform(rng, 0.4, 0.8);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sr;
    const bool on = std::fmod(t, cycle) < 0.5 * cycle;
    x[i] = 0.6 * std::sin(kTwoPi * hum * t) + 0.3 * std::sin(kTwoPi * 2.0 * hum * t) +
           (on ? std::sin(kTwoPi * beep * t) : 0.0);
  }
  return x;
}

std::vector<double> street_like(std::size_t n, int sr, std::mt19937_64& rng) {
  auto rumble = gaussian_noise(n, rng);
  auto hiss = gaussian_noise(n, rng);
  OnePole lp1(400.0, sr), lp2(400.0, sr);
  const double duration = static_cast<double>(n) / sr;
  std::vector<double> passes;
  for (double t = uniform(rng, 0.0, 3.0); t < duration + 3.0; t += uniform(rng, 2.0, 6.0)) {
    passes.push_back(t);
  }
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sr;
    double env = 0.3;
    for (double c : passes) env += std::exp(-0.5 * std::pow((t - c) / 0.8, 2));
    x[i] = env * lp2.lowpass(lp1.lowpass(rumble[i])) * 6.0 + 0.05 * hiss[i];
  }
  return x;
}

}  // namespace

std::string to_string(Label label) { return label == Label::Wheeze ? "wheeze" : "normal"; }

Label label_from_string(const std::string& name) {
  if (name == "wheeze" || name == "1") return Label::Wheeze;
  if (name == "normal" || name == "0") return Label::Normal;
  throw InvalidInput("unknown label '" + name + "'");
}

std::string to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::Siren:
      return "siren";
    case NoiseKind::Babble:
      return "babble";
    case NoiseKind::Broadband:
      return "broadband";
    case NoiseKind::TonalInterferer:
      return "tonal_interferer";
    case NoiseKind::StreetLike:
      return "street_like";
  }
  return "unknown";
}

NoiseKind noise_kind_from_string(const std::string& name) {
  for (auto k : all_noise_kinds()) {
    if (to_string(k) == name) return k;
  }
  throw InvalidInput("unknown noise kind '" + name + "'");
}

std::vector<NoiseKind> all_noise_kinds() {
  return {NoiseKind::Siren, NoiseKind::Babble, NoiseKind::Broadband, NoiseKind::TonalInterferer,
          NoiseKind::StreetLike};
}

void to_json(nlohmann::json& j, const MixtureInfo& info) {
  j = {{"label", to_string(info.label)},       {"target_snr_db", info.target_snr_db},
       {"achieved_snr_db", info.achieved_snr_db}, {"noise_gain", info.noise_gain},
       {"noise_kind", info.noise_kind},         {"seed", info.seed}};
}

void from_json(const nlohmann::json& j, MixtureInfo& info) {
  info.label = label_from_string(j.at("label").get<std::string>());
  info.target_snr_db = j.at("target_snr_db").get<double>();
  info.achieved_snr_db = j.value("achieved_snr_db", info.target_snr_db);
  info.noise_gain = j.value("noise_gain", 1.0);
  info.noise_kind = j.value("noise_kind", std::string{});
  info.seed = j.value("seed", std::uint64_t{0});
}

double mean_power(std::span<const double> samples) {
  if (samples.empty()) return 0.0;
  double acc = 0.0;
  for (double v : samples) acc += v * v;
  return acc / static_cast<double>(samples.size());
}

double snr_db(std::span<const double> signal, std::span<const double> noise) {
  return 10.0 * std::log10(mean_power(signal) / mean_power(noise));
}

TwoChannelRecording mix_at_snr(const MixtureSpec& spec) {
  const auto& s = spec.source.samples;
  const auto& v = spec.noise.samples;
  if (!std::isfinite(spec.target_snr_db)) throw InvalidInput("mix_at_snr: target SNR must be finite");
  if (spec.source.sample_rate != spec.noise.sample_rate) {
    throw InvalidInput("mix_at_snr: source and noise sample rates differ");
  }
  if (s.empty() || v.size() < s.size()) {
    throw InvalidInput("mix_at_snr: noise (" + std::to_string(v.size()) +
                       " samples) must be at least as long as the non-empty source (" +
                       std::to_string(s.size()) + ")");
  }
  const std::span<const double> v_trim(v.data(), s.size());
  const double ps = mean_power(s);
  const double pv = mean_power(v_trim);
  if (ps <= 0.0) throw InvalidInput("mix_at_snr: source has zero power");
  if (pv <= 0.0) throw InvalidInput("mix_at_snr: noise has zero power");

  const double g = std::sqrt(ps / (pv * std::pow(10.0, spec.target_snr_db / 10.0)));
  TwoChannelRecording out;
  out.internal.sample_rate = out.external.sample_rate = spec.source.sample_rate;
  out.internal.samples.resize(s.size());
  out.external.samples.resize(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    out.external.samples[i] = g * v[i];
    out.internal.samples[i] = s[i] + out.external.samples[i];
  }
  out.info.label = spec.label;
  out.info.target_snr_db = spec.target_snr_db;
  out.info.noise_gain = g;
  out.info.achieved_snr_db = snr_db(s, out.external.samples);
  return out;
}

AudioBuffer synth_wheeze(double duration_s, int sample_rate, double fundamental_hz,
                         std::uint64_t seed) {
  if (!(fundamental_hz >= 100.0 && fundamental_hz <= 2500.0)) {
    throw InvalidInput("synth_wheeze: fundamental " + std::to_string(fundamental_hz) +
                       " Hz outside [100, 2500]");
  }
  const std::size_t n = sample_count(duration_s, sample_rate);
  std::mt19937_64 rng(mix_seed(seed, 11));
  const double period = uniform(rng, 3.0, 4.0);
  const double env_phase = uniform(rng, 0.0, 1.0);
  const double drift_phase = uniform(rng, 0.0, kTwoPi);
  // 3% excursion at 0.25 Hz: peak drift rate 0.03 * 2 pi * 0.25 ~ 4.7% per second.
  constexpr double kDepth = 0.03;
  constexpr double kRate = 0.25;
  const double nyquist = 0.5 * sample_rate;

  AudioBuffer out;
  out.sample_rate = sample_rate;
  out.samples.resize(n);
  double phase = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sample_rate;
    const double f = fundamental_hz * (1.0 + kDepth * std::sin(kTwoPi * kRate * t + drift_phase));
    phase = std::fmod(phase + kTwoPi * f / sample_rate, kTwoPi);
    double s = std::sin(phase);
    if (2.0 * f < 0.95 * nyquist) s += 0.25 * std::sin(2.0 * phase);
    if (3.0 * f < 0.95 * nyquist) s += 0.10 * std::sin(3.0 * phase);
    out.samples[i] = breathing_envelope(t, period, env_phase, 0.2) * s;
  }
  normalize_rms(out.samples);
  return out;
}

AudioBuffer synth_breath(double duration_s, int sample_rate, std::uint64_t seed) {
  const std::size_t n = sample_count(duration_s, sample_rate);
  std::mt19937_64 rng(mix_seed(seed, 23));
  const double period = uniform(rng, 3.0, 4.5);
  const double env_phase = uniform(rng, 0.0, 1.0);
  auto noise = gaussian_noise(n, rng);
  OnePole hp(80.0, sample_rate);
  OnePole lp(1200.0, sample_rate);

  AudioBuffer out;
  out.sample_rate = sample_rate;
  out.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sample_rate;
    out.samples[i] = breathing_envelope(t, period, env_phase, 0.3) * lp.lowpass(hp.highpass(noise[i]));
  }
  normalize_rms(out.samples);
  return out;
}

AudioBuffer synth_ambient_noise(NoiseKind kind, double duration_s, int sample_rate,
                                std::uint64_t seed) {
  const std::size_t n = sample_count(duration_s, sample_rate);
  std::mt19937_64 rng(mix_seed(seed, 37 + static_cast<std::uint64_t>(kind)));
  AudioBuffer out;
  out.sample_rate = sample_rate;
  switch (kind) {
    case NoiseKind::Siren:
      out.samples = siren(n, sample_rate, rng);
      break;
    case NoiseKind::Babble:
      out.samples = babble(n, sample_rate, rng);
      break;
    case NoiseKind::Broadband:
      out.samples = gaussian_noise(n, rng);
      break;
    case NoiseKind::TonalInterferer:
      out.samples = tonal_interferer(n, sample_rate, rng);
      break;
    case NoiseKind::StreetLike:
      out.samples = street_like(n, sample_rate, rng);
      break;
    default:
      throw InvalidInput("synth_ambient_noise: unknown noise kind");
  }
  normalize_rms(out.samples);
  return out;
}

AudioBuffer synth_respiratory(Label label, double duration_s, int sample_rate, std::uint64_t seed) {
  AudioBuffer out = synth_breath(duration_s, sample_rate, seed);
  if (label == Label::Wheeze) {
    std::mt19937_64 rng(mix_seed(seed, 51));
    const double f0 = uniform(rng, 250.0, 1000.0);
    const AudioBuffer w = synth_wheeze(duration_s, sample_rate, f0, mix_seed(seed, 52));
    const double level = std::pow(10.0, kWheezeToBreathDb / 20.0);
    for (std::size_t i = 0; i < out.samples.size(); ++i) out.samples[i] += level * w.samples[i];
    normalize_rms(out.samples);
  }
  return out;
}

TwoChannelRecording generate_benchmark_audio(double duration_s, int sample_rate,
                                             std::uint64_t seed) {
  if (!(duration_s >= 60.0 && duration_s <= 900.0)) {
    throw InvalidInput("generate_benchmark_audio: duration " + std::to_string(duration_s) +
                       " s outside [60, 900]");
  }
  MixtureSpec spec;
  spec.label = Label::Wheeze;
  spec.target_snr_db = 0.0;
  spec.source = synth_respiratory(Label::Wheeze, duration_s, sample_rate, seed);
  spec.noise = synth_ambient_noise(NoiseKind::StreetLike, duration_s, sample_rate, mix_seed(seed, 77));
  auto rec = mix_at_snr(spec);
  rec.info.noise_kind = to_string(NoiseKind::StreetLike);
  rec.info.seed = seed;
  return rec;
}

std::vector<CorpusItem> generate_corpus(const CorpusConfig& cfg) {
  if (cfg.wheeze_items < 0 || cfg.normal_items < 0 || cfg.wheeze_items + cfg.normal_items == 0) {
    throw InvalidInput("generate_corpus: need at least one item");
  }
  const auto kinds = all_noise_kinds();
  std::vector<CorpusItem> items;
  auto add = [&](Label label, int count, const char* prefix) {
    for (int i = 0; i < count; ++i) {
      CorpusItem item;
      std::ostringstream id;
      id << prefix << std::setw(3) << std::setfill('0') << i;
      item.id = id.str();
      item.label = label;
      item.noise_kind = kinds[static_cast<std::size_t>(i) % kinds.size()];
      item.snr_db = cfg.snr_db;
      item.seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(items.size()));
      item.source = synth_respiratory(label, cfg.duration_s, cfg.sample_rate, item.seed);
      item.noise = synth_ambient_noise(item.noise_kind, cfg.duration_s, cfg.sample_rate,
                                       mix_seed(item.seed, 99));
      items.push_back(std::move(item));
    }
  };
  add(Label::Wheeze, cfg.wheeze_items, "w");
  add(Label::Normal, cfg.normal_items, "n");
  return items;
}

std::filesystem::path write_corpus(const std::vector<CorpusItem>& items,
                                   const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest = nlohmann::json::array();
  for (const auto& item : items) {
    const std::string src = item.id + "_source.wav";
    const std::string noise = item.id + "_noise.wav";
    save_wav(item.source, dir / src, SampleFormat::Float32);
    save_wav(item.noise, dir / noise, SampleFormat::Float32);
    manifest.push_back({{"id", item.id},
                        {"paths", {{"source", src}, {"noise", noise}}},
                        {"label", to_string(item.label)},
                        {"snr_db", item.snr_db},
                        {"noise_kind", to_string(item.noise_kind)},
                        {"seed", item.seed}});
  }
  const auto path = dir / "manifest.json";
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << manifest.dump(2) << '\n';
  return path;
}

std::vector<CorpusItem> load_manifest(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw IoError("cannot open manifest '" + manifest.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("manifest '" + manifest.string() + "': " + e.what());
  }
  if (!j.is_array()) throw FormatError("manifest '" + manifest.string() + "' is not a JSON array");
  const auto base = manifest.parent_path();
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
  };
  std::vector<CorpusItem> items;
  for (const auto& e : j) {
    try {
      CorpusItem item;
      item.id = e.value("id", "item" + std::to_string(items.size()));
      item.source = load_wav(resolve(e.at("paths").at("source").get<std::string>()));
      item.noise = load_wav(resolve(e.at("paths").at("noise").get<std::string>()));
      item.label = label_from_string(e.at("label").get<std::string>());
      item.snr_db = e.value("snr_db", 0.0);
      item.noise_kind = noise_kind_from_string(e.value("noise_kind", std::string("broadband")));
      item.seed = e.value("seed", std::uint64_t{0});
      items.push_back(std::move(item));
    } catch (const nlohmann::json::exception& ex) {
      throw FormatError("manifest '" + manifest.string() + "' entry " +
                        std::to_string(items.size()) + ": " + ex.what());
    }
  }
  return items;
}

}  // namespace auscnmf
