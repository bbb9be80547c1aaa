#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "auscnmf/spectral.hpp"

namespace auscnmf {

enum class Label { Normal = 0, Wheeze = 1 };

std::string to_string(Label label);
Label label_from_string(const std::string& name);

/// Synthetic stand-ins for the ambient noise classes met around an auscultation.
enum class NoiseKind { Siren, Babble, Broadband, TonalInterferer, StreetLike };

std::string to_string(NoiseKind kind);
NoiseKind noise_kind_from_string(const std::string& name);
std::vector<NoiseKind> all_noise_kinds();

inline constexpr int kDefaultSampleRate = 8000;

struct MixtureSpec {
  AudioBuffer source;  ///< respiratory sound s(n)
  AudioBuffer noise;   ///< ambient noise v(n), at least as long as source
  double target_snr_db = 0.0;
  Label label = Label::Normal;
};

struct MixtureInfo {
  Label label = Label::Normal;
  double target_snr_db = 0.0;
  double achieved_snr_db = 0.0;
  double noise_gain = 1.0;
  std::string noise_kind;
  std::uint64_t seed = 0;
};

void to_json(nlohmann::json& j, const MixtureInfo& info);
void from_json(const nlohmann::json& j, MixtureInfo& info);

/// internal = s + g v, external = g v.
struct TwoChannelRecording {
  AudioBuffer internal;
  AudioBuffer external;
  MixtureInfo info;
};

/// Mean of squared samples.
double mean_power(std::span<const double> samples);

/// 10 log10(P_signal / P_noise).
double snr_db(std::span<const double> signal, std::span<const double> noise);

/// Scales the noise (trimmed to the source length) so that
/// 10 log10(P_s / (g^2 P_v)) equals the target SNR.
TwoChannelRecording mix_at_snr(const MixtureSpec& spec);

/// Tonal wheeze: drifting fundamental with two weak harmonics under a breathing envelope.
/// 100 <= fundamental_hz <= 2500.
AudioBuffer synth_wheeze(double duration_s, int sample_rate, double fundamental_hz,
                         std::uint64_t seed);

/// Normal breath: band-shaped Gaussian noise under a breathing envelope.
AudioBuffer synth_breath(double duration_s, int sample_rate, std::uint64_t seed);

AudioBuffer synth_ambient_noise(NoiseKind kind, double duration_s, int sample_rate,
                                std::uint64_t seed);

/// Level of the wheeze relative to the breath it rides on, in dB RMS.
inline constexpr double kWheezeToBreathDb = 12.0;

/// Breath, plus a wheeze at a seed-chosen fundamental when label is Wheeze.
AudioBuffer synth_respiratory(Label label, double duration_s, int sample_rate, std::uint64_t seed);

/// Cycle period of the siren proxy's upward sweep.
inline constexpr double kSirenPeriodS = 2.0;
inline constexpr double kSirenLowHz = 600.0;
inline constexpr double kSirenHighHz = 1400.0;

/// Long labelled recording (60..900 s) for timing runs, mixed at 0 dB.
TwoChannelRecording generate_benchmark_audio(double duration_s, int sample_rate,
                                             std::uint64_t seed);

struct CorpusItem {
  std::string id;
  AudioBuffer source;
  AudioBuffer noise;
  Label label = Label::Normal;
  NoiseKind noise_kind = NoiseKind::Broadband;
  double snr_db = 0.0;
  std::uint64_t seed = 0;
};

struct CorpusConfig {
  int wheeze_items = 20;
  int normal_items = 20;
  double duration_s = 6.0;
  int sample_rate = kDefaultSampleRate;
  double snr_db = 0.0;
  std::uint64_t seed = 1;
};

/// Noise kinds are assigned round-robin within each class, so every kind sees
/// both labels.
std::vector<CorpusItem> generate_corpus(const CorpusConfig& cfg);

/// Writes <id>_source.wav / <id>_noise.wav (float32) and manifest.json into dir.
/// Returns the manifest path.
std::filesystem::path write_corpus(const std::vector<CorpusItem>& items,
                                   const std::filesystem::path& dir);

/// JSON array of {id, paths: {source, noise}, label, snr_db, noise_kind, seed};
/// relative paths resolve against the manifest's directory.
std::vector<CorpusItem> load_manifest(const std::filesystem::path& manifest);

}  // namespace auscnmf
