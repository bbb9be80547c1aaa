#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "auscnmf/detection.hpp"
#include "auscnmf/nmf.hpp"
#include "auscnmf/spectral.hpp"

namespace auscnmf {

struct PipelineConfig {
  StftConfig stft;
  FactorizationConfig nmf;
  double gamma_prime = kDefaultGammaPrime;
  int threads = 1;
  std::string out_dir = ".";

  void validate() const;
  Parallelism parallelism() const { return {threads}; }
};

/// Sets one `key = value` entry; throws ConfigError for unknown keys or bad values.
void apply_setting(PipelineConfig& cfg, const std::string& key, const std::string& value);

/// Reads a flat key=value file ('#' starts a comment) on top of `base`.
PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base = {});

/// Every setting with its current value, in load_config syntax.
void print_config(const PipelineConfig& cfg, std::ostream& os);

struct StageTimes {
  double stft = 0.0;
  double svd = 0.0;
  double nmf = 0.0;
  double detect = 0.0;
  double total = 0.0;
};

/// Everything computed for one two-channel recording.
struct Analysis {
  Spectrogram internal;
  Spectrogram external;
  FactorizationResult factorization;
  DetectionResult detection;
  StageTimes times;
  std::size_t original_length = 0;
  std::size_t pad_front = 0;
  std::size_t padded_length = 0;
  int sample_rate = 0;
};

/// Zero-pads both channels by one window in front and at least one window at
/// the end, so every original sample is covered by a full set of frames.
AudioBuffer pad_for_analysis(const AudioBuffer& audio, const StftConfig& cfg);

/// STFT of both channels, SVD initialization, joint factorization, detection.
/// Channels must have equal length and sample rate.
Analysis analyze(const AudioBuffer& internal, const AudioBuffer& external, const PipelineConfig& cfg);

struct DenoisedPair {
  AudioBuffer source;  ///< biomedical estimate
  AudioBuffer noise;   ///< ambient estimate
  bool silent_reference = false;
};

/// Soft-mask reconstruction of both estimates from the internal channel. When
/// the external reference is identically zero no noise is attributed.
DenoisedPair denoise(const Analysis& analysis, const PipelineConfig& cfg);

}  // namespace auscnmf
