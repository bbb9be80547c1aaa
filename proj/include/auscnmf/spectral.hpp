#pragma once

#include <memory>
#include <string>
#include <vector>

#include "auscnmf/parallel.hpp"
#include "auscnmf/types.hpp"

namespace auscnmf {

/// Mono audio. Samples are nominally in [-1, 1]; sample_rate is metadata only.
struct AudioBuffer {
  std::vector<double> samples;
  int sample_rate = 8000;

  std::size_t size() const noexcept { return samples.size(); }
  double duration_s() const noexcept {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

enum class WindowKind { Hann, Hamming, Rectangular };

std::string to_string(WindowKind kind);
WindowKind window_from_string(const std::string& name);

struct StftConfig {
  int window_length = 1024;
  int hop_length = 256;
  int fft_length = 1024;
  WindowKind window = WindowKind::Hann;

  /// Throws ConfigError unless 0 < hop <= window <= fft and the squared
  /// window overlap-adds to a constant at this hop.
  void validate() const;

  int num_bins() const noexcept { return fft_length / 2 + 1; }
  int num_frames(std::size_t samples) const noexcept;
};

/// Periodic analysis window of the configured kind and length.
std::vector<double> make_window(WindowKind kind, int length);

struct Spectrogram {
  ComplexMatrix frames;  ///< F x T STFT coefficients
  Matrix magnitude;      ///< F x T, |frames|

  Eigen::Index num_bins() const noexcept { return frames.rows(); }
  Eigen::Index num_frames() const noexcept { return frames.cols(); }
};

/// Source/noise soft masks; they sum to one elementwise.
struct MaskPair {
  Matrix source;
  Matrix noise;
};

/// Forward/inverse STFT bound to one validated configuration.
///
/// Construction validates the config and builds the FFT plans; afterwards the
/// object is immutable and its transforms may be called from any thread.
class StftEngine {
 public:
  explicit StftEngine(StftConfig cfg);
  ~StftEngine();
  StftEngine(StftEngine&&) noexcept;
  StftEngine& operator=(StftEngine&&) noexcept;
  StftEngine(const StftEngine&) = delete;
  StftEngine& operator=(const StftEngine&) = delete;

  const StftConfig& config() const noexcept { return cfg_; }

  Spectrogram forward(const AudioBuffer& audio, Parallelism par = {}) const;

  /// Weighted overlap-add synthesis normalized by the summed squared window.
  AudioBuffer inverse(const ComplexMatrix& frames, std::size_t out_len, int sample_rate,
                      Parallelism par = {}) const;

 private:
  struct Plans;
  StftConfig cfg_;
  std::vector<double> window_;
  std::unique_ptr<Plans> plans_;
};

Spectrogram compute_stft(const AudioBuffer& audio, const StftConfig& cfg, Parallelism par = {});

AudioBuffer inverse_stft(const Spectrogram& spec, const StftConfig& cfg, std::size_t out_len,
                         int sample_rate, Parallelism par = {});

/// Wiener-style masks from non-negative source and noise models of equal shape.
/// Where source^2 + noise^2 < 1e-30 both masks are 0.5.
MaskPair wiener_masks(const Matrix& source_model, const Matrix& noise_model);

/// Multiplies the mixture STFT by `mask` (mixture phase kept) and synthesizes.
AudioBuffer apply_mask_and_synthesize(const Spectrogram& mix, const Matrix& mask,
                                      const StftConfig& cfg, std::size_t out_len,
                                      int sample_rate, Parallelism par = {});

}  // namespace auscnmf
