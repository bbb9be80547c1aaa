#include "auscnmf/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numbers>

#include <fftw3.h>

namespace auscnmf {

namespace {

// FFTW's planner is not thread-safe; execution with the new-array interface is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

constexpr Eigen::Index kFramesPerChunk = 256;

}  // namespace

std::string to_string(WindowKind kind) {
  switch (kind) {
    case WindowKind::Hann:
      return "hann";
    case WindowKind::Hamming:
      return "hamming";
    case WindowKind::Rectangular:
      return "rectangular";
  }
  return "unknown";
}

WindowKind window_from_string(const std::string& name) {
  if (name == "hann") return WindowKind::Hann;
  if (name == "hamming") return WindowKind::Hamming;
  if (name == "rectangular" || name == "rect") return WindowKind::Rectangular;
  throw ConfigError("unknown window '" + name + "'");
}

std::vector<double> make_window(WindowKind kind, int length) {
  std::vector<double> w(static_cast<std::size_t>(length), 1.0);
  const double step = 2.0 * std::numbers::pi / length;
  for (int n = 0; n < length; ++n) {
    switch (kind) {
      case WindowKind::Hann:
        w[n] = 0.5 - 0.5 * std::cos(step * n);
        break;
      case WindowKind::Hamming:
        w[n] = 0.54 - 0.46 * std::cos(step * n);
        break;
      case WindowKind::Rectangular:
        break;
    }
  }
  return w;
}

void StftConfig::validate() const {
  if (hop_length <= 0 || window_length < hop_length || fft_length < window_length) {
    throw ConfigError("STFT config requires 0 < hop_length <= window_length <= fft_length (got hop " +
                      std::to_string(hop_length) + ", window " + std::to_string(window_length) +
                      ", fft " + std::to_string(fft_length) + ")");
  }
  // Steady-state WOLA normalizer: sum over k of w^2(n + k*hop), one hop period.
  const auto w = make_window(window, window_length);
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (int n = 0; n < hop_length; ++n) {
    double acc = 0.0;
    for (int m = n; m < window_length; m += hop_length) acc += w[m] * w[m];
    lo = std::min(lo, acc);
    hi = std::max(hi, acc);
  }
  if (!(lo > 0.0) || (hi - lo) > 1e-10 * hi) {
    throw ConfigError("window '" + to_string(window) + "' with length " +
                      std::to_string(window_length) + " and hop " + std::to_string(hop_length) +
                      " does not satisfy the constant-overlap-add condition");
  }
}

int StftConfig::num_frames(std::size_t samples) const noexcept {
  if (samples < static_cast<std::size_t>(window_length)) return 0;
  return static_cast<int>((samples - window_length) / hop_length) + 1;
}

struct StftEngine::Plans {
  fftw_plan r2c = nullptr;
  fftw_plan c2r = nullptr;

  ~Plans() {
    std::lock_guard lock(planner_mutex());
    if (r2c) fftw_destroy_plan(r2c);
    if (c2r) fftw_destroy_plan(c2r);
  }
};

StftEngine::StftEngine(StftConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  window_ = make_window(cfg_.window, cfg_.window_length);
  plans_ = std::make_unique<Plans>();

  const int n = cfg_.fft_length;
  std::vector<double> real(static_cast<std::size_t>(n));
  std::vector<std::complex<double>> spec(static_cast<std::size_t>(cfg_.num_bins()));
  auto* cplx = reinterpret_cast<fftw_complex*>(spec.data());
  std::lock_guard lock(planner_mutex());
  plans_->r2c = fftw_plan_dft_r2c_1d(n, real.data(), cplx, FFTW_ESTIMATE | FFTW_UNALIGNED);
  plans_->c2r = fftw_plan_dft_c2r_1d(n, cplx, real.data(),
                                     FFTW_ESTIMATE | FFTW_UNALIGNED | FFTW_DESTROY_INPUT);
  if (!plans_->r2c || !plans_->c2r) throw ConfigError("FFT planning failed");
}

StftEngine::~StftEngine() = default;
StftEngine::StftEngine(StftEngine&&) noexcept = default;
StftEngine& StftEngine::operator=(StftEngine&&) noexcept = default;

Spectrogram StftEngine::forward(const AudioBuffer& audio, Parallelism par) const {
  if (audio.samples.size() < static_cast<std::size_t>(cfg_.window_length)) {
    throw InvalidInput("audio has " + std::to_string(audio.samples.size()) +
                       " samples, shorter than one analysis window (" +
                       std::to_string(cfg_.window_length) + ")");
  }
  const int bins = cfg_.num_bins();
  const int frames = cfg_.num_frames(audio.samples.size());
  Spectrogram out;
  out.frames.resize(bins, frames);
  out.magnitude.resize(bins, frames);

  for_each_block(frames, 64, par, [&](std::ptrdiff_t begin, std::ptrdiff_t end, std::ptrdiff_t) {
    std::vector<double> buf(static_cast<std::size_t>(cfg_.fft_length), 0.0);
    for (std::ptrdiff_t t = begin; t < end; ++t) {
      const double* x = audio.samples.data() + t * cfg_.hop_length;
      for (int n = 0; n < cfg_.window_length; ++n) buf[n] = x[n] * window_[n];
      std::fill(buf.begin() + cfg_.window_length, buf.end(), 0.0);
      auto* col = reinterpret_cast<fftw_complex*>(out.frames.col(t).data());
      fftw_execute_dft_r2c(plans_->r2c, buf.data(), col);
      out.magnitude.col(t) = out.frames.col(t).cwiseAbs();
    }
  });
  return out;
}

AudioBuffer StftEngine::inverse(const ComplexMatrix& frames, std::size_t out_len, int sample_rate,
                                Parallelism par) const {
  if (frames.rows() != cfg_.num_bins()) {
    throw InvalidInput("spectrogram has " + std::to_string(frames.rows()) + " bins, config expects " +
                       std::to_string(cfg_.num_bins()));
  }
  const Eigen::Index count = frames.cols();
  const std::size_t covered =
      count == 0 ? 0 : static_cast<std::size_t>((count - 1) * cfg_.hop_length + cfg_.window_length);
  if (covered > out_len + static_cast<std::size_t>(cfg_.window_length)) {
    throw InvalidInput("spectrogram with " + std::to_string(count) +
                       " frames does not fit an output of " + std::to_string(out_len) + " samples");
  }

  AudioBuffer out;
  out.sample_rate = sample_rate;
  out.samples.assign(out_len, 0.0);
  std::vector<double> norm(out_len, 0.0);
  const double scale = 1.0 / cfg_.fft_length;
  const auto n_fft = static_cast<std::size_t>(cfg_.fft_length);

  // Inverse FFTs run in parallel per chunk; the overlap-add is a sequential pass
  // so the summation order never depends on the thread count.
  std::vector<double> chunk;
  for (Eigen::Index first = 0; first < count; first += kFramesPerChunk) {
    const Eigen::Index n_chunk = std::min(kFramesPerChunk, count - first);
    chunk.assign(static_cast<std::size_t>(n_chunk) * n_fft, 0.0);
    for_each_block(n_chunk, 16, par, [&](std::ptrdiff_t begin, std::ptrdiff_t end, std::ptrdiff_t) {
      std::vector<std::complex<double>> tmp(static_cast<std::size_t>(cfg_.num_bins()));
      for (std::ptrdiff_t i = begin; i < end; ++i) {
        const auto col = frames.col(first + i);
        std::copy(col.data(), col.data() + col.size(), tmp.begin());
        fftw_execute_dft_c2r(plans_->c2r, reinterpret_cast<fftw_complex*>(tmp.data()),
                             chunk.data() + i * n_fft);
      }
    });
    for (Eigen::Index i = 0; i < n_chunk; ++i) {
      const std::size_t offset = static_cast<std::size_t>(first + i) * cfg_.hop_length;
      const double* frame = chunk.data() + i * n_fft;
      const std::size_t stop = std::min<std::size_t>(cfg_.window_length, out_len > offset ? out_len - offset : 0);
      for (std::size_t n = 0; n < stop; ++n) {
        out.samples[offset + n] += frame[n] * scale * window_[n];
        norm[offset + n] += window_[n] * window_[n];
      }
    }
  }

  double peak = 0.0;
  for (double v : norm) peak = std::max(peak, v);
  const double cutoff = 1e-10 * peak;
  for (std::size_t n = 0; n < out_len; ++n) {
    out.samples[n] = norm[n] > cutoff ? out.samples[n] / norm[n] : 0.0;
  }
  return out;
}

Spectrogram compute_stft(const AudioBuffer& audio, const StftConfig& cfg, Parallelism par) {
  return StftEngine(cfg).forward(audio, par);
}

AudioBuffer inverse_stft(const Spectrogram& spec, const StftConfig& cfg, std::size_t out_len,
                         int sample_rate, Parallelism par) {
  return StftEngine(cfg).inverse(spec.frames, out_len, sample_rate, par);
}

MaskPair wiener_masks(const Matrix& source_model, const Matrix& noise_model) {
  if (source_model.rows() != noise_model.rows() || source_model.cols() != noise_model.cols()) {
    throw InvalidInput("wiener_masks: source model is " + std::to_string(source_model.rows()) + "x" +
                       std::to_string(source_model.cols()) + ", noise model is " +
                       std::to_string(noise_model.rows()) + "x" + std::to_string(noise_model.cols()));
  }
  if ((source_model.array() < 0.0).any() || (noise_model.array() < 0.0).any()) {
    throw InvalidInput("wiener_masks: models must be non-negative");
  }
  MaskPair masks;
  masks.source.resize(source_model.rows(), source_model.cols());
  masks.noise.resize(source_model.rows(), source_model.cols());
  for (Eigen::Index j = 0; j < source_model.cols(); ++j) {
    for (Eigen::Index i = 0; i < source_model.rows(); ++i) {
      const double s2 = source_model(i, j) * source_model(i, j);
      const double v2 = noise_model(i, j) * noise_model(i, j);
      const double den = s2 + v2;
      if (den < 1e-30) {
        masks.source(i, j) = 0.5;
        masks.noise(i, j) = 0.5;
      } else {
        masks.source(i, j) = s2 / den;
        masks.noise(i, j) = 1.0 - masks.source(i, j);
      }
    }
  }
  return masks;
}

AudioBuffer apply_mask_and_synthesize(const Spectrogram& mix, const Matrix& mask,
                                      const StftConfig& cfg, std::size_t out_len, int sample_rate,
                                      Parallelism par) {
  if (mask.rows() != mix.frames.rows() || mask.cols() != mix.frames.cols()) {
    throw InvalidInput("mask shape " + std::to_string(mask.rows()) + "x" + std::to_string(mask.cols()) +
                       " does not match spectrogram " + std::to_string(mix.frames.rows()) + "x" +
                       std::to_string(mix.frames.cols()));
  }
  const ComplexMatrix masked = mix.frames.array() * mask.array().cast<std::complex<double>>();
  return StftEngine(cfg).inverse(masked, out_len, sample_rate, par);
}

}  // namespace auscnmf
