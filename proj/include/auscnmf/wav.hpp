#pragma once

#include <filesystem>

#include "auscnmf/spectral.hpp"

namespace auscnmf {

enum class SampleFormat { Pcm16, Float32 };

/// Reads a mono RIFF/WAVE file (PCM 16-bit or IEEE float 32-bit).
/// PCM samples are scaled by 1/32768.
AudioBuffer load_wav(const std::filesystem::path& path);

struct ChannelPair {
  AudioBuffer internal;  ///< channel 0
  AudioBuffer external;  ///< channel 1
};

/// Reads a two-channel WAV file; channel 0 is the internal (stethoscope) signal.
ChannelPair load_two_channel(const std::filesystem::path& path);

/// PCM16 writes round(x * 32768) clamped to the int16 range.
void save_wav(const AudioBuffer& buf, const std::filesystem::path& path,
              SampleFormat format = SampleFormat::Float32);

void save_two_channel(const AudioBuffer& internal, const AudioBuffer& external,
                      const std::filesystem::path& path, SampleFormat format = SampleFormat::Float32);

}  // namespace auscnmf
