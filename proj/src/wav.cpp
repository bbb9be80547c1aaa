#include "auscnmf/wav.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

namespace auscnmf {

namespace {

static_assert(std::endian::native == std::endian::little, "WAV I/O assumes a little-endian host");

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

struct Decoded {
  int channels = 0;
  int sample_rate = 0;
  std::vector<std::vector<double>> data;
};

template <typename T>
T read_le(const std::uint8_t* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

std::string chunk_name(const std::uint8_t* p) {
  std::string s(reinterpret_cast<const char*>(p), 4);
  for (auto& c : s) {
    if (c < 32 || c > 126) c = '?';
  }
  return s;
}

Decoded decode(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string where = "'" + path.string() + "'";
  if (bytes.size() < 12) throw IoError(where + " is truncated (no RIFF header)");
  if (chunk_name(bytes.data()) != "RIFF" || chunk_name(bytes.data() + 8) != "WAVE") {
    throw FormatError(where + " is not a RIFF/WAVE file (chunk '" + chunk_name(bytes.data()) + "')");
  }

  std::uint16_t format = 0;
  std::uint16_t bits = 0;
  Decoded out;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::string id = chunk_name(bytes.data() + pos);
    const std::uint32_t size = read_le<std::uint32_t>(bytes.data() + pos + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) {
      throw IoError(where + " is truncated inside chunk '" + id + "'");
    }
    if (id == "fmt ") {
      if (size < 16) throw FormatError(where + ": chunk 'fmt ' is too short");
      format = read_le<std::uint16_t>(bytes.data() + body);
      out.channels = read_le<std::uint16_t>(bytes.data() + body + 2);
      out.sample_rate = static_cast<int>(read_le<std::uint32_t>(bytes.data() + body + 4));
      bits = read_le<std::uint16_t>(bytes.data() + body + 14);
      if (format == kFormatExtensible) {
        if (size < 40) throw FormatError(where + ": chunk 'fmt ' extensible header is too short");
        format = read_le<std::uint16_t>(bytes.data() + body + 24);
      }
      const bool pcm16 = format == kFormatPcm && bits == 16;
      const bool f32 = format == kFormatFloat && bits == 32;
      if (!pcm16 && !f32) {
        throw FormatError(where + ": chunk 'fmt ' declares unsupported encoding (format tag " +
                          std::to_string(format) + ", " + std::to_string(bits) +
                          " bits); expected PCM 16-bit or float 32-bit");
      }
      if (out.channels < 1 || out.sample_rate <= 0) {
        throw FormatError(where + ": chunk 'fmt ' has invalid channel count or sample rate");
      }
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw FormatError(where + ": chunk 'data' precedes chunk 'fmt '");
      const std::size_t width = bits / 8;
      const std::size_t frames = size / (width * out.channels);
      out.data.assign(out.channels, std::vector<double>(frames));
      const std::uint8_t* p = bytes.data() + body;
      for (std::size_t i = 0; i < frames; ++i) {
        for (int c = 0; c < out.channels; ++c, p += width) {
          out.data[c][i] = format == kFormatPcm ? read_le<std::int16_t>(p) / 32768.0
                                                : static_cast<double>(read_le<float>(p));
        }
      }
      return out;
    }
    pos = body + size + (size & 1u);
  }
  if (!have_fmt) throw FormatError(where + ": missing chunk 'fmt '");
  throw FormatError(where + ": missing chunk 'data'");
}

void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u16(std::vector<std::uint8_t>& b, std::uint16_t v) {
  b.push_back(static_cast<std::uint8_t>(v));
  b.push_back(static_cast<std::uint8_t>(v >> 8));
}
void put_id(std::vector<std::uint8_t>& b, const char* id) { b.insert(b.end(), id, id + 4); }

void encode(const std::vector<const AudioBuffer*>& channels, const std::filesystem::path& path,
            SampleFormat format) {
  const std::size_t frames = channels.front()->samples.size();
  const int rate = channels.front()->sample_rate;
  for (const auto* c : channels) {
    if (c->samples.size() != frames || c->sample_rate != rate) {
      throw InvalidInput("save_wav: channels differ in length or sample rate");
    }
  }
  if (rate <= 0) throw InvalidInput("save_wav: sample_rate must be positive");
  const std::uint16_t n_ch = static_cast<std::uint16_t>(channels.size());
  const std::uint16_t bits = format == SampleFormat::Pcm16 ? 16 : 32;
  const std::uint32_t block = n_ch * bits / 8;
  const std::uint32_t data_size = static_cast<std::uint32_t>(frames * block);

  std::vector<std::uint8_t> b;
  b.reserve(44 + data_size);
  put_id(b, "RIFF");
  put_u32(b, 36 + data_size);
  put_id(b, "WAVE");
  put_id(b, "fmt ");
  put_u32(b, 16);
  put_u16(b, format == SampleFormat::Pcm16 ? kFormatPcm : kFormatFloat);
  put_u16(b, n_ch);
  put_u32(b, static_cast<std::uint32_t>(rate));
  put_u32(b, static_cast<std::uint32_t>(rate) * block);
  put_u16(b, static_cast<std::uint16_t>(block));
  put_u16(b, bits);
  put_id(b, "data");
  put_u32(b, data_size);
  for (std::size_t i = 0; i < frames; ++i) {
    for (const auto* c : channels) {
      const double x = c->samples[i];
      if (format == SampleFormat::Pcm16) {
        const double q = std::clamp(std::round(x * 32768.0), -32768.0, 32767.0);
        put_u16(b, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
      } else {
        put_u32(b, std::bit_cast<std::uint32_t>(static_cast<float>(x)));
      }
    }
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

}  // namespace

AudioBuffer load_wav(const std::filesystem::path& path) {
  Decoded d = decode(path);
  if (d.channels != 1) {
    throw FormatError("'" + path.string() + "' has " + std::to_string(d.channels) +
                      " channels; expected mono (use the two-channel loader for stereo)");
  }
  return {std::move(d.data[0]), d.sample_rate};
}

ChannelPair load_two_channel(const std::filesystem::path& path) {
  Decoded d = decode(path);
  if (d.channels != 2) {
    throw FormatError("'" + path.string() + "' has " + std::to_string(d.channels) +
                      " channels; expected 2 (internal, external)");
  }
  return {{std::move(d.data[0]), d.sample_rate}, {std::move(d.data[1]), d.sample_rate}};
}

void save_wav(const AudioBuffer& buf, const std::filesystem::path& path, SampleFormat format) {
  encode({&buf}, path, format);
}

void save_two_channel(const AudioBuffer& internal, const AudioBuffer& external,
                      const std::filesystem::path& path, SampleFormat format) {
  encode({&internal, &external}, path, format);
}

}  // namespace auscnmf
