#include "emoseq/wav.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>

#include "emoseq/error.hpp"
#include "emoseq/kernels.hpp"
#include "io_util.hpp"

namespace emoseq {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t u16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

std::uint32_t u32(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
         (static_cast<std::uint32_t>(b[at + 2]) << 16) |
         (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

bool tag_is(std::span<const std::uint8_t> b, std::size_t at, std::string_view tag) {
  return std::memcmp(b.data() + at, tag.data(), 4) == 0;
}

double decode_sample(const std::uint8_t* p, std::uint16_t format, std::uint16_t bits) {
  if (format == kFormatFloat) {
    std::uint32_t raw = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                        (static_cast<std::uint32_t>(p[2]) << 16) |
                        (static_cast<std::uint32_t>(p[3]) << 24);
    return static_cast<double>(std::bit_cast<float>(raw));
  }
  switch (bits) {
    case 8:
      return (static_cast<int>(p[0]) - 128) / 128.0;
    case 16: {
      auto v = static_cast<std::int16_t>(p[0] | (p[1] << 8));
      return v / 32768.0;
    }
    case 24: {
      std::int32_t v = p[0] | (p[1] << 8) | (p[2] << 16);
      if (v & 0x800000) v -= 0x1000000;
      return v / 8388608.0;
    }
    case 32: {
      auto v = static_cast<std::int32_t>(static_cast<std::uint32_t>(p[0]) |
                                         (static_cast<std::uint32_t>(p[1]) << 8) |
                                         (static_cast<std::uint32_t>(p[2]) << 16) |
                                         (static_cast<std::uint32_t>(p[3]) << 24));
      return v / 2147483648.0;
    }
    default:
      throw Error(ErrorKind::Format, "unsupported PCM bit depth " + std::to_string(bits));
  }
}

}  // namespace

WaveForm parse_wav(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || !tag_is(bytes, 0, "RIFF") || !tag_is(bytes, 8, "WAVE")) {
    throw Error(ErrorKind::Format, "missing RIFF/WAVE header");
  }

  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  std::span<const std::uint8_t> data;
  bool have_data = false;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint32_t size = u32(bytes, pos + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) {
      // Truncated data chunks are common in the wild; take what is there.
      if (tag_is(bytes, pos, "data")) {
        data = bytes.subspan(body);
        have_data = true;
        break;
      }
      throw Error(ErrorKind::Format, "chunk extends past end of file");
    }
    if (tag_is(bytes, pos, "fmt ")) {
      if (size < 16) throw Error(ErrorKind::Format, "fmt chunk too small");
      format = u16(bytes, body);
      channels = u16(bytes, body + 2);
      rate = u32(bytes, body + 4);
      bits = u16(bytes, body + 14);
      if (format == kFormatExtensible) {
        if (size < 40) throw Error(ErrorKind::Format, "extensible fmt chunk too small");
        // First two bytes of the sub-format GUID carry the real format tag.
        format = u16(bytes, body + 24);
      }
      have_fmt = true;
    } else if (tag_is(bytes, pos, "data")) {
      data = bytes.subspan(body, size);
      have_data = true;
    }
    pos = body + size + (size & 1u);
  }

  if (!have_fmt) throw Error(ErrorKind::Format, "missing fmt chunk");
  if (!have_data) throw Error(ErrorKind::Format, "missing data chunk");
  if (format != kFormatPcm && format != kFormatFloat) {
    throw Error(ErrorKind::UnsupportedCodec, "format tag " + std::to_string(format));
  }
  if (format == kFormatFloat && bits != 32) {
    throw Error(ErrorKind::UnsupportedCodec, "float samples must be 32-bit");
  }
  if (format == kFormatPcm && bits != 8 && bits != 16 && bits != 24 && bits != 32) {
    throw Error(ErrorKind::Format, "unsupported PCM bit depth " + std::to_string(bits));
  }
  if (channels == 0) throw Error(ErrorKind::Format, "zero channels");
  if (rate == 0) throw Error(ErrorKind::Format, "zero sample rate");

  const std::size_t sample_bytes = bits / 8;
  const std::size_t frame_bytes = sample_bytes * channels;
  const std::size_t frames = data.size() / frame_bytes;

  WaveForm wave;
  wave.sample_rate = rate;
  wave.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    double sum = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      sum += decode_sample(data.data() + i * frame_bytes + c * sample_bytes, format, bits);
    }
    const double v = sum / channels;
    if (!std::isfinite(v)) throw Error(ErrorKind::Format, "non-finite sample");
    wave.samples[i] = v;
  }
  return wave;
}

WaveForm read_wav(const std::filesystem::path& path) {
  return parse_wav(detail::read_file(path));
}

std::vector<std::uint8_t> encode_wav16(const WaveForm& wave) {
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(wave.samples.size() * 2);
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  auto put = [&out](std::string_view s) { out.insert(out.end(), s.begin(), s.end()); };
  auto put16 = [&out](std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
  };
  auto put32 = [&](std::uint32_t v) {
    put16(static_cast<std::uint16_t>(v & 0xFFFF));
    put16(static_cast<std::uint16_t>(v >> 16));
  };
  put("RIFF");
  put32(36 + data_bytes);
  put("WAVE");
  put("fmt ");
  put32(16);
  put16(kFormatPcm);
  put16(1);
  put32(wave.sample_rate);
  put32(wave.sample_rate * 2);
  put16(2);
  put16(16);
  put("data");
  put32(data_bytes);
  for (double s : wave.samples) {
    const double clipped = std::clamp(s, -1.0, 1.0);
    const auto q = static_cast<std::int16_t>(std::clamp(std::lround(clipped * 32767.0), -32768L, 32767L));
    put16(static_cast<std::uint16_t>(q));
  }
  return out;
}

void write_wav(const std::filesystem::path& path, const WaveForm& wave) {
  detail::write_file_atomic(path, encode_wav16(wave));
}

WaveForm resample(const WaveForm& wave, std::uint32_t target_rate) {
  if (target_rate == 0) throw Error(ErrorKind::Validation, "target sample rate must be positive");
  if (wave.sample_rate == 0) throw Error(ErrorKind::Validation, "source sample rate must be positive");
  if (target_rate == wave.sample_rate) return wave;
  WaveForm out;
  out.sample_rate = target_rate;
  out.samples = kernels::resample_sinc(wave.samples, wave.sample_rate, target_rate);
  return out;
}

}  // namespace emoseq
