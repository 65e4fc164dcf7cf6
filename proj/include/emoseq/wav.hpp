#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace emoseq {

// Mono audio with amplitudes in [-1, 1].
struct WaveForm {
  std::vector<double> samples;
  std::uint32_t sample_rate = 0;

  double duration_seconds() const {
    return sample_rate == 0 ? 0.0 : static_cast<double>(samples.size()) / sample_rate;
  }
};

// Parses RIFF/WAVE: PCM 8/16/24/32-bit integer or IEEE 32-bit float, any channel
// count. Channels are averaged to mono.
WaveForm read_wav(const std::filesystem::path& path);
WaveForm parse_wav(std::span<const std::uint8_t> bytes);

// Writes 16-bit PCM mono. Samples are clipped to [-1, 1].
void write_wav(const std::filesystem::path& path, const WaveForm& wave);
std::vector<std::uint8_t> encode_wav16(const WaveForm& wave);

// Windowed-sinc resampling. Output length is round(n * target / source).
WaveForm resample(const WaveForm& wave, std::uint32_t target_rate);

}  // namespace emoseq
