#pragma once

#include <array>
#include <cstddef>

#include "emoseq/matrix.hpp"
#include "emoseq/wav.hpp"

namespace emoseq {

inline constexpr std::uint32_t kWorkingRate = 16000;
inline constexpr std::size_t kWindowSamples = 320;  // 20 ms
inline constexpr std::size_t kHopSamples = 160;     // 10 ms
inline constexpr std::size_t kFftSize = 512;
inline constexpr std::size_t kBands = 40;
inline constexpr double kUpperFrequency = 4000.0;
inline constexpr double kLogFloor = 1e-10;

struct Spectrogram {
  Matrix values;  // kBands x columns, natural log of band power
  std::array<double, kBands + 1> band_edges{};
  double column_hop = 0.010;
  double window = 0.020;

  std::size_t columns() const noexcept { return values.cols(); }
};

std::array<double, kBands + 1> band_edges();

// Index of the band owning FFT bin k, for bins 0..kFftSize*4000/16000.
std::size_t band_of_bin(std::size_t bin);
inline constexpr std::size_t kMaxBin = kFftSize * 4000 / kWorkingRate;  // 128

std::size_t spectrogram_columns(std::size_t sample_count);

// Requires a 16 kHz waveform of at least one window.
Spectrogram compute_spectrogram(const WaveForm& wave);

}  // namespace emoseq
