#pragma once

#include <array>
#include <cmath>
#include <numbers>

#include "emoseq/spectrogram.hpp"

namespace emoseq::kernels::detail {

inline const std::array<double, kWindowSamples>& hann_window() {
  static const std::array<double, kWindowSamples> window = [] {
    std::array<double, kWindowSamples> w{};
    for (std::size_t n = 0; n < kWindowSamples; ++n) {
      w[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / kWindowSamples);
    }
    return w;
  }();
  return window;
}

inline std::array<std::size_t, kBands> bins_per_band() {
  std::array<std::size_t, kBands> counts{};
  for (std::size_t k = 0; k <= kMaxBin; ++k) ++counts[band_of_bin(k)];
  return counts;
}

inline double resample_cutoff(std::uint32_t source_rate, std::uint32_t target_rate) {
  // Slightly below the output Nyquist when downsampling.
  return target_rate < source_rate ? 0.95 * static_cast<double>(target_rate) / source_rate : 1.0;
}

inline std::size_t resample_length(std::size_t n, std::uint32_t source_rate, std::uint32_t target_rate) {
  return static_cast<std::size_t>(
      std::llround(static_cast<double>(n) * target_rate / static_cast<double>(source_rate)));
}

}  // namespace emoseq::kernels::detail
