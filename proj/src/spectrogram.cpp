#include "emoseq/spectrogram.hpp"

#include <cmath>

#include "emoseq/error.hpp"
#include "emoseq/kernels.hpp"

namespace emoseq {

std::array<double, kBands + 1> band_edges() {
  std::array<double, kBands + 1> edges{};
  for (std::size_t b = 0; b <= kBands; ++b) {
    edges[b] = kUpperFrequency * static_cast<double>(b) / kBands;
  }
  return edges;
}

std::size_t band_of_bin(std::size_t bin) {
  // Bin k sits at k * 31.25 Hz; bands are 100 Hz wide and the last band
  // includes the 4000 Hz edge.
  const std::size_t band = bin * kWorkingRate * kBands / (kFftSize * static_cast<std::size_t>(kUpperFrequency));
  return band < kBands ? band : kBands - 1;
}

std::size_t spectrogram_columns(std::size_t sample_count) {
  if (sample_count < kWindowSamples) return 0;
  return (sample_count - kWindowSamples) / kHopSamples + 1;
}

Spectrogram compute_spectrogram(const WaveForm& wave) {
  if (wave.sample_rate != kWorkingRate) {
    throw Error(ErrorKind::Validation, "spectrogram expects 16 kHz audio; resample first");
  }
  if (wave.samples.size() < kWindowSamples) {
    throw Error(ErrorKind::TooShort, "audio shorter than one 20 ms window");
  }
  Spectrogram spec;
  spec.band_edges = band_edges();
  spec.values = kernels::band_power(wave.samples);
  for (double& v : spec.values.data()) {
    v = std::log(v > kLogFloor ? v : kLogFloor);
  }
  return spec;
}

}  // namespace emoseq
