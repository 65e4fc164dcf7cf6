// Serial reference versions of the parallel kernels. Kept deliberately plain:
// direct DFT instead of FFT, scatter-form convolution gradients.

#include <algorithm>
#include <cmath>
#include <numbers>

#include "emoseq/kernels.hpp"
#include "kernels/common.hpp"

namespace emoseq::kernels {

double sinc_tap(double offset, double cutoff, double half_width) {
  if (std::abs(offset) >= half_width) return 0.0;
  const double arg = std::numbers::pi * cutoff * offset;
  const double sinc = offset == 0.0 ? 1.0 : std::sin(arg) / arg;
  const double u = offset / half_width;  // Blackman over [-1, 1]
  const double window = 0.42 + 0.5 * std::cos(std::numbers::pi * u) + 0.08 * std::cos(2.0 * std::numbers::pi * u);
  return cutoff * sinc * window;
}

namespace reference {

Matrix band_power(std::span<const double> samples) {
  const std::size_t columns = spectrogram_columns(samples.size());
  const auto& window = detail::hann_window();
  const auto counts = detail::bins_per_band();

  std::array<double, kFftSize> cos_table{}, sin_table{};
  for (std::size_t m = 0; m < kFftSize; ++m) {
    cos_table[m] = std::cos(2.0 * std::numbers::pi * static_cast<double>(m) / kFftSize);
    sin_table[m] = std::sin(2.0 * std::numbers::pi * static_cast<double>(m) / kFftSize);
  }

  Matrix power(kBands, columns);
  for (std::size_t c = 0; c < columns; ++c) {
    const double* frame = samples.data() + c * kHopSamples;
    for (std::size_t k = 0; k <= kMaxBin; ++k) {
      double re = 0.0, im = 0.0;
      for (std::size_t n = 0; n < kWindowSamples; ++n) {
        const double x = frame[n] * window[n];
        const std::size_t m = (k * n) % kFftSize;
        re += x * cos_table[m];
        im -= x * sin_table[m];
      }
      power(band_of_bin(k), c) += re * re + im * im;
    }
    for (std::size_t b = 0; b < kBands; ++b) power(b, c) /= static_cast<double>(counts[b]);
  }
  return power;
}

std::vector<double> resample_sinc(std::span<const double> input, std::uint32_t source_rate,
                                  std::uint32_t target_rate) {
  const double cutoff = detail::resample_cutoff(source_rate, target_rate);
  const double half_width = kResampleZeroCrossings / cutoff;
  const std::size_t n_out = detail::resample_length(input.size(), source_rate, target_rate);
  const auto n_in = static_cast<std::ptrdiff_t>(input.size());

  std::vector<double> out(n_out);
  for (std::size_t i = 0; i < n_out; ++i) {
    const double x = static_cast<double>(i) * source_rate / target_rate;
    const auto lo = static_cast<std::ptrdiff_t>(std::ceil(x - half_width));
    const auto hi = static_cast<std::ptrdiff_t>(std::floor(x + half_width));
    double acc = 0.0;
    for (std::ptrdiff_t k = lo; k <= hi; ++k) {
      if (k < 0 || k >= n_in) continue;
      acc += input[static_cast<std::size_t>(k)] * sinc_tap(x - static_cast<double>(k), cutoff, half_width);
    }
    out[i] = acc;
  }
  return out;
}

void conv2d_forward(const ConvShape& s, std::span<const double> input, std::span<const double> weights,
                    std::span<const double> bias, std::span<double> output) {
  const std::size_t in = s.in_size, out = s.out_size();
  for (std::size_t oc = 0; oc < s.out_channels; ++oc) {
    for (std::size_t i = 0; i < out; ++i) {
      for (std::size_t j = 0; j < out; ++j) {
        double acc = bias[oc];
        for (std::size_t ic = 0; ic < s.in_channels; ++ic) {
          for (std::size_t ki = 0; ki < 3; ++ki) {
            for (std::size_t kj = 0; kj < 3; ++kj) {
              acc += weights[((oc * s.in_channels + ic) * 3 + ki) * 3 + kj] *
                     input[(ic * in + 2 * i + ki) * in + 2 * j + kj];
            }
          }
        }
        output[(oc * out + i) * out + j] = acc;
      }
    }
  }
}

void conv2d_backward(const ConvShape& s, std::span<const double> input, std::span<const double> weights,
                     std::span<const double> grad_output, std::span<double> grad_input,
                     std::span<double> grad_weights, std::span<double> grad_bias) {
  const std::size_t in = s.in_size, out = s.out_size();
  const bool want_input = !grad_input.empty();
  std::fill(grad_input.begin(), grad_input.end(), 0.0);
  for (std::size_t oc = 0; oc < s.out_channels; ++oc) {
    for (std::size_t i = 0; i < out; ++i) {
      for (std::size_t j = 0; j < out; ++j) {
        const double g = grad_output[(oc * out + i) * out + j];
        grad_bias[oc] += g;
        for (std::size_t ic = 0; ic < s.in_channels; ++ic) {
          for (std::size_t ki = 0; ki < 3; ++ki) {
            for (std::size_t kj = 0; kj < 3; ++kj) {
              const std::size_t w = ((oc * s.in_channels + ic) * 3 + ki) * 3 + kj;
              const std::size_t x = (ic * in + 2 * i + ki) * in + 2 * j + kj;
              grad_weights[w] += g * input[x];
              if (want_input) grad_input[x] += g * weights[w];
            }
          }
        }
      }
    }
  }
}

}  // namespace reference
}  // namespace emoseq::kernels
