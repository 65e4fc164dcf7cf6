#pragma once

// Data-parallel inner loops. The functions in emoseq::kernels use OpenMP and
// are what the library calls; emoseq::kernels::reference holds plain serial
// versions that the tests and benchmarks compare against.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "emoseq/matrix.hpp"

namespace emoseq::kernels {

// Shape of a stride-2, 3x3, unpadded convolution over a CHW tensor.
struct ConvShape {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t in_size = 0;  // square input

  std::size_t out_size() const noexcept { return (in_size - 3) / 2 + 1; }
  std::size_t weight_count() const noexcept { return out_channels * in_channels * 9; }
  std::size_t input_count() const noexcept { return in_channels * in_size * in_size; }
  std::size_t output_count() const noexcept { return out_channels * out_size() * out_size(); }
};

// Mean Hann-windowed power per band (kBands x columns), before the log.
Matrix band_power(std::span<const double> samples);

std::vector<double> resample_sinc(std::span<const double> input, std::uint32_t source_rate,
                                  std::uint32_t target_rate);

// out = bias + conv(input, weights); weights laid out [out][in][3][3].
void conv2d_forward(const ConvShape& shape, std::span<const double> input,
                    std::span<const double> weights, std::span<const double> bias,
                    std::span<double> output);

// Accumulates into grad_weights / grad_bias and overwrites grad_input
// (skipped when grad_input is empty).
void conv2d_backward(const ConvShape& shape, std::span<const double> input,
                     std::span<const double> weights, std::span<const double> grad_output,
                     std::span<double> grad_input, std::span<double> grad_weights,
                     std::span<double> grad_bias);

namespace reference {

Matrix band_power(std::span<const double> samples);
std::vector<double> resample_sinc(std::span<const double> input, std::uint32_t source_rate,
                                  std::uint32_t target_rate);
void conv2d_forward(const ConvShape& shape, std::span<const double> input,
                    std::span<const double> weights, std::span<const double> bias,
                    std::span<double> output);
void conv2d_backward(const ConvShape& shape, std::span<const double> input,
                     std::span<const double> weights, std::span<const double> grad_output,
                     std::span<double> grad_input, std::span<double> grad_weights,
                     std::span<double> grad_bias);

}  // namespace reference

// Windowed-sinc tap used by both resamplers.
double sinc_tap(double offset, double cutoff, double half_width);
inline constexpr double kResampleZeroCrossings = 16.0;

}  // namespace emoseq::kernels
