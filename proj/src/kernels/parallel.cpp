#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>

#include "emoseq/kernels.hpp"
#include "kernels/common.hpp"

namespace emoseq::kernels {
namespace {

struct FftwFree {
  void operator()(void* p) const noexcept { fftw_free(p); }
};

// One r2c plan shared by all threads; fftw_execute_dft_r2c is thread-safe
// once the plan exists, planning itself is not.
class RealFft {
 public:
  RealFft() {
    auto* in = static_cast<double*>(fftw_malloc(sizeof(double) * kFftSize));
    auto* out = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (kFftSize / 2 + 1)));
    plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(kFftSize), in, out, FFTW_ESTIMATE);
    fftw_free(in);
    fftw_free(out);
  }
  ~RealFft() { fftw_destroy_plan(plan_); }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  void execute(double* in, fftw_complex* out) const { fftw_execute_dft_r2c(plan_, in, out); }

  static const RealFft& instance() {
    static const RealFft fft;
    return fft;
  }

 private:
  fftw_plan plan_;
};

}  // namespace

Matrix band_power(std::span<const double> samples) {
  const std::size_t columns = spectrogram_columns(samples.size());
  const auto& window = detail::hann_window();
  const auto counts = detail::bins_per_band();
  const RealFft& fft = RealFft::instance();

  Matrix power(kBands, columns);
#pragma omp parallel
  {
    std::unique_ptr<double, FftwFree> in(static_cast<double*>(fftw_malloc(sizeof(double) * kFftSize)));
    std::unique_ptr<fftw_complex, FftwFree> out(
        static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (kFftSize / 2 + 1))));
    double* buf = in.get();
    fftw_complex* spec = out.get();

#pragma omp for schedule(static)
    for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(columns); ++c) {
      const double* frame = samples.data() + static_cast<std::size_t>(c) * kHopSamples;
      for (std::size_t n = 0; n < kWindowSamples; ++n) buf[n] = frame[n] * window[n];
      for (std::size_t n = kWindowSamples; n < kFftSize; ++n) buf[n] = 0.0;
      fft.execute(buf, spec);
      std::array<double, kBands> acc{};
      for (std::size_t k = 0; k <= kMaxBin; ++k) {
        acc[band_of_bin(k)] += spec[k][0] * spec[k][0] + spec[k][1] * spec[k][1];
      }
      for (std::size_t b = 0; b < kBands; ++b) {
        power(b, static_cast<std::size_t>(c)) = acc[b] / static_cast<double>(counts[b]);
      }
    }
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
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n_out); ++i) {
    const double x = static_cast<double>(i) * source_rate / target_rate;
    const auto lo = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(std::ceil(x - half_width)));
    const auto hi = std::min<std::ptrdiff_t>(n_in - 1, static_cast<std::ptrdiff_t>(std::floor(x + half_width)));
    double acc = 0.0;
    for (std::ptrdiff_t k = lo; k <= hi; ++k) {
      acc += input[static_cast<std::size_t>(k)] * sinc_tap(x - static_cast<double>(k), cutoff, half_width);
    }
    out[static_cast<std::size_t>(i)] = acc;
  }
  return out;
}

void conv2d_forward(const ConvShape& s, std::span<const double> input, std::span<const double> weights,
                    std::span<const double> bias, std::span<double> output) {
  const std::size_t in = s.in_size, out = s.out_size();
  const auto rows = static_cast<std::ptrdiff_t>(s.out_channels * out);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    const std::size_t oc = static_cast<std::size_t>(r) / out;
    const std::size_t i = static_cast<std::size_t>(r) % out;
    for (std::size_t j = 0; j < out; ++j) {
      double acc = bias[oc];
      for (std::size_t ic = 0; ic < s.in_channels; ++ic) {
        const double* w = weights.data() + (oc * s.in_channels + ic) * 9;
        const double* x = input.data() + (ic * in + 2 * i) * in + 2 * j;
        for (std::size_t ki = 0; ki < 3; ++ki) {
          acc += w[ki * 3] * x[ki * in] + w[ki * 3 + 1] * x[ki * in + 1] + w[ki * 3 + 2] * x[ki * in + 2];
        }
      }
      output[(oc * out + i) * out + j] = acc;
    }
  }
}

void conv2d_backward(const ConvShape& s, std::span<const double> input, std::span<const double> weights,
                     std::span<const double> grad_output, std::span<double> grad_input,
                     std::span<double> grad_weights, std::span<double> grad_bias) {
  const std::size_t in = s.in_size, out = s.out_size();

  // Weight and bias gradients: each output channel owns its slice.
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t o = 0; o < static_cast<std::ptrdiff_t>(s.out_channels); ++o) {
    const auto oc = static_cast<std::size_t>(o);
    const double* go = grad_output.data() + oc * out * out;
    double bias_acc = 0.0;
    for (std::size_t p = 0; p < out * out; ++p) bias_acc += go[p];
    grad_bias[oc] += bias_acc;
    for (std::size_t ic = 0; ic < s.in_channels; ++ic) {
      for (std::size_t ki = 0; ki < 3; ++ki) {
        for (std::size_t kj = 0; kj < 3; ++kj) {
          double acc = 0.0;
          for (std::size_t i = 0; i < out; ++i) {
            const double* x = input.data() + (ic * in + 2 * i + ki) * in + kj;
            for (std::size_t j = 0; j < out; ++j) acc += go[i * out + j] * x[2 * j];
          }
          grad_weights[((oc * s.in_channels + ic) * 3 + ki) * 3 + kj] += acc;
        }
      }
    }
  }

  // Input gradient: each thread owns whole input channels and scatters into them.
  if (grad_input.empty()) return;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(s.in_channels); ++c) {
    const auto ic = static_cast<std::size_t>(c);
    double* gi = grad_input.data() + ic * in * in;
    std::fill(gi, gi + in * in, 0.0);
    for (std::size_t oc = 0; oc < s.out_channels; ++oc) {
      const double* w = weights.data() + (oc * s.in_channels + ic) * 9;
      const double* go = grad_output.data() + oc * out * out;
      for (std::size_t i = 0; i < out; ++i) {
        for (std::size_t ki = 0; ki < 3; ++ki) {
          double* row = gi + (2 * i + ki) * in;
          for (std::size_t j = 0; j < out; ++j) {
            const double g = go[i * out + j];
            row[2 * j] += w[ki * 3] * g;
            row[2 * j + 1] += w[ki * 3 + 1] * g;
            row[2 * j + 2] += w[ki * 3 + 2] * g;
          }
        }
      }
    }
  }
}

}  // namespace emoseq::kernels
