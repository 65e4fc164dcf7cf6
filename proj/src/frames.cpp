#include "emoseq/frames.hpp"

#include <algorithm>
#include <cmath>

#include "emoseq/error.hpp"

namespace emoseq {

std::vector<double> SpectroFrame::flatten() const {
  std::vector<double> out;
  out.reserve(kFrameSize);
  for (const Matrix& ch : channels) out.insert(out.end(), ch.data().begin(), ch.data().end());
  return out;
}

Matrix min_max_normalize(const Matrix& values) {
  Matrix out(values.rows(), values.cols());
  if (values.empty()) return out;
  const auto [lo, hi] = std::minmax_element(values.data().begin(), values.data().end());
  const double min = *lo, range = *hi - *lo;
  if (range <= 0.0) return out;
  for (std::size_t i = 0; i < values.data().size(); ++i) {
    out.data()[i] = (values.data()[i] - min) / range;
  }
  // Guard the endpoints against rounding in the division.
  for (double& v : out.data()) v = std::clamp(v, 0.0, 1.0);
  return out;
}

Matrix equalize_histogram(const Matrix& normalized) {
  const auto& in = normalized.data();
  std::vector<std::size_t> level(in.size());
  std::array<std::size_t, kEqualizationLevels> histogram{};
  for (std::size_t i = 0; i < in.size(); ++i) {
    const double q = std::round(std::clamp(in[i], 0.0, 1.0) * (kEqualizationLevels - 1));
    level[i] = static_cast<std::size_t>(q);
    ++histogram[level[i]];
  }
  std::array<double, kEqualizationLevels> cdf{};
  std::size_t running = 0;
  for (std::size_t l = 0; l < kEqualizationLevels; ++l) {
    running += histogram[l];
    cdf[l] = in.empty() ? 0.0 : static_cast<double>(running) / static_cast<double>(in.size());
  }
  Matrix out(normalized.rows(), normalized.cols());
  for (std::size_t i = 0; i < in.size(); ++i) out.data()[i] = cdf[level[i]];
  return out;
}

Channels channelize(const Matrix& log_values) {
  for (double v : log_values.data()) {
    if (!std::isfinite(v)) throw Error(ErrorKind::Numeric, "non-finite spectrogram value");
  }
  Channels ch;
  ch.log = log_values;
  ch.norm = min_max_normalize(log_values);
  ch.equalized = equalize_histogram(ch.norm);
  return ch;
}

std::size_t frame_count(std::size_t columns) {
  if (columns < kFrameColumns) return 0;
  return (columns - kFrameColumns) / kFrameStride + 1;
}

FrameSequence slice_frames(const Spectrogram& spec) {
  const std::size_t columns = spec.columns();
  if (columns < kFrameColumns) {
    throw Error(ErrorKind::TooShort, "spectrogram has " + std::to_string(columns) +
                                         " columns; a frame needs " + std::to_string(kFrameColumns));
  }
  const std::size_t count = frame_count(columns);
  FrameSequence seq;
  seq.frames.resize(count);
  for (std::size_t k = 0; k < count; ++k) {
    Matrix block(kBands, kFrameColumns);
    for (std::size_t b = 0; b < kBands; ++b) {
      for (std::size_t c = 0; c < kFrameColumns; ++c) block(b, c) = spec.values(b, k * kFrameStride + c);
    }
    Channels ch = channelize(block);
    SpectroFrame& frame = seq.frames[k];
    frame.channels = {std::move(ch.log), std::move(ch.norm), std::move(ch.equalized)};
    frame.start_time = static_cast<double>(k) * kFramePeriod;
  }
  return seq;
}

std::vector<std::pair<std::size_t, std::size_t>> interval_spans(std::size_t frames) {
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  std::size_t begin = 0;
  for (; begin + kFramesPerInterval <= frames; begin += kFramesPerInterval) {
    spans.emplace_back(begin, begin + kFramesPerInterval);
  }
  if (frames - begin >= kMinTrailingFrames) spans.emplace_back(begin, frames);
  return spans;
}

std::vector<Interval> segment_intervals(const FrameSequence& sequence, const std::string& utterance_id) {
  if (sequence.frames.empty()) throw Error(ErrorKind::EmptyInput, "no frames to segment");
  std::vector<Interval> intervals;
  for (const auto& [begin, end] : interval_spans(sequence.frames.size())) {
    Interval iv;
    iv.frames.assign(sequence.frames.begin() + static_cast<std::ptrdiff_t>(begin),
                     sequence.frames.begin() + static_cast<std::ptrdiff_t>(end));
    iv.utterance_id = utterance_id;
    iv.start = sequence.frames[begin].start_time;
    iv.duration = static_cast<double>(end - begin) * kFramePeriod;
    intervals.push_back(std::move(iv));
  }
  return intervals;
}

FrameSequence extract_frames(const WaveForm& wave) {
  return slice_frames(compute_spectrogram(resample(wave, kWorkingRate)));
}

}  // namespace emoseq
