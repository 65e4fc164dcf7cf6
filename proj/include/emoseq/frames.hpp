#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "emoseq/matrix.hpp"
#include "emoseq/spectrogram.hpp"

namespace emoseq {

inline constexpr std::size_t kFrameColumns = 40;  // 0.4 s of 10 ms columns
inline constexpr std::size_t kFrameStride = 20;   // 50% overlap
inline constexpr std::size_t kFrameChannels = 3;
inline constexpr std::size_t kFrameSize = kFrameChannels * kBands * kFrameColumns;
inline constexpr double kFramePeriod = 0.2;  // 5 frames per second
inline constexpr std::size_t kFramesPerInterval = 10;
inline constexpr std::size_t kMinTrailingFrames = 2;
inline constexpr std::size_t kEqualizationLevels = 256;

// Three 40x40 channels: log power, min-max normalized, histogram equalized.
struct SpectroFrame {
  std::array<Matrix, kFrameChannels> channels;
  double start_time = 0.0;

  // Channel-major copy, the layout the encoder and tensor files use.
  std::vector<double> flatten() const;
};

struct FrameSequence {
  std::vector<SpectroFrame> frames;
  double frame_rate = 1.0 / kFramePeriod;
};

struct Interval {
  std::vector<SpectroFrame> frames;
  std::string utterance_id;
  double start = 0.0;
  double duration = 0.0;
};

struct Channels {
  Matrix log;
  Matrix norm;
  Matrix equalized;
};

// (x - min) / (max - min) over the whole matrix; all zeros when max == min.
Matrix min_max_normalize(const Matrix& values);

// Quantizes [0,1] values to 256 levels and maps each through the empirical CDF.
Matrix equalize_histogram(const Matrix& normalized);

Channels channelize(const Matrix& log_values);

std::size_t frame_count(std::size_t columns);

// Frames start every 20 columns; each frame is channelized independently.
FrameSequence slice_frames(const Spectrogram& spec);

// Half-open [begin, end) frame ranges of consecutive 2 s intervals. A trailing
// remainder of at least two frames is kept as a short interval.
std::vector<std::pair<std::size_t, std::size_t>> interval_spans(std::size_t frames);

std::vector<Interval> segment_intervals(const FrameSequence& sequence, const std::string& utterance_id);

// wav -> 16 kHz -> spectrogram -> frames.
FrameSequence extract_frames(const WaveForm& wave);

}  // namespace emoseq
