#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "emoseq/frames.hpp"

namespace emoseq {

// Flat little-endian float32 tensor file:
//   "EMSQ1" | u32 count | u32 channels | u32 rows | u32 cols | count*channels*rows*cols f32
// Spectrogram frames are (count, 3, 40, 40); embedding sequences are (count, 1, 1, d).
struct FrameTensor {
  std::uint32_t count = 0;
  std::uint32_t channels = 0;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<float> values;

  std::size_t step_size() const noexcept { return std::size_t{channels} * rows * cols; }
  bool is_spectro_frames() const noexcept {
    return channels == kFrameChannels && rows == kBands && cols == kFrameColumns;
  }
  // Each step as a double vector.
  std::vector<std::vector<double>> steps() const;
};

FrameTensor to_tensor(const FrameSequence& sequence);
FrameTensor embeddings_to_tensor(const std::vector<std::vector<double>>& steps);

std::vector<std::uint8_t> encode_tensor(const FrameTensor& tensor);
FrameTensor decode_tensor(std::span<const std::uint8_t> bytes);

void write_tensor(const std::filesystem::path& path, const FrameTensor& tensor);
FrameTensor read_tensor(const std::filesystem::path& path);

// One line per (frame, channel, row): frame,start_time,channel,row,v0..v(cols-1).
std::string frames_csv(const FrameSequence& sequence);

}  // namespace emoseq
