#include "emoseq/tensor_io.hpp"

#include <cstdio>
#include <cstring>
#include <string>

#include "emoseq/error.hpp"
#include "io_util.hpp"

namespace emoseq {
namespace {
constexpr char kMagic[5] = {'E', 'M', 'S', 'Q', '1'};
constexpr std::size_t kHeaderBytes = 5 + 4 * 4;
}  // namespace

std::vector<std::vector<double>> FrameTensor::steps() const {
  std::vector<std::vector<double>> out(count);
  const std::size_t n = step_size();
  for (std::size_t i = 0; i < count; ++i) {
    out[i].assign(values.begin() + static_cast<std::ptrdiff_t>(i * n),
                  values.begin() + static_cast<std::ptrdiff_t>((i + 1) * n));
  }
  return out;
}

FrameTensor to_tensor(const FrameSequence& sequence) {
  FrameTensor t;
  t.count = static_cast<std::uint32_t>(sequence.frames.size());
  t.channels = kFrameChannels;
  t.rows = kBands;
  t.cols = kFrameColumns;
  t.values.reserve(t.count * t.step_size());
  for (const SpectroFrame& f : sequence.frames) {
    for (const Matrix& ch : f.channels) {
      for (double v : ch.data()) t.values.push_back(static_cast<float>(v));
    }
  }
  return t;
}

FrameTensor embeddings_to_tensor(const std::vector<std::vector<double>>& steps) {
  FrameTensor t;
  t.count = static_cast<std::uint32_t>(steps.size());
  t.channels = 1;
  t.rows = 1;
  t.cols = steps.empty() ? 0 : static_cast<std::uint32_t>(steps.front().size());
  for (const auto& s : steps) {
    if (s.size() != t.cols) throw Error(ErrorKind::Dimension, "ragged embedding sequence");
    for (double v : s) t.values.push_back(static_cast<float>(v));
  }
  return t;
}

std::vector<std::uint8_t> encode_tensor(const FrameTensor& t) {
  if (t.values.size() != t.count * t.step_size()) {
    throw Error(ErrorKind::Dimension, "tensor value count does not match header");
  }
  std::vector<std::uint8_t> out(kMagic, kMagic + 5);
  out.reserve(kHeaderBytes + 4 * t.values.size());
  detail::put_u32(out, t.count);
  detail::put_u32(out, t.channels);
  detail::put_u32(out, t.rows);
  detail::put_u32(out, t.cols);
  for (float v : t.values) detail::put_f32(out, v);
  return out;
}

FrameTensor decode_tensor(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderBytes || std::memcmp(bytes.data(), kMagic, 5) != 0) {
    throw Error(ErrorKind::Format, "not an EMSQ1 tensor");
  }
  FrameTensor t;
  t.count = detail::get_u32(bytes, 5);
  t.channels = detail::get_u32(bytes, 9);
  t.rows = detail::get_u32(bytes, 13);
  t.cols = detail::get_u32(bytes, 17);
  const std::size_t n = std::size_t{t.count} * t.step_size();
  if (bytes.size() != kHeaderBytes + 4 * n) throw Error(ErrorKind::Format, "tensor payload size mismatch");
  t.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) t.values[i] = detail::get_f32(bytes, kHeaderBytes + 4 * i);
  return t;
}

void write_tensor(const std::filesystem::path& path, const FrameTensor& tensor) {
  detail::write_file_atomic(path, encode_tensor(tensor));
}

FrameTensor read_tensor(const std::filesystem::path& path) { return decode_tensor(detail::read_file(path)); }

std::string frames_csv(const FrameSequence& sequence) {
  std::string out = "frame,start_time,channel,row";
  for (std::size_t c = 0; c < kFrameColumns; ++c) out += ",v" + std::to_string(c);
  out += '\n';
  char buf[64];
  for (std::size_t k = 0; k < sequence.frames.size(); ++k) {
    const SpectroFrame& f = sequence.frames[k];
    for (std::size_t ch = 0; ch < kFrameChannels; ++ch) {
      for (std::size_t r = 0; r < f.channels[ch].rows(); ++r) {
        std::snprintf(buf, sizeof buf, "%zu,%.1f,%zu,%zu", k, f.start_time, ch, r);
        out += buf;
        for (double v : f.channels[ch].row(r)) {
          std::snprintf(buf, sizeof buf, ",%.9g", v);
          out += buf;
        }
        out += '\n';
      }
    }
  }
  return out;
}

}  // namespace emoseq
