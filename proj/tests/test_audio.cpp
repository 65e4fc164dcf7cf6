#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <numbers>
#include <random>
#include <set>
#include <string>

#include "emoseq/error.hpp"
#include "emoseq/frames.hpp"
#include "emoseq/spectrogram.hpp"
#include "emoseq/tensor_io.hpp"
#include "emoseq/wav.hpp"
#include "oracles.hpp"

using namespace emoseq;

namespace {

std::vector<std::uint8_t> wav_bytes(std::uint16_t format, std::uint16_t channels, std::uint32_t rate,
                                    std::uint16_t bits, const std::vector<std::uint8_t>& data) {
  std::vector<std::uint8_t> b;
  auto put = [&](const char* s) { b.insert(b.end(), s, s + 4); };
  auto put16 = [&](std::uint16_t v) {
    b.push_back(v & 0xFF);
    b.push_back(v >> 8);
  };
  auto put32 = [&](std::uint32_t v) {
    put16(v & 0xFFFF);
    put16(v >> 16);
  };
  put("RIFF");
  put32(static_cast<std::uint32_t>(36 + data.size()));
  put("WAVE");
  put("fmt ");
  put32(16);
  put16(format);
  put16(channels);
  put32(rate);
  put32(rate * channels * bits / 8);
  put16(channels * bits / 8);
  put16(bits);
  put("data");
  put32(static_cast<std::uint32_t>(data.size()));
  b.insert(b.end(), data.begin(), data.end());
  return b;
}

void push_f32(std::vector<std::uint8_t>& out, float v) {
  const auto u = std::bit_cast<std::uint32_t>(v);
  for (int i = 0; i < 4; ++i) out.push_back((u >> (8 * i)) & 0xFF);
}

WaveForm sine(double freq, double seconds, std::uint32_t rate, double amplitude = 0.5) {
  WaveForm w;
  w.sample_rate = rate;
  w.samples.resize(static_cast<std::size_t>(std::llround(seconds * rate)));
  for (std::size_t n = 0; n < w.samples.size(); ++n) {
    w.samples[n] = amplitude * std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(n) / rate);
  }
  return w;
}

Spectrogram spectrogram_with_columns(std::size_t columns) {
  Spectrogram s;
  s.values = Matrix(kBands, columns);
  std::mt19937_64 rng(columns);
  std::normal_distribution<double> g(0.0, 3.0);
  for (double& v : s.values.data()) v = g(rng);
  s.band_edges = band_edges();
  return s;
}

}  // namespace

TEST_CASE("wav decoding scales and downmixes") {
  {
    const auto w = parse_wav(wav_bytes(1, 1, 16000, 16, {0x00, 0x40}));  // 16384
    REQUIRE(w.samples.size() == 1);
    CHECK(w.samples[0] == 0.5);
    CHECK(w.sample_rate == 16000);
  }
  {
    std::vector<std::uint8_t> data;
    push_f32(data, 0.2f);
    push_f32(data, 0.4f);
    const auto w = parse_wav(wav_bytes(3, 2, 16000, 32, data));
    REQUIRE(w.samples.size() == 1);
    CHECK(w.samples[0] == doctest::Approx(0.3).epsilon(1e-7));
  }
  {
    const auto w = parse_wav(wav_bytes(1, 1, 16000, 16, std::vector<std::uint8_t>(32000, 0)));
    CHECK(w.samples.size() == 16000);
    CHECK(std::all_of(w.samples.begin(), w.samples.end(), [](double v) { return v == 0.0; }));
  }
  CHECK(parse_wav(wav_bytes(1, 1, 8000, 8, {0xC0})).samples[0] == 0.5);
  CHECK(parse_wav(wav_bytes(1, 1, 8000, 24, {0x00, 0x00, 0xC0})).samples[0] == -0.5);
  CHECK(parse_wav(wav_bytes(1, 1, 8000, 32, {0x00, 0x00, 0x00, 0x40})).samples[0] == 0.5);
}

TEST_CASE("wav errors") {
  auto kind_of = [](const std::vector<std::uint8_t>& b) {
    try {
      parse_wav(b);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::Usage;
  };
  CHECK(kind_of({'R', 'I', 'F', 'X'}) == ErrorKind::Format);
  CHECK(kind_of(wav_bytes(2, 1, 16000, 4, {0, 0})) == ErrorKind::UnsupportedCodec);   // ADPCM
  CHECK(kind_of(wav_bytes(0x55, 1, 16000, 0, {0, 0})) == ErrorKind::UnsupportedCodec);  // MP3
  CHECK(kind_of(wav_bytes(1, 1, 16000, 12, {0, 0})) == ErrorKind::Format);
  auto no_data = wav_bytes(1, 1, 16000, 16, {});
  no_data.resize(36);
  CHECK(kind_of(no_data) == ErrorKind::Format);
  std::vector<std::uint8_t> nan_data;
  push_f32(nan_data, std::nanf(""));
  CHECK(kind_of(wav_bytes(3, 1, 16000, 32, nan_data)) == ErrorKind::Format);
}

TEST_CASE("wav write/read keeps 16-bit samples") {
  const auto dir = std::filesystem::path(EMOSEQ_TEST_TMP);
  std::filesystem::create_directories(dir);
  const WaveForm w = sine(300.0, 0.1, 16000);
  write_wav(dir / "s.wav", w);
  const WaveForm r = read_wav(dir / "s.wav");
  REQUIRE(r.samples.size() == w.samples.size());
  for (std::size_t i = 0; i < w.samples.size(); ++i) CHECK(std::abs(r.samples[i] - w.samples[i]) <= 1.0 / 32767.0);
  CHECK_THROWS_AS(read_wav(dir / "missing.wav"), Error);
}

TEST_CASE("resampling") {
  const WaveForm w = sine(440.0, 1.0, 16000);
  CHECK(resample(w, 16000).samples == w.samples);

  const WaveForm hi = sine(440.0, 1.0, 44100);
  const WaveForm lo = resample(hi, 16000);
  CHECK(lo.sample_rate == 16000);
  CHECK(lo.samples.size() >= 15999);
  CHECK(lo.samples.size() <= 16001);
  CHECK(std::abs(oracle::peak_frequency(lo.samples, 16000.0, 300.0, 600.0) - 440.0) <= 5.0);

  // Content above the new Nyquist is suppressed.
  const WaveForm alias = resample(sine(12000.0, 0.5, 44100), 16000);
  double energy = 0.0;
  for (std::size_t i = 200; i + 200 < alias.samples.size(); ++i) energy += alias.samples[i] * alias.samples[i];
  CHECK(energy / static_cast<double>(alias.samples.size()) < 1e-4);

  CHECK(resample(sine(440.0, 0.5, 8000), 16000).samples.size() == 8000);
  CHECK_THROWS_AS(resample(w, 0), Error);
}

TEST_CASE("spectrogram geometry") {
  const auto edges = band_edges();
  CHECK(edges.front() == 0.0);
  CHECK(edges.back() == 4000.0);
  for (std::size_t b = 1; b < edges.size(); ++b) CHECK(edges[b] > edges[b - 1]);

  // Each FFT bin lands in the 100 Hz band containing its frequency.
  for (std::size_t k = 0; k <= kMaxBin; ++k) {
    const double f = 31.25 * static_cast<double>(k);
    const std::size_t b = band_of_bin(k);
    CHECK(f >= edges[b]);
    CHECK((f < edges[b + 1] || (b == kBands - 1 && f == 4000.0)));
  }

  CHECK(compute_spectrogram(sine(440.0, 2.0, 16000)).columns() == 199);
  CHECK(compute_spectrogram(sine(440.0, 0.02, 16000)).columns() == 1);

  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 320 + rng() % 40000;
    WaveForm w;
    w.sample_rate = 16000;
    w.samples.assign(n, 0.1);
    const double duration_ms = static_cast<double>(n) / 16.0;
    CHECK(compute_spectrogram(w).columns() == static_cast<std::size_t>(std::floor((duration_ms - 20.0) / 10.0)) + 1);
  }

  WaveForm silence;
  silence.sample_rate = 16000;
  silence.samples.assign(1600, 0.0);
  const Spectrogram s = compute_spectrogram(silence);
  for (double v : s.values.data()) CHECK(v == doctest::Approx(std::log(1e-10)));
  CHECK(std::log(1e-10) == doctest::Approx(-23.02585093));

  WaveForm tiny;
  tiny.sample_rate = 16000;
  tiny.samples.assign(319, 0.0);
  try {
    compute_spectrogram(tiny);
    FAIL("expected too-short");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::TooShort);
  }
  CHECK_THROWS_AS(compute_spectrogram(sine(440.0, 1.0, 8000)), Error);
}

TEST_CASE("tone energy lands in its band") {
  const Spectrogram s = compute_spectrogram(sine(1250.0, 0.5, 16000));
  for (std::size_t c = 0; c < s.columns(); ++c) {
    std::size_t best = 0;
    for (std::size_t b = 1; b < kBands; ++b)
      if (s.values(b, c) > s.values(best, c)) best = b;
    CHECK(best == 12);
  }
}

TEST_CASE("channelize") {
  {
    const Channels ch = channelize(Matrix(40, 40, -3.0));
    for (double v : ch.norm.data()) CHECK(v == 0.0);
    const double first = ch.equalized.data().front();
    for (double v : ch.equalized.data()) CHECK(v == first);
    for (double v : ch.log.data()) CHECK(v == -3.0);
  }
  {
    Matrix m(4, 4);
    for (std::size_t i = 0; i < 16; ++i) m.data()[i] = i % 2;
    const Channels ch = channelize(m);
    CHECK(ch.norm == m);
    for (std::size_t i = 0; i < 16; ++i) CHECK(ch.equalized.data()[i] == (i % 2 ? 1.0 : 0.5));
  }
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 5.0);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix m(40, 40);
    for (double& v : m.data()) v = g(rng);
    const Channels ch = channelize(m);
    const auto [lo, hi] = std::minmax_element(m.data().begin(), m.data().end());
    CHECK(ch.norm.data()[static_cast<std::size_t>(lo - m.data().begin())] == 0.0);
    CHECK(ch.norm.data()[static_cast<std::size_t>(hi - m.data().begin())] == 1.0);
    for (std::size_t i = 0; i < m.data().size(); ++i) {
      CHECK(ch.norm.data()[i] >= 0.0);
      CHECK(ch.norm.data()[i] <= 1.0);
      CHECK(ch.equalized.data()[i] >= 0.0);
      CHECK(ch.equalized.data()[i] <= 1.0);
      for (std::size_t j : {std::size_t{0}, std::size_t{7}, std::size_t{399}}) {
        if (m.data()[i] <= m.data()[j]) {
          CHECK(ch.norm.data()[i] <= ch.norm.data()[j]);
          CHECK(ch.equalized.data()[i] <= ch.equalized.data()[j]);
        }
      }
    }
  }
  Matrix bad(2, 2, 0.0);
  bad(0, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(channelize(bad), Error);
}

TEST_CASE("equalized channel is close to uniform") {
  std::mt19937_64 rng(42);
  std::exponential_distribution<double> skewed(1.0);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix m(40, 40);
    for (double& v : m.data()) v = std::log(skewed(rng) + 1e-3);
    const Channels ch = channelize(m);
    std::set<long> levels;
    for (double v : ch.norm.data()) levels.insert(std::lround(v * 255));
    REQUIRE(levels.size() >= 64);
    CHECK(oracle::ks_uniform(ch.equalized.data()) <= 0.15);
  }
}

TEST_CASE("frame slicing") {
  CHECK(frame_count(199) == 8);
  CHECK(frame_count(40) == 1);
  CHECK(frame_count(59) == 1);
  CHECK(frame_count(60) == 2);
  CHECK(slice_frames(spectrogram_with_columns(199)).frames.size() == 8);
  CHECK(slice_frames(spectrogram_with_columns(40)).frames.size() == 1);
  CHECK(slice_frames(spectrogram_with_columns(59)).frames.size() == 1);
  try {
    slice_frames(spectrogram_with_columns(39));
    FAIL("expected too-short");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::TooShort);
  }

  const Spectrogram s = spectrogram_with_columns(123);
  const FrameSequence seq = slice_frames(s);
  CHECK(seq.frame_rate == 5.0);
  for (std::size_t k = 0; k < seq.frames.size(); ++k) {
    CHECK(seq.frames[k].start_time == static_cast<double>(k) * 0.2);
    for (std::size_t b = 0; b < kBands; ++b)
      for (std::size_t c = 0; c < kFrameColumns; ++c) CHECK(seq.frames[k].channels[0](b, c) == s.values(b, 20 * k + c));
  }
}

TEST_CASE("interval segmentation") {
  auto sizes = [](std::size_t frames) {
    FrameSequence seq;
    seq.frames.resize(frames);
    for (std::size_t k = 0; k < frames; ++k) seq.frames[k].start_time = 0.2 * static_cast<double>(k);
    std::vector<std::size_t> out;
    for (const auto& iv : segment_intervals(seq, "u")) {
      out.push_back(iv.frames.size());
      CHECK(iv.utterance_id == "u");
      CHECK(iv.duration > 0.0);
      CHECK(iv.duration <= 2.0);
    }
    return out;
  };
  CHECK(sizes(30) == std::vector<std::size_t>{10, 10, 10});
  CHECK(sizes(25) == std::vector<std::size_t>{10, 10, 5});
  CHECK(sizes(11) == std::vector<std::size_t>{10});
  CHECK(sizes(12) == std::vector<std::size_t>{10, 2});
  CHECK(sizes(1).empty());
  CHECK_THROWS_AS(segment_intervals(FrameSequence{}, "u"), Error);
}

TEST_CASE("pipeline determinism and tensor files") {
  const WaveForm w = sine(523.0, 1.3, 22050, 0.3);
  const FrameSequence a = extract_frames(w), b = extract_frames(w);
  REQUIRE(a.frames.size() == b.frames.size());
  const auto ta = encode_tensor(to_tensor(a));
  CHECK(ta == encode_tensor(to_tensor(b)));
  CHECK(std::string(ta.begin(), ta.begin() + 5) == "EMSQ1");

  const FrameTensor t = decode_tensor(ta);
  CHECK(t.count == a.frames.size());
  CHECK(t.is_spectro_frames());
  const auto steps = t.steps();
  const auto flat = a.frames[1].flatten();
  for (std::size_t i = 0; i < flat.size(); ++i) CHECK(steps[1][i] == static_cast<double>(static_cast<float>(flat[i])));
  CHECK(encode_tensor(decode_tensor(ta)) == ta);

  auto truncated = ta;
  truncated.pop_back();
  CHECK_THROWS_AS(decode_tensor(truncated), Error);

  const std::string csv = frames_csv(a);
  CHECK(csv.rfind("frame,start_time,channel,row,v0,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == static_cast<long>(1 + a.frames.size() * 3 * 40));
}
