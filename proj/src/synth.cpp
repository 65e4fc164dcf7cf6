#include "emoseq/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "emoseq/error.hpp"
#include "emoseq/tensor_io.hpp"
#include "emoseq/wav.hpp"
#include "io_util.hpp"

namespace emoseq {
namespace {

std::string utterance_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "utt%04zu", i);
  return buf;
}

Split split_for(std::size_t i, std::size_t n, double test_fraction) {
  const auto train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * (1.0 - test_fraction)));
  return i < train ? Split::Train : Split::Test;
}

Manifest tones(const SynthOptions& o, const std::filesystem::path& dir) {
  if (o.classes == 0 || o.classes > kEmotionCount) throw Error(ErrorKind::Validation, "tone classes must be 1..7");
  std::mt19937_64 rng(o.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Manifest m;
  m.modalities = {"audio"};
  for (std::size_t i = 0; i < o.count; ++i) {
    const std::size_t k = i % o.classes;
    const double f0 = 200.0 + 150.0 * static_cast<double>(k);
    const double amplitude = 0.2 + 0.3 * unit(rng);
    const double phase = 2.0 * std::numbers::pi * unit(rng);
    const double seconds = 2.0 + 0.6 * unit(rng);

    WaveForm w;
    w.sample_rate = 16000;
    w.samples.resize(static_cast<std::size_t>(seconds * w.sample_rate));
    for (std::size_t n = 0; n < w.samples.size(); ++n) {
      const double t = static_cast<double>(n) / w.sample_rate;
      w.samples[n] = amplitude * (std::sin(2.0 * std::numbers::pi * f0 * t + phase) +
                                  0.5 * std::sin(4.0 * std::numbers::pi * f0 * t + phase)) +
                     0.01 * gauss(rng);
    }
    const std::string id = utterance_name(i);
    const auto path = dir / (id + ".wav");
    write_wav(path, w);

    ManifestRow row;
    row.utterance_id = id;
    row.label = k;
    row.arousal = std::clamp((k + 1.0) / (o.classes + 1.0) + 0.02 * gauss(rng), 0.0, 1.0);
    row.valence = std::clamp(-0.6 + 1.2 * k / std::max<double>(1.0, o.classes - 1.0) + 0.02 * gauss(rng), -1.0, 1.0);
    row.split = split_for(i, o.count, o.test_fraction);
    row.sources = {path};
    m.rows.push_back(std::move(row));
  }
  return m;
}

Manifest complementary(const SynthOptions& o, const std::filesystem::path& dir) {
  if (o.embed_dim < 2 || o.steps == 0) throw Error(ErrorKind::Validation, "complementary data needs dim >= 2, steps >= 1");
  std::mt19937_64 rng(o.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  // Each modality gets a random unit direction; a bit flips the sign.
  auto direction = [&] {
    std::vector<double> v(o.embed_dim);
    double norm = 0.0;
    for (double& x : v) {
      x = gauss(rng);
      norm += x * x;
    }
    for (double& x : v) x *= std::sqrt(static_cast<double>(o.embed_dim)) / std::sqrt(norm);
    return v;
  };
  const std::vector<double> dir1 = direction(), dir2 = direction();

  Manifest m;
  m.modalities = {"m1", "m2"};
  for (std::size_t i = 0; i < o.count; ++i) {
    const std::size_t k = i % 4;
    const double s1 = (k / 2) ? 1.0 : -1.0;
    const double s2 = (k % 2) ? 1.0 : -1.0;
    auto sequence = [&](const std::vector<double>& d, double sign) {
      std::vector<std::vector<double>> steps(o.steps, std::vector<double>(o.embed_dim));
      for (auto& step : steps) {
        for (std::size_t j = 0; j < o.embed_dim; ++j) step[j] = 0.5 * sign * d[j] + o.noise * gauss(rng);
      }
      return steps;
    };
    const std::string id = utterance_name(i);
    const auto p1 = dir / (id + "_m1.emsq");
    const auto p2 = dir / (id + "_m2.emsq");
    write_tensor(p1, embeddings_to_tensor(sequence(dir1, s1)));
    write_tensor(p2, embeddings_to_tensor(sequence(dir2, s2)));

    ManifestRow row;
    row.utterance_id = id;
    row.label = k;
    row.arousal = 0.25 + 0.5 * static_cast<double>(k / 2);
    row.valence = -0.5 + static_cast<double>(k % 2);
    row.split = split_for(i, o.count, o.test_fraction);
    row.sources = {p1, p2};
    m.rows.push_back(std::move(row));
  }
  return m;
}

}  // namespace

SynthKind parse_synth_kind(const std::string& name) {
  if (name == "separable_tones") return SynthKind::SeparableTones;
  if (name == "complementary_modalities") return SynthKind::ComplementaryModalities;
  throw Error(ErrorKind::Usage, "unknown synthetic kind '" + name + "'");
}

Manifest generate_synthetic(const SynthOptions& options, const std::filesystem::path& out_dir) {
  if (options.count == 0) throw Error(ErrorKind::Validation, "synthetic count must be positive");
  if (options.test_fraction < 0.0 || options.test_fraction >= 1.0) {
    throw Error(ErrorKind::Validation, "test fraction must be in [0, 1)");
  }
  std::filesystem::create_directories(out_dir);
  Manifest m = options.kind == SynthKind::SeparableTones ? tones(options, out_dir) : complementary(options, out_dir);
  detail::write_text_atomic(out_dir / "manifest.csv", manifest_csv(m, out_dir));
  return m;
}

}  // namespace emoseq
