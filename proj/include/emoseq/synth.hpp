#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "emoseq/manifest.hpp"

namespace emoseq {

enum class SynthKind {
  // Class k is a tone at 200 + 150k Hz (plus its second harmonic) with
  // seeded amplitude, phase, length and noise.
  SeparableTones,
  // Two embedding modalities over four classes: "m1" encodes class / 2 and
  // "m2" encodes class % 2, so each alone separates only pairs of classes.
  ComplementaryModalities,
};

SynthKind parse_synth_kind(const std::string& name);

struct SynthOptions {
  SynthKind kind = SynthKind::SeparableTones;
  std::size_t count = 50;
  std::uint64_t seed = 1;
  std::size_t classes = 3;       // tones only; complementary is always 4
  double test_fraction = 0.0;    // trailing share of utterances put in the test split
  std::size_t embed_dim = 8;     // complementary only
  std::size_t steps = 10;        // complementary only: embedding frames per utterance
  double noise = 0.6;            // complementary only: per-entry noise std
};

// Writes the data files and manifest.csv under out_dir and returns the manifest.
Manifest generate_synthetic(const SynthOptions& options, const std::filesystem::path& out_dir);

}  // namespace emoseq
