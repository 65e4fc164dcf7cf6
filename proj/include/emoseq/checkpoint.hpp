#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "emoseq/fusion.hpp"
#include "emoseq/model.hpp"

namespace emoseq {

// A single-modality sequence classifier or a multi-branch fusion model.
struct Checkpoint {
  std::string modality;  // single-modality models only
  std::variant<model::SeqParams, fusion::FusionModel> model;
};

// Versioned little-endian binary:
//   "EMSQCKPT" | u32 version | u32 kind (0 = sequence, 1 = fusion) | body
// Shapes are stored as u32 fields, every tensor as u32 name length, name,
// u32 value count and float32 values. Parameters are rounded to float32, so
// save(load(save(x))) reproduces the first file byte for byte.
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& checkpoint);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace emoseq
