#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace emoseq {

inline constexpr std::array<std::string_view, 7> kEmotionLabels = {"anger",   "disgust", "fear",    "happy",
                                                                   "neutral", "sad",     "surprise"};
inline constexpr std::size_t kEmotionCount = kEmotionLabels.size();

std::size_t emotion_index(std::string_view label);

enum class Split { Train, Validation, Test };
Split parse_split(std::string_view name);
const char* to_string(Split split) noexcept;

struct ManifestRow {
  std::string utterance_id;
  std::size_t label = 0;
  double arousal = 0.0;
  double valence = 0.0;
  Split split = Split::Train;
  std::vector<std::optional<std::filesystem::path>> sources;  // one per modality, absolute
  std::size_t line = 0;
};

// CSV with a header. Required columns: utterance_id, label, arousal, valence,
// split. Every other column is a modality whose cells hold a .wav or tensor
// path relative to the manifest; an empty cell marks the modality absent.
struct Manifest {
  std::vector<std::string> modalities;
  std::vector<ManifestRow> rows;
};

Manifest parse_manifest(std::string_view text, const std::filesystem::path& base_dir, bool check_files = true);
Manifest load_manifest(const std::filesystem::path& path);

// Paths are written relative to base_dir when possible.
std::string manifest_csv(const Manifest& manifest, const std::filesystem::path& base_dir);

}  // namespace emoseq
