#pragma once

// Orchestration behind the emoseq CLI subcommands.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "emoseq/checkpoint.hpp"
#include "emoseq/fusion.hpp"
#include "emoseq/manifest.hpp"
#include "emoseq/metrics.hpp"
#include "emoseq/train.hpp"

namespace emoseq::pipeline {

struct RunConfig {
  std::filesystem::path manifest;
  std::filesystem::path checkpoint;
  std::vector<std::string> modalities;  // empty: every manifest modality
  TrainConfig train;
  std::size_t conv1_channels = 4;
  std::size_t conv2_channels = 8;
  std::size_t embed_dim = 16;  // encoder output width (spectrogram modalities)
  std::size_t hidden = 16;
  bool fusion_joint = true;    // false: pretrain branches alone, then freeze them
  Split split = Split::Test;   // split evaluated by run_eval
};

// One utterance's per-modality step sequences (nullopt when absent).
struct Utterance {
  std::string id;
  std::size_t label = 0;
  double arousal = 0.0;
  double valence = 0.0;
  std::vector<std::optional<model::Sequence>> inputs;
};

struct LoadedData {
  std::vector<std::string> modalities;
  std::vector<bool> spectro;            // per modality: frames (true) or embeddings
  std::vector<std::size_t> step_sizes;  // per modality
  std::vector<Utterance> utterances;    // sorted by id
};

// Loads and preprocesses the rows of `split` (all rows if nullopt) for the
// selected modalities. Audio goes wav -> 16 kHz -> spectrogram -> frames.
LoadedData load_data(const Manifest& manifest, const std::vector<std::string>& modalities,
                     std::optional<Split> split);

// Per-interval inputs: the i-th 2 s span of every modality.
std::vector<std::vector<std::optional<model::Sequence>>> utterance_intervals(const Utterance& u);

struct TrainSummary {
  std::vector<double> loss_trace;
  double train_unweighted_accuracy = 0.0;
};

// Trains a sequence classifier (one modality) or a fusion model (several),
// writes the checkpoint and "<checkpoint>.loss.csv".
TrainSummary run_train(const RunConfig& config);

fusion::UtterancePrediction predict_utterance(const Checkpoint& checkpoint, const Utterance& u);

struct EvalOutputs {
  metrics::Report report;
  std::string predictions_csv;
};

EvalOutputs evaluate(const Checkpoint& checkpoint, const LoadedData& data);
EvalOutputs run_eval(const RunConfig& config);

// Scores an existing predictions CSV (as written by run_eval) against the manifest.
metrics::Report score_predictions(const Manifest& manifest, const std::string& predictions_csv);

std::string predictions_header();

// Returns the number of frames written.
std::size_t run_frames(const std::filesystem::path& wav, const std::filesystem::path& out, bool dump_csv);

struct DecodeOptions {
  std::optional<std::size_t> blank;  // default: last column
};
// Reads a T x N posterior CSV (optional header row of symbol names) and
// returns the best-path and constrained single-emotion decodes as text.
std::string run_decode(const std::string& posterior_csv, const DecodeOptions& options);

}  // namespace emoseq::pipeline
