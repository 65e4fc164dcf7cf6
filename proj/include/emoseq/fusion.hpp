#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "emoseq/model.hpp"
#include "emoseq/train.hpp"

namespace emoseq::fusion {

struct ModalityEmbedding {
  std::string modality;
  std::vector<double> values;

  // Placeholder for a modality missing from an interval.
  static ModalityEmbedding absent(std::string modality, std::size_t dim);
};

struct IntervalOutput {
  std::vector<double> class_probs;
  double arousal = 0.0;
  double valence = 0.0;
};

struct UtterancePrediction {
  std::vector<double> class_probs;
  std::size_t predicted_class = 0;
  double arousal = 0.0;
  double valence = 0.0;
};

// Concatenate -> dense softmax for classes, and a parallel dense layer for
// (arousal, valence) clamped to [0,1] and [-1,1]. `head` uses the
// model::HeadParams layout with class_w [num_classes][sum of dims].
IntervalOutput fuse(const std::vector<ModalityEmbedding>& embeddings, const model::HeadParams& head,
                    std::size_t num_classes);

// Mean of interval class vectors, argmax with ties to the lowest index; mean
// arousal and valence.
UtterancePrediction aggregate_utterance(const std::vector<IntervalOutput>& intervals);

// One recurrent branch per modality feeding a shared decision-level head.
struct FusionModel {
  std::vector<std::string> modalities;
  std::vector<model::SeqParams> branches;  // branch heads are unused
  model::HeadParams head;
  std::size_t num_classes = 7;

  std::size_t fused_dim() const;
};

FusionModel init_fusion(const std::vector<std::string>& modalities, const std::vector<model::ModelShape>& shapes,
                        std::size_t num_classes, std::uint64_t seed);
FusionModel zero_like(const FusionModel& m);

// Absent modalities are std::nullopt and contribute a zero embedding.
struct FusionExample {
  std::vector<std::optional<model::Sequence>> inputs;
  std::size_t label = 0;
  double arousal = 0.0;
  double valence = 0.0;
};

struct FusionConfig {
  double learning_rate = 0.05;
  std::size_t epochs = 50;
  std::size_t batch_size = 8;
  std::uint64_t seed = 1;
  double regression_weight = 1.0;  // lambda in CE + lambda * (SE_arousal + SE_valence)
  bool train_branches = true;      // false freezes every branch
};

struct FusionLossGrad {
  double loss = 0.0;
  FusionModel grads;
};

std::vector<ModalityEmbedding> branch_embeddings(const FusionModel& m,
                                                 const std::vector<std::optional<model::Sequence>>& inputs);
double fusion_loss(const FusionModel& m, const FusionExample& ex, double regression_weight);
FusionLossGrad fusion_backward(const FusionModel& m, const FusionExample& ex, double regression_weight,
                               bool train_branches);

struct FusionTrainResult {
  FusionModel model;
  std::vector<double> loss_trace;
};

FusionTrainResult train_fusion(const FusionConfig& config, FusionModel initial, const std::vector<FusionExample>& data);

IntervalOutput predict_fused(const FusionModel& m, const std::vector<std::optional<model::Sequence>>& inputs);

}  // namespace emoseq::fusion
