#pragma once

#include <cstdint>
#include <vector>

#include "emoseq/model.hpp"

namespace emoseq {

struct TrainConfig {
  model::LossMode loss_mode = model::LossMode::FramewiseCe;
  double learning_rate = 0.05;
  std::size_t epochs = 50;
  std::size_t batch_size = 8;
  std::uint64_t seed = 1;
  double regression_weight = 1.0;
};

void validate(const TrainConfig& config);

struct Example {
  model::Sequence input;
  std::size_t label = 0;
  double arousal = 0.0;
  double valence = 0.0;
};

struct TrainResult {
  model::SeqParams params;
  std::vector<double> loss_trace;  // mean per-example loss of each epoch
};

// Plain minibatch SGD. Per-example gradients of a batch are computed in
// parallel and summed in ascending example order, so runs are reproducible
// for a given seed regardless of thread count.
TrainResult train(const TrainConfig& config, model::SeqParams initial, const std::vector<Example>& data);
TrainResult train(const TrainConfig& config, const model::ModelShape& shape, const std::vector<Example>& data);

// Sum of per-example gradients, in example order. Exposed for tests.
model::LossGrad batch_gradient(const model::SeqParams& params, const std::vector<Example>& data,
                               const std::vector<std::size_t>& indices, double regression_weight);
model::LossGrad batch_gradient_serial(const model::SeqParams& params, const std::vector<Example>& data,
                                      const std::vector<std::size_t>& indices, double regression_weight);

void sgd_step(model::SeqParams& params, const model::SeqParams& grads, double scale);

struct IntervalPrediction {
  std::vector<double> class_probs;  // num_classes, sums to one
  std::vector<double> embedding;    // final LSTM hidden state
  double arousal = 0.0;             // clamped to [0, 1]
  double valence = 0.0;             // clamped to [-1, 1]
};

// Framewise mode: mean of the per-frame softmax rows. CTC mode: P((e) | y)
// for each emotion e, normalized over emotions.
IntervalPrediction predict_interval(const model::SeqParams& params, const model::Sequence& input);

std::size_t argmax(const std::vector<double>& v);

}  // namespace emoseq
