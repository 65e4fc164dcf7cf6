#include "emoseq/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "emoseq/error.hpp"

namespace emoseq {

void validate(const TrainConfig& c) {
  if (!(c.learning_rate >= 0.0)) throw Error(ErrorKind::Validation, "learning rate must be non-negative");
  if (c.batch_size == 0) throw Error(ErrorKind::Validation, "batch size must be positive");
  if (c.regression_weight < 0.0) throw Error(ErrorKind::Validation, "regression weight must be non-negative");
}

namespace {

model::Target target_for(const model::SeqParams& params, const Example& ex) {
  if (ex.label >= params.shape.num_classes) throw Error(ErrorKind::InvalidLabel, "example label out of range");
  return model::Target::for_interval(ex.label, ex.input.size(), ex.arousal, ex.valence);
}

void accumulate(model::SeqParams& into, const model::SeqParams& from) {
  auto dst = model::tensors(into);
  const auto src = model::tensors(from);
  for (std::size_t i = 0; i < dst.size(); ++i) {
    for (std::size_t k = 0; k < dst[i].values.size(); ++k) dst[i].values[k] += src[i].values[k];
  }
}

}  // namespace

model::LossGrad batch_gradient_serial(const model::SeqParams& params, const std::vector<Example>& data,
                                      const std::vector<std::size_t>& indices, double regression_weight) {
  model::LossGrad total{0.0, model::zero_params(params.shape)};
  for (std::size_t idx : indices) {
    const auto lg = model::backward(params, data[idx].input, target_for(params, data[idx]), regression_weight);
    total.loss += lg.loss;
    accumulate(total.grads, lg.grads);
  }
  return total;
}

model::LossGrad batch_gradient(const model::SeqParams& params, const std::vector<Example>& data,
                               const std::vector<std::size_t>& indices, double regression_weight) {
  std::vector<model::LossGrad> parts(indices.size());
  std::vector<std::exception_ptr> errors(indices.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(indices.size()); ++i) {
    const auto k = static_cast<std::size_t>(i);
    try {
      const Example& ex = data[indices[k]];
      parts[k] = model::backward(params, ex.input, target_for(params, ex), regression_weight);
    } catch (...) {
      errors[k] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  model::LossGrad total{0.0, model::zero_params(params.shape)};
  for (const auto& part : parts) {
    total.loss += part.loss;
    accumulate(total.grads, part.grads);
  }
  return total;
}

void sgd_step(model::SeqParams& params, const model::SeqParams& grads, double scale) {
  auto p = model::tensors(params);
  const auto g = model::tensors(grads);
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (std::size_t k = 0; k < p[i].values.size(); ++k) p[i].values[k] -= scale * g[i].values[k];
  }
}

TrainResult train(const TrainConfig& config, model::SeqParams initial, const std::vector<Example>& data) {
  validate(config);
  if (data.empty()) throw Error(ErrorKind::EmptyInput, "training set is empty");
  if (initial.shape.loss_mode != config.loss_mode) {
    throw Error(ErrorKind::Validation, "model loss mode differs from training config");
  }
  for (const Example& ex : data) {
    model::validate_input(initial.shape, ex.input);
    target_for(initial, ex);
  }

  TrainResult result{std::move(initial), {}};
  std::mt19937_64 rng(config.seed ^ 0x9E3779B97F4A7C15ull);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      const std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                           order.begin() + static_cast<std::ptrdiff_t>(end));
      const auto lg = batch_gradient(result.params, data, batch, config.regression_weight);
      epoch_loss += lg.loss;
      sgd_step(result.params, lg.grads, config.learning_rate / static_cast<double>(batch.size()));
    }
    if (!std::isfinite(epoch_loss)) {
      throw Error(ErrorKind::Numeric, "training loss became non-finite in epoch " + std::to_string(epoch));
    }
    result.loss_trace.push_back(epoch_loss / static_cast<double>(data.size()));
  }
  return result;
}

TrainResult train(const TrainConfig& config, const model::ModelShape& shape, const std::vector<Example>& data) {
  return train(config, model::init_params(shape, config.seed), data);
}

std::size_t argmax(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

IntervalPrediction predict_interval(const model::SeqParams& params, const model::Sequence& input) {
  const model::ModelShape& s = params.shape;
  const model::ForwardPass pass = model::forward(params, input);
  Matrix y = ctc::log_softmax_rows(pass.logits);
  for (double& v : y.data()) v = std::exp(v);
  const ctc::PosteriorMatrix posteriors(std::move(y));

  IntervalPrediction out;
  out.class_probs.assign(s.num_classes, 0.0);
  if (s.loss_mode == model::LossMode::FramewiseCe) {
    for (std::size_t t = 0; t < posteriors.frames(); ++t) {
      for (std::size_t k = 0; k < s.num_classes; ++k) out.class_probs[k] += posteriors(t, k);
    }
    for (double& v : out.class_probs) v /= static_cast<double>(posteriors.frames());
  } else {
    const auto decode = ctc::constrained_emotion_decode(posteriors, s.blank());
    const double total = std::accumulate(decode.per_class.begin(), decode.per_class.begin() + static_cast<std::ptrdiff_t>(s.num_classes), 0.0);
    for (std::size_t k = 0; k < s.num_classes; ++k) {
      out.class_probs[k] = total > 0.0 ? decode.per_class[k] / total : 1.0 / static_cast<double>(s.num_classes);
    }
  }
  const auto last = pass.lstm.hidden.row(input.size() - 1);
  out.embedding.assign(last.begin(), last.end());
  out.arousal = std::clamp(pass.regression[0], 0.0, 1.0);
  out.valence = std::clamp(pass.regression[1], -1.0, 1.0);
  return out;
}

}  // namespace emoseq
