#include "emoseq/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "emoseq/error.hpp"

namespace emoseq::fusion {
namespace {

struct HeadOutputs {
  std::vector<double> logits;
  std::array<double, 2> regression{};
};

HeadOutputs dense_heads(const std::vector<double>& x, const model::HeadParams& head, std::size_t num_classes) {
  const std::size_t dim = x.size();
  if (head.class_w.size() != num_classes * dim || head.class_b.size() != num_classes ||
      head.reg_w.size() != 2 * dim || head.reg_b.size() != 2) {
    throw Error(ErrorKind::Dimension, "fusion head does not match concatenated width " + std::to_string(dim));
  }
  HeadOutputs out;
  out.logits = head.class_b;
  for (std::size_t k = 0; k < num_classes; ++k) {
    for (std::size_t j = 0; j < dim; ++j) out.logits[k] += head.class_w[k * dim + j] * x[j];
  }
  out.regression = {head.reg_b[0], head.reg_b[1]};
  for (std::size_t r = 0; r < 2; ++r) {
    for (std::size_t j = 0; j < dim; ++j) out.regression[r] += head.reg_w[r * dim + j] * x[j];
  }
  return out;
}

std::vector<double> softmax(const std::vector<double>& z) {
  const double m = *std::max_element(z.begin(), z.end());
  std::vector<double> p(z.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) sum += p[i] = std::exp(z[i] - m);
  for (double& v : p) v /= sum;
  return p;
}

std::vector<double> concat(const std::vector<ModalityEmbedding>& embeddings) {
  std::vector<double> x;
  for (const auto& e : embeddings) x.insert(x.end(), e.values.begin(), e.values.end());
  return x;
}

void check_example(const FusionModel& m, const FusionExample& ex) {
  if (ex.inputs.size() != m.branches.size()) {
    throw Error(ErrorKind::Dimension, "example has " + std::to_string(ex.inputs.size()) + " modality slots, model has " +
                                          std::to_string(m.branches.size()));
  }
  if (ex.label >= m.num_classes) throw Error(ErrorKind::Validation, "class label out of range");
  if (!std::isfinite(ex.arousal) || !std::isfinite(ex.valence)) {
    throw Error(ErrorKind::Validation, "non-finite arousal/valence target");
  }
}

void add_into(std::vector<double>& dst, const std::vector<double>& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

void add_model(FusionModel& into, const FusionModel& from) {
  for (std::size_t b = 0; b < into.branches.size(); ++b) {
    auto dst = model::tensors(into.branches[b]);
    const auto src = model::tensors(from.branches[b]);
    for (std::size_t i = 0; i < dst.size(); ++i) {
      for (std::size_t k = 0; k < dst[i].values.size(); ++k) dst[i].values[k] += src[i].values[k];
    }
  }
  add_into(into.head.class_w, from.head.class_w);
  add_into(into.head.class_b, from.head.class_b);
  add_into(into.head.reg_w, from.head.reg_w);
  add_into(into.head.reg_b, from.head.reg_b);
}

}  // namespace

ModalityEmbedding ModalityEmbedding::absent(std::string modality, std::size_t dim) {
  return {std::move(modality), std::vector<double>(dim, 0.0)};
}

IntervalOutput fuse(const std::vector<ModalityEmbedding>& embeddings, const model::HeadParams& head,
                    std::size_t num_classes) {
  if (embeddings.empty()) throw Error(ErrorKind::EmptyInput, "no modality embeddings to fuse");
  const HeadOutputs h = dense_heads(concat(embeddings), head, num_classes);
  return {softmax(h.logits), std::clamp(h.regression[0], 0.0, 1.0), std::clamp(h.regression[1], -1.0, 1.0)};
}

UtterancePrediction aggregate_utterance(const std::vector<IntervalOutput>& intervals) {
  if (intervals.empty()) throw Error(ErrorKind::EmptyInput, "utterance has no intervals");
  const std::size_t n = intervals.front().class_probs.size();
  UtterancePrediction out;
  out.class_probs.assign(n, 0.0);
  for (const auto& iv : intervals) {
    if (iv.class_probs.size() != n) throw Error(ErrorKind::Dimension, "interval class vectors differ in length");
    for (std::size_t k = 0; k < n; ++k) out.class_probs[k] += iv.class_probs[k];
    out.arousal += iv.arousal;
    out.valence += iv.valence;
  }
  const auto count = static_cast<double>(intervals.size());
  for (double& v : out.class_probs) v /= count;
  out.arousal /= count;
  out.valence /= count;
  out.predicted_class = argmax(out.class_probs);
  return out;
}

std::size_t FusionModel::fused_dim() const {
  std::size_t d = 0;
  for (const auto& b : branches) d += b.shape.hidden;
  return d;
}

FusionModel init_fusion(const std::vector<std::string>& modalities, const std::vector<model::ModelShape>& shapes,
                        std::size_t num_classes, std::uint64_t seed) {
  if (modalities.empty() || modalities.size() != shapes.size()) {
    throw Error(ErrorKind::Validation, "one shape per modality required");
  }
  FusionModel m;
  m.modalities = modalities;
  m.num_classes = num_classes;
  for (std::size_t b = 0; b < shapes.size(); ++b) {
    m.branches.push_back(model::init_params(shapes[b], seed + 1000003ull * (b + 1)));
  }
  const std::size_t dim = m.fused_dim();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-0.1, 0.1);
  auto fill = [&](std::vector<double>& v, std::size_t n) {
    v.resize(n);
    for (double& x : v) x = dist(rng);
  };
  fill(m.head.class_w, num_classes * dim);
  fill(m.head.class_b, num_classes);
  fill(m.head.reg_w, 2 * dim);
  fill(m.head.reg_b, 2);
  return m;
}

FusionModel zero_like(const FusionModel& m) {
  FusionModel z;
  z.modalities = m.modalities;
  z.num_classes = m.num_classes;
  for (const auto& b : m.branches) z.branches.push_back(model::zero_params(b.shape));
  z.head.class_w.assign(m.head.class_w.size(), 0.0);
  z.head.class_b.assign(m.head.class_b.size(), 0.0);
  z.head.reg_w.assign(m.head.reg_w.size(), 0.0);
  z.head.reg_b.assign(m.head.reg_b.size(), 0.0);
  return z;
}

std::vector<ModalityEmbedding> branch_embeddings(const FusionModel& m,
                                                 const std::vector<std::optional<model::Sequence>>& inputs) {
  std::vector<ModalityEmbedding> out;
  for (std::size_t b = 0; b < m.branches.size(); ++b) {
    if (!inputs[b]) {
      out.push_back(ModalityEmbedding::absent(m.modalities[b], m.branches[b].shape.hidden));
      continue;
    }
    const auto pass = model::forward(m.branches[b], *inputs[b]);
    const auto last = pass.lstm.hidden.row(pass.lstm.hidden.rows() - 1);
    out.push_back({m.modalities[b], {last.begin(), last.end()}});
  }
  return out;
}

double fusion_loss(const FusionModel& m, const FusionExample& ex, double regression_weight) {
  check_example(m, ex);
  const HeadOutputs h = dense_heads(concat(branch_embeddings(m, ex.inputs)), m.head, m.num_classes);
  const std::vector<double> p = softmax(h.logits);
  const double da = h.regression[0] - ex.arousal, dv = h.regression[1] - ex.valence;
  return -std::log(p[ex.label]) + regression_weight * (da * da + dv * dv);
}

FusionLossGrad fusion_backward(const FusionModel& m, const FusionExample& ex, double regression_weight,
                               bool train_branches) {
  check_example(m, ex);
  std::vector<std::optional<model::ForwardPass>> passes(m.branches.size());
  std::vector<double> x;
  for (std::size_t b = 0; b < m.branches.size(); ++b) {
    if (ex.inputs[b]) {
      passes[b] = model::forward(m.branches[b], *ex.inputs[b]);
      const auto& hidden = passes[b]->lstm.hidden;
      const auto last = hidden.row(hidden.rows() - 1);
      x.insert(x.end(), last.begin(), last.end());
    } else {
      x.insert(x.end(), m.branches[b].shape.hidden, 0.0);
    }
  }
  const std::size_t dim = x.size(), n = m.num_classes;
  const HeadOutputs h = dense_heads(x, m.head, n);
  const std::vector<double> p = softmax(h.logits);
  const std::array<double, 2> target{ex.arousal, ex.valence};

  FusionLossGrad out;
  out.grads = zero_like(m);
  out.loss = -std::log(p[ex.label]);
  std::array<double, 2> dr{};
  for (std::size_t r = 0; r < 2; ++r) {
    const double diff = h.regression[r] - target[r];
    out.loss += regression_weight * diff * diff;
    dr[r] = 2.0 * regression_weight * diff;
  }

  std::vector<double> dx(dim, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const double dz = p[k] - (k == ex.label ? 1.0 : 0.0);
    out.grads.head.class_b[k] += dz;
    for (std::size_t j = 0; j < dim; ++j) {
      out.grads.head.class_w[k * dim + j] += dz * x[j];
      dx[j] += m.head.class_w[k * dim + j] * dz;
    }
  }
  for (std::size_t r = 0; r < 2; ++r) {
    out.grads.head.reg_b[r] += dr[r];
    for (std::size_t j = 0; j < dim; ++j) {
      out.grads.head.reg_w[r * dim + j] += dr[r] * x[j];
      dx[j] += m.head.reg_w[r * dim + j] * dr[r];
    }
  }

  if (train_branches) {
    std::size_t offset = 0;
    for (std::size_t b = 0; b < m.branches.size(); ++b) {
      const std::size_t hdim = m.branches[b].shape.hidden;
      if (passes[b]) {
        const auto& pass = *passes[b];
        Matrix grad_hidden(pass.lstm.hidden.rows(), hdim);
        for (std::size_t j = 0; j < hdim; ++j) grad_hidden(grad_hidden.rows() - 1, j) = dx[offset + j];
        model::backward_from_hidden(m.branches[b], pass, grad_hidden, out.grads.branches[b]);
      }
      offset += hdim;
    }
  }
  return out;
}

FusionTrainResult train_fusion(const FusionConfig& config, FusionModel initial, const std::vector<FusionExample>& data) {
  if (data.empty()) throw Error(ErrorKind::EmptyInput, "fusion training set is empty");
  if (!(config.learning_rate >= 0.0) || config.batch_size == 0) {
    throw Error(ErrorKind::Validation, "invalid fusion training config");
  }
  for (const auto& ex : data) check_example(initial, ex);

  FusionTrainResult result{std::move(initial), {}};
  std::mt19937_64 rng(config.seed ^ 0x9E3779B97F4A7C15ull);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      std::vector<FusionLossGrad> parts(end - begin);
      std::vector<std::exception_ptr> errors(end - begin);
#pragma omp parallel for schedule(dynamic)
      for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(end - begin); ++i) {
        const auto k = static_cast<std::size_t>(i);
        try {
          parts[k] = fusion_backward(result.model, data[order[begin + k]], config.regression_weight,
                                     config.train_branches);
        } catch (...) {
          errors[k] = std::current_exception();
        }
      }
      for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
      }
      FusionModel total = zero_like(result.model);
      for (const auto& part : parts) {
        epoch_loss += part.loss;
        add_model(total, part.grads);
      }
      const double scale = config.learning_rate / static_cast<double>(end - begin);
      if (config.train_branches) {
        for (std::size_t b = 0; b < total.branches.size(); ++b) sgd_step(result.model.branches[b], total.branches[b], scale);
      }
      auto step = [scale](std::vector<double>& p, const std::vector<double>& g) {
        for (std::size_t i = 0; i < p.size(); ++i) p[i] -= scale * g[i];
      };
      step(result.model.head.class_w, total.head.class_w);
      step(result.model.head.class_b, total.head.class_b);
      step(result.model.head.reg_w, total.head.reg_w);
      step(result.model.head.reg_b, total.head.reg_b);
    }
    if (!std::isfinite(epoch_loss)) {
      throw Error(ErrorKind::Numeric, "training loss became non-finite in epoch " + std::to_string(epoch));
    }
    result.loss_trace.push_back(epoch_loss / static_cast<double>(data.size()));
  }
  return result;
}

IntervalOutput predict_fused(const FusionModel& m, const std::vector<std::optional<model::Sequence>>& inputs) {
  if (inputs.size() != m.branches.size()) throw Error(ErrorKind::Dimension, "modality slot count mismatch");
  return fuse(branch_embeddings(m, inputs), m.head, m.num_classes);
}

}  // namespace emoseq::fusion
