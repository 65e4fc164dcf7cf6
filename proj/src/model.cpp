#include "emoseq/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "emoseq/error.hpp"
#include "emoseq/frames.hpp"
#include "emoseq/kernels.hpp"

namespace emoseq::model {
namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

kernels::ConvShape conv1_shape(const ModelShape& s) { return {kFrameChannels, s.conv1_channels, kBands}; }
kernels::ConvShape conv2_shape(const ModelShape& s) {
  return {s.conv1_channels, s.conv2_channels, conv1_shape(s).out_size()};
}

// y += W x for W stored [rows][cols].
void gemv_add(std::span<const double> w, std::size_t rows, std::size_t cols, std::span<const double> x,
              std::span<double> y) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* wr = w.data() + r * cols;
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * x[c];
    y[r] += acc;
  }
}

// y += W^T g
void gemv_t_add(std::span<const double> w, std::size_t rows, std::size_t cols, std::span<const double> g,
                std::span<double> y) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* wr = w.data() + r * cols;
    const double gr = g[r];
    for (std::size_t c = 0; c < cols; ++c) y[c] += wr[c] * gr;
  }
}

// W += g x^T
void outer_add(std::span<double> w, std::size_t rows, std::size_t cols, std::span<const double> g,
               std::span<const double> x) {
  for (std::size_t r = 0; r < rows; ++r) {
    double* wr = w.data() + r * cols;
    const double gr = g[r];
    for (std::size_t c = 0; c < cols; ++c) wr[c] += gr * x[c];
  }
}

}  // namespace

LossMode parse_loss_mode(const std::string& name) {
  if (name == "framewise_ce") return LossMode::FramewiseCe;
  if (name == "ctc") return LossMode::Ctc;
  throw Error(ErrorKind::Validation, "unknown loss mode '" + name + "' (expected framewise_ce or ctc)");
}

const char* to_string(LossMode mode) noexcept { return mode == LossMode::Ctc ? "ctc" : "framewise_ce"; }

std::size_t ModelShape::input_size() const noexcept { return use_encoder ? kFrameSize : embed_dim; }
std::size_t ModelShape::conv1_size() const noexcept { return conv1_shape(*this).out_size(); }
std::size_t ModelShape::conv2_size() const noexcept { return conv2_shape(*this).out_size(); }

std::vector<NamedTensor> tensors(SeqParams& p) {
  std::vector<NamedTensor> out;
  if (p.shape.use_encoder) {
    out.push_back({"encoder.conv1_w", p.encoder.conv1_w});
    out.push_back({"encoder.conv1_b", p.encoder.conv1_b});
    out.push_back({"encoder.conv2_w", p.encoder.conv2_w});
    out.push_back({"encoder.conv2_b", p.encoder.conv2_b});
    out.push_back({"encoder.dense_w", p.encoder.dense_w});
    out.push_back({"encoder.dense_b", p.encoder.dense_b});
  }
  out.push_back({"lstm.w_input", p.lstm.w_input});
  out.push_back({"lstm.w_recurrent", p.lstm.w_recurrent});
  out.push_back({"lstm.bias", p.lstm.bias});
  out.push_back({"head.class_w", p.head.class_w});
  out.push_back({"head.class_b", p.head.class_b});
  out.push_back({"head.reg_w", p.head.reg_w});
  out.push_back({"head.reg_b", p.head.reg_b});
  return out;
}

std::vector<ConstNamedTensor> tensors(const SeqParams& p) {
  std::vector<ConstNamedTensor> out;
  for (auto& t : tensors(const_cast<SeqParams&>(p))) out.push_back({t.name, t.values});
  return out;
}

SeqParams zero_params(const ModelShape& s) {
  SeqParams p;
  p.shape = s;
  if (s.use_encoder) {
    p.encoder.conv1_w.assign(conv1_shape(s).weight_count(), 0.0);
    p.encoder.conv1_b.assign(s.conv1_channels, 0.0);
    p.encoder.conv2_w.assign(conv2_shape(s).weight_count(), 0.0);
    p.encoder.conv2_b.assign(s.conv2_channels, 0.0);
    p.encoder.dense_w.assign(s.embed_dim * s.flat_size(), 0.0);
    p.encoder.dense_b.assign(s.embed_dim, 0.0);
  }
  p.lstm.w_input.assign(4 * s.hidden * s.embed_dim, 0.0);
  p.lstm.w_recurrent.assign(4 * s.hidden * s.hidden, 0.0);
  p.lstm.bias.assign(4 * s.hidden, 0.0);
  p.head.class_w.assign(s.outputs() * s.hidden, 0.0);
  p.head.class_b.assign(s.outputs(), 0.0);
  p.head.reg_w.assign(2 * s.hidden, 0.0);
  p.head.reg_b.assign(2, 0.0);
  return p;
}

SeqParams init_params(const ModelShape& shape, std::uint64_t seed) {
  if (shape.embed_dim == 0 || shape.hidden == 0 || shape.num_classes == 0) {
    throw Error(ErrorKind::Validation, "model dimensions must be positive");
  }
  if (shape.use_encoder && (shape.conv1_channels == 0 || shape.conv2_channels == 0)) {
    throw Error(ErrorKind::Validation, "encoder channel widths must be positive");
  }
  SeqParams p = zero_params(shape);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-0.1, 0.1);
  for (auto& t : tensors(p)) {
    for (double& v : t.values) v = dist(rng);
  }
  return p;
}

void validate_input(const ModelShape& shape, const Sequence& input) {
  if (input.empty()) throw Error(ErrorKind::EmptyInput, "empty input sequence");
  for (const auto& step : input) {
    if (step.size() != shape.input_size()) {
      throw Error(ErrorKind::Dimension, "input step has " + std::to_string(step.size()) + " values, model expects " +
                                            std::to_string(shape.input_size()));
    }
  }
}

// --- encoder ---------------------------------------------------------------

EncoderTrace encode_frame_traced(const SeqParams& p, std::span<const double> frame) {
  const ModelShape& s = p.shape;
  if (!s.use_encoder) throw Error(ErrorKind::Validation, "model has no frame encoder");
  if (frame.size() != kFrameSize) {
    throw Error(ErrorKind::Dimension, "frame has " + std::to_string(frame.size()) + " values, expected 3x40x40");
  }
  const auto c1 = conv1_shape(s), c2 = conv2_shape(s);
  EncoderTrace tr;
  tr.input.assign(frame.begin(), frame.end());
  tr.conv1.resize(c1.output_count());
  kernels::conv2d_forward(c1, tr.input, p.encoder.conv1_w, p.encoder.conv1_b, tr.conv1);
  for (double& v : tr.conv1) v = std::tanh(v);
  tr.conv2.resize(c2.output_count());
  kernels::conv2d_forward(c2, tr.conv1, p.encoder.conv2_w, p.encoder.conv2_b, tr.conv2);
  for (double& v : tr.conv2) v = std::tanh(v);
  tr.embedding = p.encoder.dense_b;
  gemv_add(p.encoder.dense_w, s.embed_dim, s.flat_size(), tr.conv2, tr.embedding);
  for (double& v : tr.embedding) v = std::tanh(v);
  return tr;
}

std::vector<double> encode_frame(const SeqParams& params, std::span<const double> frame) {
  return encode_frame_traced(params, frame).embedding;
}

void encoder_backward(const SeqParams& p, const EncoderTrace& tr, std::span<const double> grad_embedding,
                      EncoderParams& g) {
  const ModelShape& s = p.shape;
  const auto c1 = conv1_shape(s), c2 = conv2_shape(s);

  std::vector<double> d_dense(s.embed_dim);
  for (std::size_t i = 0; i < s.embed_dim; ++i) {
    d_dense[i] = grad_embedding[i] * (1.0 - tr.embedding[i] * tr.embedding[i]);
  }
  outer_add(g.dense_w, s.embed_dim, s.flat_size(), d_dense, tr.conv2);
  for (std::size_t i = 0; i < s.embed_dim; ++i) g.dense_b[i] += d_dense[i];

  std::vector<double> d_conv2(s.flat_size(), 0.0);
  gemv_t_add(p.encoder.dense_w, s.embed_dim, s.flat_size(), d_dense, d_conv2);
  for (std::size_t i = 0; i < d_conv2.size(); ++i) d_conv2[i] *= 1.0 - tr.conv2[i] * tr.conv2[i];

  std::vector<double> d_conv1(c1.output_count());
  kernels::conv2d_backward(c2, tr.conv1, p.encoder.conv2_w, d_conv2, d_conv1, g.conv2_w, g.conv2_b);
  for (std::size_t i = 0; i < d_conv1.size(); ++i) d_conv1[i] *= 1.0 - tr.conv1[i] * tr.conv1[i];

  kernels::conv2d_backward(c1, tr.input, p.encoder.conv1_w, d_conv1, {}, g.conv1_w, g.conv1_b);
}

// --- lstm ------------------------------------------------------------------

LstmTrace lstm_continue(const LstmParams& p, std::size_t h, const std::vector<std::vector<double>>& xs,
                        std::span<const double> h0, std::span<const double> c0) {
  const std::size_t steps = xs.size();
  const std::size_t d = steps == 0 ? 0 : xs.front().size();
  if (p.w_input.size() != 4 * h * d) throw Error(ErrorKind::Dimension, "lstm input width mismatch");
  LstmTrace tr{Matrix(steps, 4 * h), Matrix(steps, h), Matrix(steps, h)};
  std::vector<double> h_prev(h0.begin(), h0.end()), c_prev(c0.begin(), c0.end());
  std::vector<double> a(4 * h);
  for (std::size_t t = 0; t < steps; ++t) {
    std::copy(p.bias.begin(), p.bias.end(), a.begin());
    gemv_add(p.w_input, 4 * h, d, xs[t], a);
    gemv_add(p.w_recurrent, 4 * h, h, h_prev, a);
    auto gates = tr.gates.row(t);
    for (std::size_t j = 0; j < h; ++j) {
      const double i = sigmoid(a[j]);
      const double f = sigmoid(a[h + j]);
      const double o = sigmoid(a[2 * h + j]);
      const double g = std::tanh(a[3 * h + j]);
      const double c = f * c_prev[j] + i * g;
      gates[j] = i;
      gates[h + j] = f;
      gates[2 * h + j] = o;
      gates[3 * h + j] = g;
      tr.cells(t, j) = c;
      tr.hidden(t, j) = o * std::tanh(c);
    }
    for (std::size_t j = 0; j < h; ++j) {
      h_prev[j] = tr.hidden(t, j);
      c_prev[j] = tr.cells(t, j);
    }
  }
  return tr;
}

LstmTrace lstm_forward(const LstmParams& p, std::size_t h, const std::vector<std::vector<double>>& xs) {
  if (xs.empty()) throw Error(ErrorKind::EmptyInput, "empty lstm input");
  const std::vector<double> zeros(h, 0.0);
  return lstm_continue(p, h, xs, zeros, zeros);
}

std::vector<std::vector<double>> lstm_backward(const LstmParams& p, std::size_t h,
                                               const std::vector<std::vector<double>>& xs, const LstmTrace& tr,
                                               const Matrix& grad_hidden, LstmParams& g) {
  const std::size_t steps = xs.size();
  const std::size_t d = xs.front().size();
  std::vector<std::vector<double>> dxs(steps, std::vector<double>(d, 0.0));
  std::vector<double> dh_next(h, 0.0), dc_next(h, 0.0), da(4 * h);
  const std::vector<double> zeros(h, 0.0);

  for (std::size_t t = steps; t-- > 0;) {
    const auto gates = tr.gates.row(t);
    const std::span<const double> c_prev = t > 0 ? tr.cells.row(t - 1) : std::span<const double>(zeros);
    const std::span<const double> h_prev = t > 0 ? tr.hidden.row(t - 1) : std::span<const double>(zeros);
    for (std::size_t j = 0; j < h; ++j) {
      const double i = gates[j], f = gates[h + j], o = gates[2 * h + j], gg = gates[3 * h + j];
      const double tc = std::tanh(tr.cells(t, j));
      const double dh = grad_hidden(t, j) + dh_next[j];
      const double dc = dc_next[j] + dh * o * (1.0 - tc * tc);
      da[j] = dc * gg * i * (1.0 - i);
      da[h + j] = dc * c_prev[j] * f * (1.0 - f);
      da[2 * h + j] = dh * tc * o * (1.0 - o);
      da[3 * h + j] = dc * i * (1.0 - gg * gg);
      dc_next[j] = dc * f;
    }
    outer_add(g.w_input, 4 * h, d, da, xs[t]);
    outer_add(g.w_recurrent, 4 * h, h, da, h_prev);
    for (std::size_t k = 0; k < 4 * h; ++k) g.bias[k] += da[k];
    gemv_t_add(p.w_input, 4 * h, d, da, dxs[t]);
    std::fill(dh_next.begin(), dh_next.end(), 0.0);
    gemv_t_add(p.w_recurrent, 4 * h, h, da, dh_next);
  }
  return dxs;
}

// --- heads -----------------------------------------------------------------

Matrix class_logits(const HeadParams& head, std::size_t outputs, const Matrix& hidden) {
  const std::size_t h = hidden.cols();
  if (head.class_w.size() != outputs * h) throw Error(ErrorKind::Dimension, "head width mismatch");
  Matrix z(hidden.rows(), outputs);
  for (std::size_t t = 0; t < hidden.rows(); ++t) {
    auto row = z.row(t);
    std::copy(head.class_b.begin(), head.class_b.end(), row.begin());
    gemv_add(head.class_w, outputs, h, hidden.row(t), row);
  }
  return z;
}

ctc::PosteriorMatrix classify_frames(const HeadParams& head, std::size_t outputs, const Matrix& hidden) {
  if (hidden.rows() == 0) throw Error(ErrorKind::EmptyInput, "no hidden states to classify");
  Matrix y = ctc::log_softmax_rows(class_logits(head, outputs, hidden));
  for (double& v : y.data()) v = std::exp(v);
  return ctc::PosteriorMatrix(std::move(y));
}

std::array<double, 2> regress(const HeadParams& head, std::span<const double> final_hidden) {
  std::array<double, 2> r{head.reg_b[0], head.reg_b[1]};
  gemv_add(head.reg_w, 2, final_hidden.size(), final_hidden, r);
  return r;
}

// --- full model ------------------------------------------------------------

Target Target::for_interval(std::size_t emotion, std::size_t frames, double arousal, double valence) {
  Target t;
  t.frame_labels.assign(frames, emotion);
  t.label = {emotion};
  t.has_regression = true;
  t.regression = {arousal, valence};
  return t;
}

ForwardPass forward(const SeqParams& p, const Sequence& input) {
  validate_input(p.shape, input);
  ForwardPass pass;
  if (p.shape.use_encoder) {
    pass.encoder.reserve(input.size());
    for (const auto& frame : input) {
      pass.encoder.push_back(encode_frame_traced(p, frame));
      pass.embeddings.push_back(pass.encoder.back().embedding);
    }
  } else {
    pass.embeddings = input;
  }
  pass.lstm = lstm_forward(p.lstm, p.shape.hidden, pass.embeddings);
  pass.logits = class_logits(p.head, p.shape.outputs(), pass.lstm.hidden);
  pass.regression = regress(p.head, pass.lstm.hidden.row(input.size() - 1));
  return pass;
}

namespace {

// Loss and d loss / d logits, d loss / d regression outputs.
struct HeadLoss {
  double loss = 0.0;
  Matrix grad_logits;
  std::array<double, 2> grad_regression{};
};

HeadLoss head_loss(const ModelShape& s, const ForwardPass& pass, const Target& target, double regression_weight) {
  HeadLoss out;
  const std::size_t steps = pass.logits.rows();
  if (s.loss_mode == LossMode::FramewiseCe) {
    if (target.frame_labels.size() != steps) {
      throw Error(ErrorKind::Dimension, "framewise target length differs from sequence length");
    }
    const Matrix log_y = ctc::log_softmax_rows(pass.logits);
    out.grad_logits = Matrix(steps, s.outputs());
    for (std::size_t t = 0; t < steps; ++t) {
      const std::size_t k = target.frame_labels[t];
      if (k >= s.num_classes) throw Error(ErrorKind::InvalidLabel, "frame label out of range");
      out.loss -= log_y(t, k) / static_cast<double>(steps);
      for (std::size_t i = 0; i < s.outputs(); ++i) {
        out.grad_logits(t, i) = (std::exp(log_y(t, i)) - (i == k ? 1.0 : 0.0)) / static_cast<double>(steps);
      }
    }
  } else {
    auto lg = ctc::ctc_loss_and_grad(pass.logits, target.label, s.blank());
    out.loss = lg.loss;
    out.grad_logits = std::move(lg.grad);
  }
  if (target.has_regression && regression_weight != 0.0) {
    for (std::size_t j = 0; j < 2; ++j) {
      const double diff = pass.regression[j] - target.regression[j];
      out.loss += regression_weight * diff * diff;
      out.grad_regression[j] = 2.0 * regression_weight * diff;
    }
  }
  return out;
}

}  // namespace

double loss(const SeqParams& params, const Sequence& input, const Target& target, double regression_weight) {
  const ForwardPass pass = forward(params, input);
  return head_loss(params.shape, pass, target, regression_weight).loss;
}

void backward_from_hidden(const SeqParams& p, const ForwardPass& pass, const Matrix& grad_hidden, SeqParams& g) {
  const auto dxs = lstm_backward(p.lstm, p.shape.hidden, pass.embeddings, pass.lstm, grad_hidden, g.lstm);
  if (p.shape.use_encoder) {
    for (std::size_t t = 0; t < pass.encoder.size(); ++t) encoder_backward(p, pass.encoder[t], dxs[t], g.encoder);
  }
}

LossGrad backward(const SeqParams& p, const Sequence& input, const Target& target, double regression_weight) {
  const ModelShape& s = p.shape;
  const ForwardPass pass = forward(p, input);
  const HeadLoss hl = head_loss(s, pass, target, regression_weight);

  LossGrad out;
  out.loss = hl.loss;
  out.grads = zero_params(s);
  HeadParams& gh = out.grads.head;
  const std::size_t steps = input.size(), h = s.hidden, n = s.outputs();

  Matrix grad_hidden(steps, h);
  for (std::size_t t = 0; t < steps; ++t) {
    const auto dz = hl.grad_logits.row(t);
    outer_add(gh.class_w, n, h, dz, pass.lstm.hidden.row(t));
    for (std::size_t i = 0; i < n; ++i) gh.class_b[i] += dz[i];
    gemv_t_add(p.head.class_w, n, h, dz, grad_hidden.row(t));
  }
  const auto last = pass.lstm.hidden.row(steps - 1);
  outer_add(gh.reg_w, 2, h, hl.grad_regression, last);
  gh.reg_b[0] += hl.grad_regression[0];
  gh.reg_b[1] += hl.grad_regression[1];
  gemv_t_add(p.head.reg_w, 2, h, hl.grad_regression, grad_hidden.row(steps - 1));

  backward_from_hidden(p, pass, grad_hidden, out.grads);
  return out;
}

}  // namespace emoseq::model
