#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "emoseq/ctc.hpp"
#include "emoseq/matrix.hpp"

namespace emoseq::model {

enum class LossMode { FramewiseCe, Ctc };

LossMode parse_loss_mode(const std::string& name);
const char* to_string(LossMode mode) noexcept;

// One step per frame: either a flattened 3x40x40 spectrogram frame (encoder
// path) or a precomputed embedding of size embed_dim.
using Sequence = std::vector<std::vector<double>>;

struct ModelShape {
  bool use_encoder = true;
  std::size_t conv1_channels = 4;
  std::size_t conv2_channels = 8;
  std::size_t embed_dim = 16;
  std::size_t hidden = 16;
  std::size_t num_classes = 7;
  LossMode loss_mode = LossMode::FramewiseCe;

  // CTC adds the blank as the last output.
  std::size_t outputs() const noexcept { return num_classes + (loss_mode == LossMode::Ctc ? 1 : 0); }
  std::size_t blank() const noexcept { return num_classes; }
  std::size_t input_size() const noexcept;
  std::size_t conv1_size() const noexcept;  // 19
  std::size_t conv2_size() const noexcept;  // 9
  std::size_t flat_size() const noexcept { return conv2_channels * conv2_size() * conv2_size(); }

  friend bool operator==(const ModelShape&, const ModelShape&) = default;
};

// Two stride-2 3x3 tanh convolutions and a tanh dense layer.
struct EncoderParams {
  std::vector<double> conv1_w, conv1_b;  // [c1][3][3][3], [c1]
  std::vector<double> conv2_w, conv2_b;  // [c2][c1][3][3], [c2]
  std::vector<double> dense_w, dense_b;  // [d][c2*9*9], [d]
};

// Gate order in the stacked matrices: input, forget, output, candidate.
struct LstmParams {
  std::vector<double> w_input;      // [4h][d]
  std::vector<double> w_recurrent;  // [4h][h]
  std::vector<double> bias;         // [4h]
};

struct HeadParams {
  std::vector<double> class_w, class_b;  // [N][h], [N]
  std::vector<double> reg_w, reg_b;      // [2][h], [2]  (arousal, valence)
};

struct SeqParams {
  ModelShape shape;
  EncoderParams encoder;  // empty when !shape.use_encoder
  LstmParams lstm;
  HeadParams head;
};

// Named views over every parameter tensor, in a fixed order.
struct NamedTensor {
  std::string name;
  std::span<double> values;
};
struct ConstNamedTensor {
  std::string name;
  std::span<const double> values;
};
std::vector<NamedTensor> tensors(SeqParams& params);
std::vector<ConstNamedTensor> tensors(const SeqParams& params);

SeqParams zero_params(const ModelShape& shape);
// Uniform in [-0.1, 0.1] from a seeded generator.
SeqParams init_params(const ModelShape& shape, std::uint64_t seed);

// --- encoder ---------------------------------------------------------------

struct EncoderTrace {
  std::vector<double> input;
  std::vector<double> conv1;  // post-tanh
  std::vector<double> conv2;  // post-tanh
  std::vector<double> embedding;
};

std::vector<double> encode_frame(const SeqParams& params, std::span<const double> frame);
EncoderTrace encode_frame_traced(const SeqParams& params, std::span<const double> frame);
// Accumulates parameter gradients for d loss / d embedding.
void encoder_backward(const SeqParams& params, const EncoderTrace& trace, std::span<const double> grad_embedding,
                      EncoderParams& grads);

// --- lstm ------------------------------------------------------------------

struct LstmTrace {
  Matrix gates;   // T x 4h, post-activation
  Matrix cells;   // T x h
  Matrix hidden;  // T x h
};

// Zero initial state.
LstmTrace lstm_forward(const LstmParams& params, std::size_t hidden, const std::vector<std::vector<double>>& xs);

// Continues a recurrence from (h, c); used to check that stepping is
// equivalent to running the whole sequence.
LstmTrace lstm_continue(const LstmParams& params, std::size_t hidden, const std::vector<std::vector<double>>& xs,
                        std::span<const double> h0, std::span<const double> c0);

// grad_hidden is T x h (d loss / d h_t from outside the recurrence). Returns
// d loss / d x_t and accumulates into grads.
std::vector<std::vector<double>> lstm_backward(const LstmParams& params, std::size_t hidden,
                                               const std::vector<std::vector<double>>& xs, const LstmTrace& trace,
                                               const Matrix& grad_hidden, LstmParams& grads);

// --- heads -----------------------------------------------------------------

Matrix class_logits(const HeadParams& head, std::size_t outputs, const Matrix& hidden);
// Row softmax of the classification head.
ctc::PosteriorMatrix classify_frames(const HeadParams& head, std::size_t outputs, const Matrix& hidden);
std::array<double, 2> regress(const HeadParams& head, std::span<const double> final_hidden);

// --- full model ------------------------------------------------------------

struct Target {
  std::vector<std::size_t> frame_labels;  // framewise cross-entropy
  ctc::LabelSeq label;                    // ctc
  bool has_regression = false;
  std::array<double, 2> regression{};     // arousal, valence

  // A single emotion for every frame of an interval of `frames` steps.
  static Target for_interval(std::size_t emotion, std::size_t frames, double arousal, double valence);
};

struct ForwardPass {
  std::vector<EncoderTrace> encoder;
  std::vector<std::vector<double>> embeddings;
  LstmTrace lstm;
  Matrix logits;
  std::array<double, 2> regression{};
};

ForwardPass forward(const SeqParams& params, const Sequence& input);

struct LossGrad {
  double loss = 0.0;
  SeqParams grads;
};

// Classification loss (mean framewise cross-entropy or -ln P(label)) plus
// regression_weight * squared error on (arousal, valence).
double loss(const SeqParams& params, const Sequence& input, const Target& target, double regression_weight = 1.0);
LossGrad backward(const SeqParams& params, const Sequence& input, const Target& target,
                  double regression_weight = 1.0);

// Backpropagates an external gradient on the hidden states through the LSTM
// and encoder only (heads untouched). Used by the fusion model.
void backward_from_hidden(const SeqParams& params, const ForwardPass& pass, const Matrix& grad_hidden,
                          SeqParams& grads);

void validate_input(const ModelShape& shape, const Sequence& input);

}  // namespace emoseq::model
