#pragma once

#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "emoseq/matrix.hpp"

namespace emoseq::ctc {

inline constexpr double kLogZero = -std::numeric_limits<double>::infinity();
inline constexpr std::size_t kMaxEnumerationLength = 12;

// log(exp(a) + exp(b)) without overflow; either side may be kLogZero.
double log_add(double a, double b);

// Symbol table: N classes, one of which is the blank "-".
class Alphabet {
 public:
  // Emotions keep their order; the blank is appended as the last index.
  explicit Alphabet(std::vector<std::string> emotions);
  Alphabet(std::vector<std::string> symbols, std::size_t blank);

  std::size_t size() const noexcept { return symbols_.size(); }
  std::size_t blank() const noexcept { return blank_; }
  const std::string& symbol(std::size_t index) const { return symbols_.at(index); }
  std::size_t index_of(const std::string& symbol) const;
  std::vector<std::size_t> emotion_indices() const;

 private:
  std::vector<std::string> symbols_;
  std::size_t blank_;
};

// T x N matrix of per-frame class probabilities; y(t, i) is the probability
// that frame t carries class i. Rows sum to one.
class PosteriorMatrix {
 public:
  explicit PosteriorMatrix(Matrix y, double tolerance = 1e-9);

  std::size_t frames() const noexcept { return y_.rows(); }
  std::size_t classes() const noexcept { return y_.cols(); }
  double operator()(std::size_t t, std::size_t i) const { return y_(t, i); }
  const Matrix& matrix() const noexcept { return y_; }

 private:
  Matrix y_;
};

using Path = std::vector<std::size_t>;      // one class index per frame
using LabelSeq = std::vector<std::size_t>;  // non-blank class indices

double path_log_probability(const PosteriorMatrix& y, const Path& path);
double path_probability(const PosteriorMatrix& y, const Path& path);

// Merge adjacent repeats, then drop blanks.
LabelSeq collapse(const Path& path, std::size_t blank);

// Shortest path length that can collapse to the label: one frame per symbol
// plus a separating blank between equal neighbours.
std::size_t min_frames(const LabelSeq& label);

// Every length-T path over `classes` symbols that collapses to `label`, in
// lexicographic order. Enumeration oracle; refuses T > 12.
std::vector<Path> expand_labelings(const LabelSeq& label, std::size_t frames, std::size_t classes,
                                   std::size_t blank);

double label_probability_bruteforce(const PosteriorMatrix& y, const LabelSeq& label, std::size_t blank);

struct ForwardResult {
  double probability = 0.0;
  double log_probability = kLogZero;
  Matrix log_alpha;  // T x (2|L|+1) over the blank-interleaved label
};

// Blank-interleaved extended label: - l1 - l2 - ... - lL -
std::vector<std::size_t> extend_label(const LabelSeq& label, std::size_t blank);

ForwardResult label_probability_forward(const PosteriorMatrix& y, const LabelSeq& label, std::size_t blank);

// log beta over the extended label; beta(t, s) excludes frame t's emission.
Matrix log_backward(const Matrix& log_y, const std::vector<std::size_t>& extended);
Matrix log_forward(const Matrix& log_y, const std::vector<std::size_t>& extended);

struct LossAndGrad {
  double loss = 0.0;  // -ln P(label | softmax(logits))
  Matrix grad;        // d loss / d logits, T x N
};

LossAndGrad ctc_loss_and_grad(const Matrix& logits, const LabelSeq& label, std::size_t blank);

// Row-wise log-softmax.
Matrix log_softmax_rows(const Matrix& logits);

struct BestPath {
  Path path;
  LabelSeq label;
};

// Per-frame argmax, ties to the lowest index, then collapse.
BestPath best_path_decode(const PosteriorMatrix& y, std::size_t blank);

struct ConstrainedDecode {
  std::size_t emotion = 0;
  double probability = 0.0;
  std::vector<double> per_class;  // P((e) | y) per class index, 0 at the blank
};

// Restricts the label to a single emotion e, whose paths are exactly
// -*e+-* (the E, -E, E-, -E- family), and returns the most probable e.
ConstrainedDecode constrained_emotion_decode(const PosteriorMatrix& y, std::size_t blank);

}  // namespace emoseq::ctc
