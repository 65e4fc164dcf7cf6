#include "emoseq/ctc.hpp"

#include <algorithm>
#include <cmath>

#include "emoseq/error.hpp"

namespace emoseq::ctc {

double log_add(double a, double b) {
  if (a == kLogZero) return b;
  if (b == kLogZero) return a;
  return a > b ? a + std::log1p(std::exp(b - a)) : b + std::log1p(std::exp(a - b));
}

Alphabet::Alphabet(std::vector<std::string> emotions) : symbols_(std::move(emotions)), blank_(0) {
  symbols_.push_back("-");
  blank_ = symbols_.size() - 1;
  if (symbols_.size() < 2) throw Error(ErrorKind::Validation, "alphabet needs at least one emotion");
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    for (std::size_t j = i + 1; j < symbols_.size(); ++j) {
      if (symbols_[i] == symbols_[j]) throw Error(ErrorKind::Validation, "duplicate symbol " + symbols_[i]);
    }
  }
}

Alphabet::Alphabet(std::vector<std::string> symbols, std::size_t blank) : symbols_(std::move(symbols)), blank_(blank) {
  if (symbols_.size() < 2) throw Error(ErrorKind::Validation, "alphabet needs at least two symbols");
  if (blank_ >= symbols_.size()) throw Error(ErrorKind::Validation, "blank index out of range");
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    for (std::size_t j = i + 1; j < symbols_.size(); ++j) {
      if (symbols_[i] == symbols_[j]) throw Error(ErrorKind::Validation, "duplicate symbol " + symbols_[i]);
    }
  }
}

std::size_t Alphabet::index_of(const std::string& symbol) const {
  const auto it = std::find(symbols_.begin(), symbols_.end(), symbol);
  if (it == symbols_.end()) throw Error(ErrorKind::InvalidLabel, "unknown symbol " + symbol);
  return static_cast<std::size_t>(it - symbols_.begin());
}

std::vector<std::size_t> Alphabet::emotion_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    if (i != blank_) out.push_back(i);
  }
  return out;
}

PosteriorMatrix::PosteriorMatrix(Matrix y, double tolerance) : y_(std::move(y)) {
  if (y_.cols() < 2) throw Error(ErrorKind::Dimension, "posterior matrix needs at least two classes");
  for (std::size_t t = 0; t < y_.rows(); ++t) {
    double sum = 0.0;
    for (double v : y_.row(t)) {
      if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorKind::Validation, "posterior entry outside [0,1]");
      sum += v;
    }
    if (std::abs(sum - 1.0) > tolerance) {
      throw Error(ErrorKind::Validation, "posterior row " + std::to_string(t) + " does not sum to 1");
    }
  }
}

double path_log_probability(const PosteriorMatrix& y, const Path& path) {
  if (path.size() != y.frames()) throw Error(ErrorKind::Dimension, "path length differs from frame count");
  double acc = 0.0;
  for (std::size_t t = 0; t < path.size(); ++t) {
    if (path[t] >= y.classes()) throw Error(ErrorKind::Dimension, "path symbol out of range");
    const double p = y(t, path[t]);
    if (p <= 0.0) return kLogZero;
    acc += std::log(p);
  }
  return acc;
}

double path_probability(const PosteriorMatrix& y, const Path& path) {
  return std::exp(path_log_probability(y, path));
}

LabelSeq collapse(const Path& path, std::size_t blank) {
  LabelSeq out;
  for (std::size_t t = 0; t < path.size(); ++t) {
    if (t > 0 && path[t] == path[t - 1]) continue;
    if (path[t] != blank) out.push_back(path[t]);
  }
  return out;
}

std::size_t min_frames(const LabelSeq& label) {
  std::size_t n = label.size();
  for (std::size_t i = 1; i < label.size(); ++i) {
    if (label[i] == label[i - 1]) ++n;
  }
  return n;
}

namespace {

void check_label(const LabelSeq& label, std::size_t classes, std::size_t blank) {
  for (std::size_t s : label) {
    if (s == blank) throw Error(ErrorKind::InvalidLabel, "label contains the blank symbol");
    if (s >= classes) throw Error(ErrorKind::InvalidLabel, "label symbol out of range");
  }
}

}  // namespace

namespace {

// collapse(path, blank) == label without building the collapsed sequence.
bool collapses_to(const Path& path, const LabelSeq& label, std::size_t blank) {
  std::size_t next = 0;
  for (std::size_t t = 0; t < path.size(); ++t) {
    const std::size_t s = path[t];
    if (s == blank || (t > 0 && path[t - 1] == s)) continue;
    if (next == label.size() || label[next] != s) return false;
    ++next;
  }
  return next == label.size();
}

}  // namespace

std::vector<Path> expand_labelings(const LabelSeq& label, std::size_t frames, std::size_t classes,
                                   std::size_t blank) {
  if (frames == 0) throw Error(ErrorKind::Validation, "path length must be at least 1");
  if (frames > kMaxEnumerationLength) {
    throw Error(ErrorKind::Refused, "enumeration limited to T <= " + std::to_string(kMaxEnumerationLength));
  }
  check_label(label, classes, blank);
  std::vector<Path> out;
  if (min_frames(label) > frames) return out;

  // Odometer over all classes^frames paths.
  Path path(frames, 0);
  while (true) {
    if (collapses_to(path, label, blank)) out.push_back(path);
    std::size_t t = frames;
    while (t > 0) {
      --t;
      if (++path[t] < classes) break;
      path[t] = 0;
      if (t == 0) return out;
    }
  }
}

double label_probability_bruteforce(const PosteriorMatrix& y, const LabelSeq& label, std::size_t blank) {
  double sum = 0.0;
  for (const Path& p : expand_labelings(label, y.frames(), y.classes(), blank)) sum += path_probability(y, p);
  return sum;
}

std::vector<std::size_t> extend_label(const LabelSeq& label, std::size_t blank) {
  std::vector<std::size_t> ext;
  ext.reserve(2 * label.size() + 1);
  ext.push_back(blank);
  for (std::size_t s : label) {
    ext.push_back(s);
    ext.push_back(blank);
  }
  return ext;
}

Matrix log_forward(const Matrix& log_y, const std::vector<std::size_t>& ext) {
  const std::size_t frames = log_y.rows(), states = ext.size();
  Matrix alpha(frames, states, kLogZero);
  if (frames == 0) return alpha;
  alpha(0, 0) = log_y(0, ext[0]);
  if (states > 1) alpha(0, 1) = log_y(0, ext[1]);
  for (std::size_t t = 1; t < frames; ++t) {
    for (std::size_t s = 0; s < states; ++s) {
      double acc = alpha(t - 1, s);
      if (s >= 1) acc = log_add(acc, alpha(t - 1, s - 1));
      if (s >= 2 && ext[s] != ext[s - 2]) acc = log_add(acc, alpha(t - 1, s - 2));
      alpha(t, s) = acc == kLogZero ? kLogZero : acc + log_y(t, ext[s]);
    }
  }
  return alpha;
}

Matrix log_backward(const Matrix& log_y, const std::vector<std::size_t>& ext) {
  const std::size_t frames = log_y.rows(), states = ext.size();
  Matrix beta(frames, states, kLogZero);
  if (frames == 0) return beta;
  beta(frames - 1, states - 1) = 0.0;
  if (states > 1) beta(frames - 1, states - 2) = 0.0;
  for (std::size_t t = frames - 1; t-- > 0;) {
    for (std::size_t s = 0; s < states; ++s) {
      double acc = beta(t + 1, s) + log_y(t + 1, ext[s]);
      if (s + 1 < states) acc = log_add(acc, beta(t + 1, s + 1) + log_y(t + 1, ext[s + 1]));
      if (s + 2 < states && ext[s + 2] != ext[s]) {
        acc = log_add(acc, beta(t + 1, s + 2) + log_y(t + 1, ext[s + 2]));
      }
      beta(t, s) = acc;
    }
  }
  return beta;
}

namespace {

Matrix log_of(const Matrix& y) {
  Matrix out(y.rows(), y.cols());
  for (std::size_t i = 0; i < y.data().size(); ++i) {
    const double v = y.data()[i];
    out.data()[i] = v > 0.0 ? std::log(v) : kLogZero;
  }
  return out;
}

double final_log_probability(const Matrix& alpha) {
  const std::size_t last = alpha.rows() - 1, states = alpha.cols();
  double lp = alpha(last, states - 1);
  if (states > 1) lp = log_add(lp, alpha(last, states - 2));
  return lp;
}

}  // namespace

ForwardResult label_probability_forward(const PosteriorMatrix& y, const LabelSeq& label, std::size_t blank) {
  check_label(label, y.classes(), blank);
  ForwardResult r;
  const auto ext = extend_label(label, blank);
  if (y.frames() == 0) {
    r.probability = label.empty() ? 1.0 : 0.0;
    r.log_probability = label.empty() ? 0.0 : kLogZero;
    return r;
  }
  r.log_alpha = log_forward(log_of(y.matrix()), ext);
  r.log_probability = final_log_probability(r.log_alpha);
  r.probability = std::exp(r.log_probability);
  return r;
}

Matrix log_softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (std::size_t t = 0; t < logits.rows(); ++t) {
    const auto row = logits.row(t);
    const double m = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double v : row) sum += std::exp(v - m);
    const double lse = m + std::log(sum);
    for (std::size_t i = 0; i < row.size(); ++i) out(t, i) = row[i] - lse;
  }
  return out;
}

LossAndGrad ctc_loss_and_grad(const Matrix& logits, const LabelSeq& label, std::size_t blank) {
  for (double v : logits.data()) {
    if (!std::isfinite(v)) throw Error(ErrorKind::Numeric, "non-finite logit");
  }
  check_label(label, logits.cols(), blank);
  const std::size_t frames = logits.rows();
  if (frames == 0 || min_frames(label) > frames) {
    throw Error(ErrorKind::InfeasibleLabel, "label of length " + std::to_string(label.size()) +
                                                " cannot be emitted in " + std::to_string(frames) + " frames");
  }
  const Matrix log_y = log_softmax_rows(logits);
  const auto ext = extend_label(label, blank);
  const Matrix alpha = log_forward(log_y, ext);
  const Matrix beta = log_backward(log_y, ext);
  const double log_p = final_log_probability(alpha);
  if (log_p == kLogZero) throw Error(ErrorKind::InfeasibleLabel, "label probability underflowed to zero");

  LossAndGrad out;
  out.loss = -log_p;
  out.grad = Matrix(frames, logits.cols());
  std::vector<double> occupancy(logits.cols());
  for (std::size_t t = 0; t < frames; ++t) {
    std::fill(occupancy.begin(), occupancy.end(), kLogZero);
    for (std::size_t s = 0; s < ext.size(); ++s) {
      occupancy[ext[s]] = log_add(occupancy[ext[s]], alpha(t, s) + beta(t, s));
    }
    for (std::size_t k = 0; k < logits.cols(); ++k) {
      const double posterior = occupancy[k] == kLogZero ? 0.0 : std::exp(occupancy[k] - log_p);
      out.grad(t, k) = std::exp(log_y(t, k)) - posterior;
    }
  }
  return out;
}

BestPath best_path_decode(const PosteriorMatrix& y, std::size_t blank) {
  BestPath r;
  r.path.resize(y.frames());
  for (std::size_t t = 0; t < y.frames(); ++t) {
    const auto row = y.matrix().row(t);
    r.path[t] = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  r.label = collapse(r.path, blank);
  return r;
}

ConstrainedDecode constrained_emotion_decode(const PosteriorMatrix& y, std::size_t blank) {
  ConstrainedDecode r;
  r.per_class.assign(y.classes(), 0.0);
  bool first = true;
  for (std::size_t e = 0; e < y.classes(); ++e) {
    if (e == blank) continue;
    const double p = label_probability_forward(y, LabelSeq{e}, blank).probability;
    r.per_class[e] = p;
    if (first || p > r.probability) {
      r.emotion = e;
      r.probability = p;
      first = false;
    }
  }
  return r;
}

}  // namespace emoseq::ctc
