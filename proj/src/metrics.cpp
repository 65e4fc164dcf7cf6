#include "emoseq/metrics.hpp"

#include <json.hpp>

#include "emoseq/error.hpp"

namespace emoseq::metrics {

ConfusionMatrix::ConfusionMatrix(std::size_t classes) : classes_(classes), counts_(classes * classes, 0) {
  if (classes == 0) throw Error(ErrorKind::Validation, "confusion matrix needs at least one class");
}

ConfusionMatrix::ConfusionMatrix(std::size_t classes, std::vector<std::uint64_t> counts)
    : classes_(classes), counts_(std::move(counts)) {
  if (classes == 0 || counts_.size() != classes * classes) {
    throw Error(ErrorKind::Dimension, "confusion counts do not form a square matrix");
  }
}

void ConfusionMatrix::add(std::size_t truth, std::size_t predicted, std::uint64_t count) {
  if (truth >= classes_ || predicted >= classes_) throw Error(ErrorKind::InvalidLabel, "class index out of range");
  counts_[truth * classes_ + predicted] += count;
}

std::uint64_t ConfusionMatrix::total() const noexcept {
  std::uint64_t sum = 0;
  for (auto c : counts_) sum += c;
  return sum;
}

std::uint64_t ConfusionMatrix::row_total(std::size_t truth) const {
  std::uint64_t sum = 0;
  for (std::size_t p = 0; p < classes_; ++p) sum += at(truth, p);
  return sum;
}

std::uint64_t ConfusionMatrix::column_total(std::size_t predicted) const {
  std::uint64_t sum = 0;
  for (std::size_t t = 0; t < classes_; ++t) sum += at(t, predicted);
  return sum;
}

ConfusionMatrix confusion(const std::vector<std::size_t>& truth, const std::vector<std::size_t>& predicted,
                          std::size_t classes) {
  if (truth.size() != predicted.size()) throw Error(ErrorKind::Dimension, "truth and prediction lengths differ");
  ConfusionMatrix cm(classes);
  for (std::size_t i = 0; i < truth.size(); ++i) cm.add(truth[i], predicted[i]);
  return cm;
}

double unweighted_accuracy(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw Error(ErrorKind::EmptyInput, "confusion matrix is empty");
  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t k = 0; k < cm.classes(); ++k) {
    const auto n = cm.row_total(k);
    if (n == 0) continue;
    sum += static_cast<double>(cm.at(k, k)) / static_cast<double>(n);
    ++present;
  }
  return sum / static_cast<double>(present);
}

double macro_f1(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw Error(ErrorKind::EmptyInput, "confusion matrix is empty");
  double sum = 0.0;
  for (std::size_t k = 0; k < cm.classes(); ++k) {
    const auto tp = cm.at(k, k);
    const auto denom = cm.row_total(k) + cm.column_total(k);  // 2TP + FP + FN
    if (tp == 0 || denom == 0) continue;
    sum += 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
  }
  return sum / static_cast<double>(cm.classes());
}

double mse(const std::vector<double>& predictions, const std::vector<double>& targets) {
  if (predictions.size() != targets.size()) throw Error(ErrorKind::Dimension, "prediction and target lengths differ");
  if (predictions.empty()) throw Error(ErrorKind::EmptyInput, "no values for mse");
  double sum = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double d = predictions[i] - targets[i];
    sum += d * d;
  }
  return sum / static_cast<double>(predictions.size());
}

std::string to_json(const Report& r) {
  nlohmann::ordered_json j;
  j["unweighted_accuracy"] = r.unweighted_accuracy;
  j["macro_f1"] = r.macro_f1;
  j["mse_arousal"] = r.mse_arousal;
  j["mse_valence"] = r.mse_valence;
  auto rows = nlohmann::ordered_json::array();
  for (std::size_t t = 0; t < r.confusion.classes(); ++t) {
    auto row = nlohmann::ordered_json::array();
    for (std::size_t p = 0; p < r.confusion.classes(); ++p) row.push_back(r.confusion.at(t, p));
    rows.push_back(std::move(row));
  }
  j["confusion"] = std::move(rows);
  return j.dump(2) + "\n";
}

}  // namespace emoseq::metrics
