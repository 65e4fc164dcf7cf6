#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace emoseq::metrics {

// Rows are true classes, columns predicted classes.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes);
  ConfusionMatrix(std::size_t classes, std::vector<std::uint64_t> counts);

  void add(std::size_t truth, std::size_t predicted, std::uint64_t count = 1);

  std::size_t classes() const noexcept { return classes_; }
  std::uint64_t at(std::size_t truth, std::size_t predicted) const { return counts_[truth * classes_ + predicted]; }
  std::uint64_t total() const noexcept;
  std::uint64_t row_total(std::size_t truth) const;
  std::uint64_t column_total(std::size_t predicted) const;

 private:
  std::size_t classes_;
  std::vector<std::uint64_t> counts_;
};

ConfusionMatrix confusion(const std::vector<std::size_t>& truth, const std::vector<std::size_t>& predicted,
                          std::size_t classes);

// Mean per-class recall over classes with at least one true example.
double unweighted_accuracy(const ConfusionMatrix& cm);

// Mean per-class F1 over every class; a class with no true positives scores 0.
double macro_f1(const ConfusionMatrix& cm);

double mse(const std::vector<double>& predictions, const std::vector<double>& targets);

struct Report {
  double unweighted_accuracy = 0.0;
  double macro_f1 = 0.0;
  double mse_arousal = 0.0;
  double mse_valence = 0.0;
  ConfusionMatrix confusion{1};
};

// {"unweighted_accuracy": ..., "macro_f1": ..., "mse_arousal": ..., "mse_valence": ..., "confusion": [[...]]}
std::string to_json(const Report& report);

}  // namespace emoseq::metrics
