#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace phyadv::wireless {

/// Fraction of mismatched blocks. Throws ConfigError on empty or unequal inputs.
double bler(std::span<const int> decoded, std::span<const int> truth);
double accuracy(std::span<const int> predicted, std::span<const int> truth);
double bit_error_rate(std::span<const std::uint8_t> decoded, std::span<const std::uint8_t> truth);

/// counts[truth * classes + predicted]
struct ConfusionMatrix {
  std::size_t classes = 0;
  std::vector<std::size_t> counts;

  explicit ConfusionMatrix(std::size_t n = 0) : classes(n), counts(n * n, 0) {}
  static ConfusionMatrix from(std::span<const int> predicted, std::span<const int> truth, std::size_t classes);

  void add(int truth, int predicted);
  std::size_t at(std::size_t truth, std::size_t predicted) const { return counts[truth * classes + predicted]; }
  std::size_t total() const noexcept;
};

struct ClassMetrics {
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;
  double precision = 0.0;  // 0 when the class is never predicted
  double recall = 0.0;     // 0 when the class never occurs
  double f1 = 0.0;
};

std::vector<ClassMetrics> per_class_metrics(const ConfusionMatrix& cm);

struct MetricSummary {
  double accuracy = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  std::size_t false_positives = 0;  // summed over classes (equals total errors)
  std::size_t false_negatives = 0;
};

MetricSummary summarize(const ConfusionMatrix& cm);

}  // namespace phyadv::wireless
