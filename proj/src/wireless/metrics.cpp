#include "phyadv/wireless/metrics.hpp"

#include <numeric>
#include <string>

#include "phyadv/errors.hpp"

namespace phyadv::wireless {

namespace {
template <typename T>
void check_pair(std::span<const T> a, std::span<const T> b) {
  if (a.empty()) throw ConfigError("metric over an empty sequence");
  if (a.size() != b.size())
    throw ConfigError("metric inputs differ in length: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
}
}  // namespace

double bler(std::span<const int> decoded, std::span<const int> truth) { return 1.0 - accuracy(decoded, truth); }

double accuracy(std::span<const int> predicted, std::span<const int> truth) {
  check_pair(predicted, truth);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

double bit_error_rate(std::span<const std::uint8_t> decoded, std::span<const std::uint8_t> truth) {
  check_pair(decoded, truth);
  std::size_t errors = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) errors += (decoded[i] & 1u) != (truth[i] & 1u);
  return static_cast<double>(errors) / static_cast<double>(truth.size());
}

ConfusionMatrix ConfusionMatrix::from(std::span<const int> predicted, std::span<const int> truth, std::size_t classes) {
  check_pair(predicted, truth);
  ConfusionMatrix cm(classes);
  for (std::size_t i = 0; i < truth.size(); ++i) cm.add(truth[i], predicted[i]);
  return cm;
}

void ConfusionMatrix::add(int truth, int predicted) {
  if (truth < 0 || predicted < 0 || static_cast<std::size_t>(truth) >= classes ||
      static_cast<std::size_t>(predicted) >= classes)
    throw ConfigError("class index out of range in confusion matrix");
  ++counts[static_cast<std::size_t>(truth) * classes + static_cast<std::size_t>(predicted)];
}

std::size_t ConfusionMatrix::total() const noexcept { return std::accumulate(counts.begin(), counts.end(), std::size_t{0}); }

std::vector<ClassMetrics> per_class_metrics(const ConfusionMatrix& cm) {
  std::vector<ClassMetrics> out(cm.classes);
  for (std::size_t c = 0; c < cm.classes; ++c) {
    auto& m = out[c];
    m.true_positives = cm.at(c, c);
    for (std::size_t o = 0; o < cm.classes; ++o) {
      if (o == c) continue;
      m.false_positives += cm.at(o, c);
      m.false_negatives += cm.at(c, o);
    }
    const auto predicted = m.true_positives + m.false_positives;
    const auto actual = m.true_positives + m.false_negatives;
    m.precision = predicted ? static_cast<double>(m.true_positives) / static_cast<double>(predicted) : 0.0;
    m.recall = actual ? static_cast<double>(m.true_positives) / static_cast<double>(actual) : 0.0;
    m.f1 = (m.precision + m.recall) > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  }
  return out;
}

MetricSummary summarize(const ConfusionMatrix& cm) {
  MetricSummary s;
  const auto total = cm.total();
  if (total == 0) throw ConfigError("empty confusion matrix");
  std::size_t hits = 0;
  for (std::size_t c = 0; c < cm.classes; ++c) hits += cm.at(c, c);
  s.accuracy = static_cast<double>(hits) / static_cast<double>(total);
  const auto per = per_class_metrics(cm);
  for (const auto& m : per) {
    s.macro_precision += m.precision;
    s.macro_recall += m.recall;
    s.macro_f1 += m.f1;
    s.false_positives += m.false_positives;
    s.false_negatives += m.false_negatives;
  }
  const double k = static_cast<double>(cm.classes);
  s.macro_precision /= k;
  s.macro_recall /= k;
  s.macro_f1 /= k;
  return s;
}

}  // namespace phyadv::wireless
