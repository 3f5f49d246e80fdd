#include "phyadv/nn/loss.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <string>

#include "phyadv/errors.hpp"

namespace phyadv::nn {

namespace {

struct Rows {
  std::size_t rows;
  std::size_t classes;
};

Rows check(const Tensor& t, std::span<const int> labels) {
  if (t.rank() != 1 && t.rank() != 2) throw ConfigError("cross-entropy expects [K] or [B,K]");
  const Rows r{t.rank() == 1 ? 1 : t.dim(0), t.shape().back()};
  if (labels.size() != r.rows)
    throw ConfigError("cross-entropy got " + std::to_string(labels.size()) + " labels for " + std::to_string(r.rows) +
                      " rows");
  for (int y : labels)
    if (y < 0 || static_cast<std::size_t>(y) >= r.classes)
      throw ConfigError("label " + std::to_string(y) + " out of range for " + std::to_string(r.classes) + " classes");
  return r;
}

double log_sum_exp(const double* z, std::size_t n) {
  const double m = *std::max_element(z, z + n);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::exp(z[i] - m);
  return m + std::log(s);
}

}  // namespace

Tensor softmax(const Tensor& logits) {
  Tensor out(logits.shape());
  const auto n = logits.shape().back();
  const auto rows = logits.size() / n;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* z = logits.raw() + r * n;
    double* p = out.raw() + r * n;
    const double lse = log_sum_exp(z, n);
    for (std::size_t i = 0; i < n; ++i) p[i] = std::exp(z[i] - lse);
  }
  return out;
}

std::vector<double> per_example_cross_entropy(const Tensor& logits, std::span<const int> labels) {
  const auto r = check(logits, labels);
  std::vector<double> out(r.rows);
  for (std::size_t i = 0; i < r.rows; ++i) {
    const double* z = logits.raw() + i * r.classes;
    out[i] = std::max(0.0, log_sum_exp(z, r.classes) - z[labels[i]]);
  }
  return out;
}

LossResult cross_entropy_logits(const Tensor& logits, std::span<const int> labels) {
  const auto r = check(logits, labels);
  LossResult res{0.0, softmax(logits)};
  const double inv = 1.0 / static_cast<double>(r.rows);
  for (std::size_t i = 0; i < r.rows; ++i) {
    const double* z = logits.raw() + i * r.classes;
    res.loss += std::max(0.0, log_sum_exp(z, r.classes) - z[labels[i]]);
    double* g = res.grad.raw() + i * r.classes;
    g[labels[i]] -= 1.0;
    for (std::size_t k = 0; k < r.classes; ++k) g[k] *= inv;
  }
  res.loss *= inv;
  return res;
}

LossResult cross_entropy_probs(const Tensor& probs, std::span<const int> labels) {
  const auto r = check(probs, labels);
  LossResult res{0.0, Tensor(probs.shape())};
  const double inv = 1.0 / static_cast<double>(r.rows);
  for (std::size_t i = 0; i < r.rows; ++i) {
    const double p = std::max(probs[i * r.classes + labels[i]], DBL_MIN);
    res.loss -= std::log(p);
    res.grad[i * r.classes + labels[i]] = -inv / p;
  }
  res.loss = std::max(0.0, res.loss * inv);
  return res;
}

}  // namespace phyadv::nn
