#include "phyadv/kernels/parallel.hpp"

#include <algorithm>

#include "phyadv/errors.hpp"
#include "phyadv/nn/loss.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace phyadv::kernels {

int max_threads() noexcept {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

nn::Tensor take_rows(const nn::Tensor& batch, std::size_t begin, std::size_t count) {
  nn::Shape s = batch.shape();
  s[0] = count;
  const auto row = batch.row_size();
  std::vector<double> data(batch.data().begin() + static_cast<std::ptrdiff_t>(begin * row),
                           batch.data().begin() + static_cast<std::ptrdiff_t>((begin + count) * row));
  return nn::Tensor(std::move(s), std::move(data));
}

namespace {

struct Partial {
  double loss_sum = 0.0;
  std::size_t correct = 0;
  nn::Gradients grads;
};

// Sum of per-sample losses and gradients over rows [begin, begin+count).
Partial chunk_gradient(const nn::ModelState& model, const nn::Tensor& inputs, std::span<const int> labels,
                       std::size_t begin, std::size_t count) {
  nn::Tape tape;
  const auto z = nn::logits(model, take_rows(inputs, begin, count), &tape);
  auto ce = nn::cross_entropy_logits(z, labels.subspan(begin, count));
  // undo the chunk-local mean so partials add up to sums
  nn::scale(ce.grad.data(), static_cast<double>(count));
  Partial p;
  p.loss_sum = ce.loss * static_cast<double>(count);
  for (std::size_t i = 0; i < count; ++i)
    if (static_cast<int>(nn::argmax(z.row(i))) == labels[begin + i]) ++p.correct;
  p.grads = nn::backward(model, tape, ce.grad);
  return p;
}

void accumulate(nn::Gradients& into, const nn::Gradients& g) {
  for (std::size_t l = 0; l < into.params.size(); ++l) {
    if (into.params[l].empty()) continue;
    nn::axpy(1.0, g.params[l].weight.data(), into.params[l].weight.data());
    nn::axpy(1.0, g.params[l].bias.data(), into.params[l].bias.data());
  }
}

}  // namespace

BatchGradient classification_gradient(const nn::ModelState& model, const nn::Tensor& inputs,
                                      std::span<const int> labels, Exec exec) {
  const std::size_t n = inputs.dim(0);
  if (labels.size() != n) throw ConfigError("label count does not match batch size");
  if (n == 0) throw ConfigError("empty batch");

  std::vector<Partial> parts;
  if (exec == Exec::serial) {
    parts.resize(n);
    for (std::size_t i = 0; i < n; ++i) parts[i] = chunk_gradient(model, inputs, labels, i, 1);
  } else {
    const std::size_t chunks = (n + kGradientChunk - 1) / kGradientChunk;
    parts.resize(chunks);
    for_each_index(chunks, exec, [&](std::size_t c) {
      const auto begin = c * kGradientChunk;
      parts[c] = chunk_gradient(model, inputs, labels, begin, std::min(kGradientChunk, n - begin));
    });
  }

  BatchGradient out;
  out.grads = std::move(parts.front().grads);
  out.loss = parts.front().loss_sum;
  out.correct = parts.front().correct;
  for (std::size_t c = 1; c < parts.size(); ++c) {
    accumulate(out.grads, parts[c].grads);
    out.loss += parts[c].loss_sum;
    out.correct += parts[c].correct;
  }
  const double inv = 1.0 / static_cast<double>(n);
  out.loss *= inv;
  for (auto& p : out.grads.params) {
    if (p.empty()) continue;
    nn::scale(p.weight.data(), inv);
    nn::scale(p.bias.data(), inv);
  }
  out.grads.input = {};
  return out;
}

std::vector<int> predict_classes(const nn::ModelState& model, const nn::Tensor& inputs, Exec exec) {
  constexpr std::size_t kChunk = 256;
  const std::size_t n = inputs.dim(0);
  std::vector<int> out(n);
  const std::size_t chunks = (n + kChunk - 1) / kChunk;
  for_each_index(chunks, exec, [&](std::size_t c) {
    const auto begin = c * kChunk;
    const auto count = std::min(kChunk, n - begin);
    const auto z = nn::logits(model, take_rows(inputs, begin, count));
    for (std::size_t i = 0; i < count; ++i) out[begin + i] = static_cast<int>(nn::argmax(z.row(i)));
  });
  return out;
}

}  // namespace phyadv::kernels
