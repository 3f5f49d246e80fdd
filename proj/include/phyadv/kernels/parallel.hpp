#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "phyadv/nn/model.hpp"

namespace phyadv::kernels {

/// Execution policy for the data-parallel kernels. `serial` is the reference
/// path kept for testing and benchmarking; `parallel` uses OpenMP. Every
/// kernel splits work into chunks whose size does not depend on the thread
/// count, and reduces chunk results in chunk order, so both policies are
/// deterministic.
enum class Exec { serial, parallel };

int max_threads() noexcept;

/// Calls fn(i) for i in [0, n). With Exec::parallel iterations run on an
/// OpenMP team (static schedule); fn must only write to per-index state.
template <typename Fn>
void for_each_index(std::size_t n, Exec exec, Fn&& fn) {
  if (exec == Exec::parallel) {
    const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < count; ++i) fn(static_cast<std::size_t>(i));
  } else {
    for (std::size_t i = 0; i < n; ++i) fn(i);
  }
}

struct BatchGradient {
  double loss = 0.0;         // mean cross-entropy over the batch
  std::size_t correct = 0;   // argmax hits, measured on the same forward pass
  nn::Gradients grads;       // d(mean loss)/d(params)
};

inline constexpr std::size_t kGradientChunk = 16;

/// Mean cross-entropy gradient of a classifier over a batch [B, ...].
/// The loss is taken on the logits (a trailing softmax layer is skipped).
/// serial: one sample at a time, accumulated in sample order.
/// parallel: fixed chunks of kGradientChunk samples as batched GEMMs, summed in chunk order.
BatchGradient classification_gradient(const nn::ModelState& model, const nn::Tensor& inputs,
                                      std::span<const int> labels, Exec exec = Exec::parallel);

/// Argmax class of each row of a batch; chunked forward passes.
std::vector<int> predict_classes(const nn::ModelState& model, const nn::Tensor& inputs,
                                 Exec exec = Exec::parallel);

/// Row `i` of a batched tensor as its own batch of one.
nn::Tensor take_rows(const nn::Tensor& batch, std::size_t begin, std::size_t count);

}  // namespace phyadv::kernels
