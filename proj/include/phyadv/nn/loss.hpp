#pragma once

#include <span>
#include <vector>

#include "phyadv/nn/tensor.hpp"

namespace phyadv::nn {

struct LossResult {
  double loss = 0.0;  // mean over the batch
  Tensor grad;        // d(mean loss)/d(input), same shape as the input
};

/// Row-wise stable softmax over the last axis of a [B, K] (or [K]) tensor.
Tensor softmax(const Tensor& logits);

/// Log-sum-exp cross-entropy on raw logits, [B, K] with one label per row or [K]
/// with a single label.
LossResult cross_entropy_logits(const Tensor& logits, std::span<const int> labels);

/// Cross-entropy on probabilities (e.g. the output of a softmax layer).
LossResult cross_entropy_probs(const Tensor& probs, std::span<const int> labels);

/// Per-row loss values without the batch mean (for feedback-style training).
std::vector<double> per_example_cross_entropy(const Tensor& logits, std::span<const int> labels);

}  // namespace phyadv::nn
