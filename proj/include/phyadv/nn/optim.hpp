#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "phyadv/nn/model.hpp"

namespace phyadv::nn {

enum class OptimAlgorithm { sgd, adam };

struct OptimState {
  OptimAlgorithm algorithm = OptimAlgorithm::adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::vector<Tensor> first_moment;   // adam only, one per parameter tensor
  std::vector<Tensor> second_moment;  // adam only
  std::uint64_t step = 0;
};

/// Optimizer state for an explicit parameter list (moments shaped like each tensor).
OptimState make_optimizer(OptimAlgorithm algorithm, double learning_rate, std::span<const Tensor* const> params);
OptimState make_optimizer(OptimAlgorithm algorithm, double learning_rate, const ModelState& model);

/// One update. Throws NumericError (leaving params untouched) when any gradient
/// is non-finite. sgd: p -= lr * g. adam: bias-corrected moments.
void optimizer_step(OptimState& state, std::span<Tensor* const> params, std::span<const Tensor* const> grads);
void optimizer_step(OptimState& state, ModelState& model, const Gradients& grads);

}  // namespace phyadv::nn
