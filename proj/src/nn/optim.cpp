#include "phyadv/nn/optim.hpp"

#include <cmath>

#include "phyadv/errors.hpp"

namespace phyadv::nn {

OptimState make_optimizer(OptimAlgorithm algorithm, double learning_rate, std::span<const Tensor* const> params) {
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  OptimState s;
  s.algorithm = algorithm;
  s.learning_rate = learning_rate;
  if (algorithm == OptimAlgorithm::adam) {
    for (const auto* p : params) {
      s.first_moment.emplace_back(p->shape());
      s.second_moment.emplace_back(p->shape());
    }
  }
  return s;
}

OptimState make_optimizer(OptimAlgorithm algorithm, double learning_rate, const ModelState& model) {
  const auto params = model.parameters();
  return make_optimizer(algorithm, learning_rate, std::span<const Tensor* const>(params));
}

void optimizer_step(OptimState& state, std::span<Tensor* const> params, std::span<const Tensor* const> grads) {
  if (params.size() != grads.size()) throw ConfigError("optimizer got mismatched parameter and gradient lists");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->shape() != grads[i]->shape())
      throw ConfigError("gradient shape " + shape_string(grads[i]->shape()) + " does not match parameter " +
                        shape_string(params[i]->shape()));
    if (!grads[i]->all_finite()) throw NumericError("non-finite gradient in parameter tensor " + std::to_string(i));
  }
  ++state.step;
  if (state.algorithm == OptimAlgorithm::sgd) {
    for (std::size_t i = 0; i < params.size(); ++i) axpy(-state.learning_rate, grads[i]->data(), params[i]->data());
    return;
  }
  if (state.first_moment.size() != params.size()) throw ConfigError("adam state does not match parameter list");
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i]->data();
    auto g = grads[i]->data();
    auto m = state.first_moment[i].data();
    auto v = state.second_moment[i].data();
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
      p[j] -= state.learning_rate * (m[j] / c1) / (std::sqrt(v[j] / c2) + state.epsilon);
    }
  }
}

void optimizer_step(OptimState& state, ModelState& model, const Gradients& grads) {
  auto params = model.parameters();
  auto g = grads.tensors();
  optimizer_step(state, std::span<Tensor* const>(params), std::span<const Tensor* const>(g));
}

}  // namespace phyadv::nn
