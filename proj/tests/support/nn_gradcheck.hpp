#pragma once

// Shared gradient-check fixtures: one small model per layer kind, a random
// linear read-out as the objective, and the finite-difference comparison.

#include <random>
#include <string>
#include <vector>

#include "phyadv/nn/loss.hpp"
#include "phyadv/nn/model.hpp"
#include "support/finite_diff.hpp"

namespace phyadv::testing {

struct GradCase {
  std::string name;
  nn::ModelSpec spec;
};

inline std::vector<GradCase> gradient_cases() {
  using nn::LayerSpec;
  return {
      {"dense", {{5}, {LayerSpec::dense(5, 4)}}},
      {"conv1d", {{2, 11}, {LayerSpec::conv1d(2, 3, 4, 2), LayerSpec::flatten(), LayerSpec::dense(12, 3)}}},
      {"relu", {{6}, {LayerSpec::dense(6, 6), LayerSpec::relu(), LayerSpec::dense(6, 3)}}},
      {"softmax", {{4}, {LayerSpec::dense(4, 5), LayerSpec::softmax()}}},
      {"energy-norm", {{4}, {LayerSpec::dense(4, 7), LayerSpec::energy_norm(7)}}},
      {"flatten", {{3, 4}, {LayerSpec::flatten(), LayerSpec::dense(12, 2)}}},
  };
}

struct GradCheckResult {
  double input_error = 0.0;
  double param_error = 0.0;
};

/// Objective: sum(r * model(x)) for a fixed random read-out r, batch of 2.
inline GradCheckResult check_model_gradients(const nn::ModelSpec& spec, std::uint64_t seed) {
  auto model = nn::init_model(spec, seed);
  std::mt19937_64 rng(seed * 7919 + 1);
  std::normal_distribution<double> normal;
  for (auto* p : model.parameters())
    for (auto& v : p->data()) v += 0.1 * normal(rng);  // non-zero biases too

  nn::Shape in_shape{2};
  in_shape.insert(in_shape.end(), spec.input_shape.begin(), spec.input_shape.end());
  nn::Tensor x(in_shape);
  for (auto& v : x.data()) v = normal(rng);
  nn::Shape out_shape{2};
  const auto o = spec.output_shape();
  out_shape.insert(out_shape.end(), o.begin(), o.end());
  nn::Tensor readout(out_shape);
  for (auto& v : readout.data()) v = normal(rng);

  auto objective = [&] { return nn::dot(nn::forward(model, x).data(), readout.data()); };

  nn::Tape tape;
  nn::forward(model, x, &tape);
  const auto g = nn::backward(model, tape, readout);

  GradCheckResult r;
  const auto fd_input = central_difference(x.data(), objective);
  r.input_error = max_relative_error(g.input.data(), fd_input);
  const auto params = model.parameters();
  const auto grads = g.tensors();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto fd = central_difference(params[i]->data(), objective);
    r.param_error = std::max(r.param_error, max_relative_error(grads[i]->data(), fd));
  }
  return r;
}

}  // namespace phyadv::testing
