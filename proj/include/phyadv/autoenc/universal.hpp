#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "phyadv/nn/model.hpp"

namespace phyadv::autoenc {

/// all_hidden: sum over the hidden layers of the decoder (each relu output) of
/// the mean over units; a decoder without hidden layers falls back to the
/// logits. final_layer: the mean of the pre-softmax logits only.
enum class ActivationObjective { all_hidden, final_layer };

struct UniversalConfig {
  double power_ratio = 0.25;  // |delta|^2 relative to the codeword energy n
  std::size_t steps = 500;
  double step_fraction = 0.01;  // ascent step as a fraction of the budget radius
  ActivationObjective objective = ActivationObjective::all_hidden;
  std::size_t max_backtracks = 30;

  void validate() const;
};

struct UniversalPerturbation {
  std::vector<double> delta;
  double power_ratio = 0.0;  // budget the perturbation was crafted under
  std::uint64_t seed = 0;
  std::vector<double> trace;        // objective after every step (trace[0] at initialization)
  std::vector<double> layer_means;  // mean activation of each counted layer at delta

  double energy() const;
  /// |delta|^2 / n.
  double realized_ratio() const;
};

/// Activation-maximization objective at `delta`; optionally fills the per-layer
/// means and the gradient d objective / d delta.
double activation_objective(const nn::ModelState& decoder, std::span<const double> delta, ActivationObjective objective,
                            std::vector<double>* layer_means = nullptr, std::vector<double>* gradient = nullptr);

/// Data-independent crafting: Gaussian draw scaled onto the budget sphere, then
/// normalized-gradient ascent with L2 projection. A step that would lower the
/// objective is halved until it does not (or discarded), so the trace never
/// decreases. Zero budget returns delta = 0 with a warning.
UniversalPerturbation craft_universal_perturbation(const nn::ModelState& decoder, const UniversalConfig& config,
                                                   std::uint64_t seed);

/// Perturbations stored in the weight-file container, one "UPERT" record each
/// (sizes {n, seed low word, seed high word}; tensors: delta [n], power ratio [1]).
void save_perturbations(std::span<const UniversalPerturbation> perts, const std::filesystem::path& path);
std::vector<UniversalPerturbation> load_perturbations(const std::filesystem::path& path);

}  // namespace phyadv::autoenc
