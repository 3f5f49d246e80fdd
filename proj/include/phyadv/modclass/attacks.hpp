#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "phyadv/kernels/parallel.hpp"
#include "phyadv/nn/model.hpp"

namespace phyadv::modclass {

struct CwAttackConfig {
  double confidence = 0.0;  // kappa
  std::size_t steps = 200;
  double learning_rate = 0.01;
  double c_min = 1e-3;
  double c_max = 1e2;
  std::size_t search_steps = 6;
  /// Hard budget: |delta|^2 <= max_power_ratio * |x|^2.
  double max_power_ratio = 0.1;
  /// Stop a search step once the objective stalls over steps/10 iterations.
  bool early_abort = true;

  void validate() const;
};

struct CwSearchStep {
  double c = 0.0;
  bool success = false;
  double l2 = 0.0;           // smallest successful |delta| in this step (inf if none)
  double accepted_l2 = 0.0;  // best |delta| accepted so far (inf if none)
};

struct AttackRecord {
  bool success = false;
  double l2 = 0.0;           // |delta|_2
  double l2_ratio = 0.0;     // |delta|_2 / |x|_2
  double power_ratio = 0.0;  // |delta|^2 / |x|^2
  std::size_t iterations = 0;
  std::vector<CwSearchStep> trace;
};

struct CwResult {
  nn::Tensor delta;  // shaped like one frame
  AttackRecord record;
};

/// Carlini-Wagner L2 on the logits with delta optimized directly and projected
/// onto the power-ratio ball; c by log-space bisection over [c_min, c_max].
/// Deterministic: delta starts at zero in every search step.
CwResult cw_l2_attack(const nn::ModelState& model, const nn::Tensor& frame, int label, const CwAttackConfig& config);

inline constexpr std::size_t kCwChunk = 16;

/// Batched form over frames [B, ...]: fixed chunks of kCwChunk frames advance
/// in lockstep; chunks run on OpenMP workers under Exec::parallel.
std::vector<CwResult> cw_l2_attack(const nn::ModelState& model, const nn::Tensor& frames, std::span<const int> labels,
                                   const CwAttackConfig& config, kernels::Exec exec = kernels::Exec::parallel);

/// delta = epsilon * sign(d loss / d x), cross-entropy on the logits.
nn::Tensor fgsm_attack(const nn::ModelState& model, const nn::Tensor& frame, int label, double epsilon);
/// Batched form; one epsilon per frame.
nn::Tensor fgsm_attack(const nn::ModelState& model, const nn::Tensor& frames, std::span<const int> labels,
                       std::span<const double> epsilon, kernels::Exec exec = kernels::Exec::parallel);

/// Per-component epsilon whose sign perturbation has |delta|^2 = ratio * |x|^2.
double fgsm_epsilon_for_ratio(std::span<const double> frame, double power_ratio);

/// Gaussian direction scaled to exactly `l2` (matched-norm random baseline).
nn::Tensor gaussian_perturbation(const nn::Shape& shape, double l2, std::uint64_t seed);

/// frames + deltas (both [B, ...]).
nn::Tensor perturbed(const nn::Tensor& frames, const nn::Tensor& deltas);

/// Stacks per-frame deltas into a [B, ...] tensor.
nn::Tensor stack_deltas(std::span<const CwResult> results);

}  // namespace phyadv::modclass
