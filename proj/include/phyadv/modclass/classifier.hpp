#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "phyadv/kernels/parallel.hpp"
#include "phyadv/nn/model.hpp"
#include "phyadv/wireless/dataset.hpp"

namespace phyadv::modclass {

inline constexpr std::size_t kNumClasses = 8;

/// conv1d(2->16,k7) relu conv1d(16->32,k5) relu flatten dense(->128) relu dense(->8) softmax.
nn::ModelSpec default_classifier_spec();

enum class Augmentation { none, gaussian, adversarial };

struct ClassifierConfig {
  nn::ModelSpec architecture = default_classifier_spec();
  std::size_t epochs = 10;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  std::uint64_t seed = 1;
  /// Training-time perturbation of half of each batch: Gaussian noise or FGSM,
  /// both at `augmentation_ratio` of the frame energy.
  Augmentation augmentation = Augmentation::none;
  double augmentation_ratio = 0.05;
  /// Scheme left out of training (for out-of-distribution probes).
  std::optional<wireless::Scheme> holdout_scheme;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double test_loss = 0.0;      // NaN when the dataset has no test frames
  double test_accuracy = 0.0;  // NaN when the dataset has no test frames
};

struct TrainedClassifier {
  nn::ModelState model;
  std::vector<EpochRecord> history;
};

/// Frames of `split` whose scheme is not the configured holdout.
std::vector<std::size_t> usable_indices(const wireless::Dataset& dataset, wireless::Split split,
                                        const ClassifierConfig& config);

/// Adam on mean cross-entropy. Throws ConfigError if the training split lacks
/// a (non-held-out) class and TrainingError on a non-finite loss.
TrainedClassifier train_classifier(const wireless::Dataset& dataset, const ClassifierConfig& config,
                                   kernels::Exec exec = kernels::Exec::parallel);

struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
  std::vector<int> predicted;
};

Evaluation evaluate_classifier(const nn::ModelState& model, const nn::Tensor& inputs, std::span<const int> labels,
                               kernels::Exec exec = kernels::Exec::parallel);

struct SnrAccuracy {
  int snr_db = 0;
  double accuracy = 0.0;
  std::size_t frames = 0;
};

/// One point per SNR present, ascending. SNR grid levels missing between the
/// smallest and largest present level are omitted with a warning.
std::vector<SnrAccuracy> accuracy_vs_snr(std::span<const int> predicted, std::span<const int> truth,
                                         std::span<const int> snr_db);
std::vector<SnrAccuracy> accuracy_vs_snr(const nn::ModelState& model, const wireless::Dataset& dataset,
                                         std::span<const std::size_t> indices,
                                         kernels::Exec exec = kernels::Exec::parallel);

std::vector<int> frame_snrs(const wireless::Dataset& dataset, std::span<const std::size_t> indices);

}  // namespace phyadv::modclass
