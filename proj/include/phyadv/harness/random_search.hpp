#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "phyadv/harness/config.hpp"
#include "phyadv/nn/model.hpp"

namespace phyadv::harness {

/// Prediction-only access to a classifier: class probabilities for a batch of
/// inputs, nothing else. Every call is counted as one query per input row.
class PredictionOracle {
 public:
  virtual ~PredictionOracle() = default;
  /// [B, classes] softmax probabilities for inputs [B, ...].
  nn::Tensor probabilities(const nn::Tensor& inputs);
  std::size_t queries() const noexcept { return queries_; }
  virtual nn::Shape input_shape() const = 0;
  virtual std::size_t classes() const = 0;

 protected:
  virtual nn::Tensor evaluate(const nn::Tensor& inputs) const = 0;

 private:
  std::size_t queries_ = 0;
};

/// Oracle over a model the caller owns. The model is held privately; an
/// attack given a PredictionOracle& cannot reach weights or gradients.
class ModelOracle final : public PredictionOracle {
 public:
  explicit ModelOracle(nn::ModelState model) : model_(std::make_shared<const nn::ModelState>(std::move(model))) {}
  /// Shares one read-only model between oracles (one oracle per worker).
  explicit ModelOracle(std::shared_ptr<const nn::ModelState> model) : model_(std::move(model)) {}
  nn::Shape input_shape() const override { return model_->spec.input_shape; }
  std::size_t classes() const override;

 protected:
  nn::Tensor evaluate(const nn::Tensor& inputs) const override;

 private:
  std::shared_ptr<const nn::ModelState> model_;
};

struct RandomSearchResult {
  bool success = false;
  std::vector<double> delta;  // best perturbation found (empty when no query was made)
  double l2 = 0.0;
  double power_ratio = 0.0;   // |delta|^2 / |x|^2
  double true_probability = 1.0;
  std::size_t queries = 0;
};

/// Black-box evasion: random directions on the sphere |delta|^2 = power_ratio * |x|^2
/// (best of the exploration queries by true-class probability), then greedy
/// refinement of the best direction with the remaining queries. Stops at the
/// first misclassification. A zero query budget is a recorded failure.
RandomSearchResult random_search_attack(PredictionOracle& oracle, std::span<const double> frame, int label,
                                        double power_ratio, const RandomSearchConfig& config, std::uint64_t seed);

struct UniversalSearchResult {
  std::vector<double> delta;
  double error_rate = 0.0;  // on the scoring batch
  std::size_t queries = 0;  // oracle calls (each scores the whole batch)
};

/// Gradient-free universal perturbation of energy `energy` for a decoder
/// oracle: the direction that maximizes the decoding error rate (ties broken
/// by lower true-class probability) on a fixed batch of received vectors.
UniversalSearchResult random_search_universal(PredictionOracle& oracle, const nn::Tensor& received,
                                              std::span<const int> labels, double energy,
                                              const RandomSearchConfig& config, std::uint64_t seed);

}  // namespace phyadv::harness
