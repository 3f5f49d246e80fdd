#include "phyadv/modclass/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include <spdlog/spdlog.h>

#include "phyadv/errors.hpp"
#include "phyadv/modclass/attacks.hpp"
#include "phyadv/nn/loss.hpp"
#include "phyadv/nn/optim.hpp"
#include "phyadv/rng.hpp"

namespace phyadv::modclass {

using nn::LayerSpec;

nn::ModelSpec default_classifier_spec() {
  nn::ModelSpec spec;
  spec.input_shape = {2, wireless::kFrameLength};
  const std::size_t l1 = wireless::kFrameLength - 7 + 1;
  const std::size_t l2 = l1 - 5 + 1;
  spec.layers = {LayerSpec::conv1d(2, 16, 7),  LayerSpec::relu(),
                 LayerSpec::conv1d(16, 32, 5), LayerSpec::relu(),
                 LayerSpec::flatten(),         LayerSpec::dense(32 * l2, 128),
                 LayerSpec::relu(),            LayerSpec::dense(128, kNumClasses),
                 LayerSpec::softmax()};
  return spec;
}

void ClassifierConfig::validate() const {
  const auto out = architecture.output_shape();
  if (out != nn::Shape{kNumClasses}) throw ConfigError("classifier output must have 8 classes");
  if (architecture.input_shape != nn::Shape{2, wireless::kFrameLength})
    throw ConfigError("classifier input must be 2x128");
  if (epochs == 0) throw ConfigError("classifier.epochs must be positive");
  if (batch_size == 0) throw ConfigError("classifier.batch_size must be positive");
  if (!(learning_rate > 0)) throw ConfigError("classifier.learning_rate must be positive");
  if (!(augmentation_ratio >= 0)) throw ConfigError("classifier.augmentation_ratio must be >= 0");
}

std::vector<std::size_t> usable_indices(const wireless::Dataset& dataset, wireless::Split split,
                                        const ClassifierConfig& config) {
  auto idx = dataset.indices(split);
  if (config.holdout_scheme) {
    std::erase_if(idx, [&](std::size_t i) { return dataset.frames[i].label == *config.holdout_scheme; });
  }
  return idx;
}

Evaluation evaluate_classifier(const nn::ModelState& model, const nn::Tensor& inputs, std::span<const int> labels,
                               kernels::Exec exec) {
  constexpr std::size_t kChunk = 256;
  const std::size_t n = inputs.dim(0);
  if (labels.size() != n) throw ConfigError("label count does not match batch size");
  Evaluation ev;
  ev.predicted.resize(n);
  if (n == 0) return ev;
  const std::size_t chunks = (n + kChunk - 1) / kChunk;
  std::vector<double> loss(chunks);
  kernels::for_each_index(chunks, exec, [&](std::size_t c) {
    const auto begin = c * kChunk;
    const auto count = std::min(kChunk, n - begin);
    const auto z = nn::logits(model, kernels::take_rows(inputs, begin, count));
    const auto ce = nn::per_example_cross_entropy(z, labels.subspan(begin, count));
    loss[c] = std::accumulate(ce.begin(), ce.end(), 0.0);
    for (std::size_t i = 0; i < count; ++i) ev.predicted[begin + i] = static_cast<int>(nn::argmax(z.row(i)));
  });
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) correct += ev.predicted[i] == labels[i];
  ev.loss = std::accumulate(loss.begin(), loss.end(), 0.0) / static_cast<double>(n);
  ev.accuracy = static_cast<double>(correct) / static_cast<double>(n);
  return ev;
}

namespace {

// Perturbs every other sample of the batch in place.
void augment(nn::Tensor& batch, std::span<const int> labels, const nn::ModelState& model,
             const ClassifierConfig& config, Rng& rng) {
  const std::size_t n = batch.dim(0);
  std::vector<std::size_t> chosen;
  for (std::size_t i = 0; i < n; ++i)
    if (rng() & 1u) chosen.push_back(i);
  if (chosen.empty()) return;
  if (config.augmentation == Augmentation::gaussian) {
    for (auto i : chosen) {
      auto row = batch.row(i);
      const double l2 = std::sqrt(config.augmentation_ratio * nn::squared_norm(row));
      const auto d = gaussian_perturbation({row.size()}, l2, rng());
      nn::axpy(1.0, d.data(), row);
    }
  } else {
    nn::Shape s = batch.shape();
    s[0] = chosen.size();
    nn::Tensor sub(s);
    std::vector<int> sub_labels;
    std::vector<double> eps;
    for (std::size_t j = 0; j < chosen.size(); ++j) {
      auto row = batch.row(chosen[j]);
      std::copy(row.begin(), row.end(), sub.row(j).begin());
      sub_labels.push_back(labels[chosen[j]]);
      eps.push_back(fgsm_epsilon_for_ratio(row, config.augmentation_ratio));
    }
    const auto d = fgsm_attack(model, sub, sub_labels, eps, kernels::Exec::serial);
    for (std::size_t j = 0; j < chosen.size(); ++j) nn::axpy(1.0, d.row(j), batch.row(chosen[j]));
  }
}

}  // namespace

TrainedClassifier train_classifier(const wireless::Dataset& dataset, const ClassifierConfig& config,
                                   kernels::Exec exec) {
  config.validate();
  const auto train_idx = usable_indices(dataset, wireless::Split::train, config);
  const auto test_idx = usable_indices(dataset, wireless::Split::test, config);
  if (train_idx.empty()) throw ConfigError("training split is empty");
  {
    std::vector<bool> present(kNumClasses, false);
    for (auto i : train_idx) present[static_cast<std::size_t>(dataset.frames[i].label)] = true;
    for (std::size_t k = 0; k < kNumClasses; ++k) {
      const auto s = static_cast<wireless::Scheme>(k);
      if (!present[k] && !(config.holdout_scheme && *config.holdout_scheme == s))
        throw ConfigError("training split has no frames of class " + std::string(wireless::scheme_name(s)));
    }
  }

  const auto x_train = wireless::frames_tensor(dataset, train_idx);
  const auto y_train = wireless::frame_labels(dataset, train_idx);
  const auto x_test = wireless::frames_tensor(dataset, test_idx);
  const auto y_test = wireless::frame_labels(dataset, test_idx);

  TrainedClassifier out;
  out.model = nn::init_model(config.architecture, derive_seed(config.seed, {0}));
  auto optim = nn::make_optimizer(nn::OptimAlgorithm::adam, config.learning_rate, out.model);

  const std::size_t n = train_idx.size();
  const std::size_t row = x_train.row_size();
  std::vector<std::size_t> order(n);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto rng = make_rng(config.seed, {1, epoch});
    std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t begin = 0; begin < n; begin += config.batch_size) {
      const std::size_t count = std::min(config.batch_size, n - begin);
      nn::Tensor batch({count, 2, wireless::kFrameLength});
      std::vector<int> labels(count);
      for (std::size_t j = 0; j < count; ++j) {
        const auto src = x_train.row(order[begin + j]);
        std::copy(src.begin(), src.end(), batch.raw() + j * row);
        labels[j] = y_train[order[begin + j]];
      }
      if (config.augmentation != Augmentation::none) augment(batch, labels, out.model, config, rng);

      auto g = kernels::classification_gradient(out.model, batch, labels, exec);
      if (!std::isfinite(g.loss)) throw TrainingError("classifier loss is not finite", static_cast<int>(epoch));
      try {
        nn::optimizer_step(optim, out.model, g.grads);
      } catch (const NumericError& e) {
        throw TrainingError(e.what(), static_cast<int>(epoch));
      }
      loss_sum += g.loss * static_cast<double>(count);
      correct += g.correct;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(n);
    rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(n);
    if (test_idx.empty()) {
      rec.test_loss = rec.test_accuracy = std::numeric_limits<double>::quiet_NaN();
    } else {
      const auto ev = evaluate_classifier(out.model, x_test, y_test, exec);
      if (!std::isfinite(ev.loss)) throw TrainingError("classifier test loss is not finite", static_cast<int>(epoch));
      rec.test_loss = ev.loss;
      rec.test_accuracy = ev.accuracy;
    }
    spdlog::debug("classifier epoch {}: train loss {:.4f} acc {:.3f}, test acc {:.3f}", epoch, rec.train_loss,
                  rec.train_accuracy, rec.test_accuracy);
    out.history.push_back(rec);
  }
  return out;
}

std::vector<SnrAccuracy> accuracy_vs_snr(std::span<const int> predicted, std::span<const int> truth,
                                         std::span<const int> snr_db) {
  if (predicted.size() != truth.size() || truth.size() != snr_db.size())
    throw ConfigError("accuracy_vs_snr: input lengths differ");
  std::map<int, std::pair<std::size_t, std::size_t>> cells;  // snr -> (hits, total)
  for (std::size_t i = 0; i < truth.size(); ++i) {
    auto& c = cells[snr_db[i]];
    c.first += predicted[i] == truth[i];
    ++c.second;
  }
  std::vector<SnrAccuracy> curve;
  for (const auto& [snr, c] : cells)
    curve.push_back({snr, static_cast<double>(c.first) / static_cast<double>(c.second), c.second});
  if (!curve.empty()) {
    for (int g : wireless::kSnrGrid)
      if (g > curve.front().snr_db && g < curve.back().snr_db && !cells.contains(g))
        spdlog::warn("accuracy_vs_snr: no frames at {} dB, point omitted", g);
  }
  return curve;
}

std::vector<int> frame_snrs(const wireless::Dataset& dataset, std::span<const std::size_t> indices) {
  std::vector<int> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(dataset.frames[i].snr_db);
  return out;
}

std::vector<SnrAccuracy> accuracy_vs_snr(const nn::ModelState& model, const wireless::Dataset& dataset,
                                         std::span<const std::size_t> indices, kernels::Exec exec) {
  const auto x = wireless::frames_tensor(dataset, indices);
  const auto pred = kernels::predict_classes(model, x, exec);
  return accuracy_vs_snr(pred, wireless::frame_labels(dataset, indices), frame_snrs(dataset, indices));
}

}  // namespace phyadv::modclass
