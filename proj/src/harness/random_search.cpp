#include "phyadv/harness/random_search.hpp"

#include <algorithm>
#include <cmath>

#include "phyadv/errors.hpp"
#include "phyadv/nn/loss.hpp"
#include "phyadv/rng.hpp"

namespace phyadv::harness {

namespace {

constexpr std::size_t kQueryChunk = 16;

void random_direction(std::span<double> out, double radius, Rng& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  for (auto& v : out) v = n01(rng);
  const double norm = nn::l2_norm(out);
  nn::scale(out, norm > 0.0 ? radius / norm : 0.0);
}

/// Moves `base` by `step` along a random direction and rescales onto the sphere.
void neighbour(std::span<const double> base, std::span<double> out, double radius, double step, Rng& rng) {
  random_direction(out, step, rng);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += base[i];
  const double norm = nn::l2_norm(out);
  nn::scale(out, norm > 0.0 ? radius / norm : 0.0);
}

nn::Shape batched(std::size_t rows, const nn::Shape& sample) {
  nn::Shape s{rows};
  s.insert(s.end(), sample.begin(), sample.end());
  return s;
}

}  // namespace

nn::Tensor PredictionOracle::probabilities(const nn::Tensor& inputs) {
  if (inputs.rank() != input_shape().size() + 1) throw ConfigError("oracle expects a batch of inputs");
  queries_ += inputs.dim(0);
  return evaluate(inputs);
}

std::size_t ModelOracle::classes() const { return nn::shape_size(model_->spec.output_shape()); }

nn::Tensor ModelOracle::evaluate(const nn::Tensor& inputs) const {
  if (model_->ends_with_softmax()) return nn::forward(*model_, inputs);
  return nn::softmax(nn::logits(*model_, inputs));
}

RandomSearchResult random_search_attack(PredictionOracle& oracle, std::span<const double> frame, int label,
                                        double power_ratio, const RandomSearchConfig& config, std::uint64_t seed) {
  const auto sample = oracle.input_shape();
  const std::size_t dim = nn::shape_size(sample);
  if (frame.size() != dim) throw ConfigError("random_search_attack: frame does not match the oracle input");
  if (label < 0 || static_cast<std::size_t>(label) >= oracle.classes())
    throw ConfigError("random_search_attack: label out of range");
  if (!(power_ratio >= 0.0) || !std::isfinite(power_ratio))
    throw ConfigError("random_search_attack: power ratio must be finite and non-negative");

  RandomSearchResult result;
  if (config.queries == 0) return result;

  const double x_energy = nn::squared_norm(frame);
  const double radius = std::sqrt(power_ratio * x_energy);
  const std::size_t start = oracle.queries();
  auto rng = make_rng(seed);

  std::vector<double> best;
  double best_prob = 2.0;
  const auto explore = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(config.explore_fraction * static_cast<double>(config.queries))), 1,
      config.queries);

  // Evaluates `count` candidates produced by `make`; keeps the best, stops at a flip.
  auto run_chunk = [&](std::size_t count, auto&& make) {
    nn::Tensor batch(batched(count, sample));
    std::vector<std::vector<double>> deltas(count, std::vector<double>(dim));
    for (std::size_t r = 0; r < count; ++r) {
      make(std::span<double>(deltas[r]));
      auto row = batch.row(r);
      for (std::size_t i = 0; i < dim; ++i) row[i] = frame[i] + deltas[r][i];
    }
    const auto probs = oracle.probabilities(batch);
    for (std::size_t r = 0; r < count; ++r) {
      const auto p = probs.row(r);
      const bool flipped = nn::argmax(p) != static_cast<std::size_t>(label);
      const double pt = p[static_cast<std::size_t>(label)];
      if (flipped || pt < best_prob) {
        best_prob = pt;
        best = deltas[r];
      }
      if (flipped) {
        result.success = true;
        return;
      }
    }
  };

  for (std::size_t done = 0; done < explore && !result.success;) {
    const auto count = std::min(kQueryChunk, explore - done);
    run_chunk(count, [&](std::span<double> d) { random_direction(d, radius, rng); });
    done += count;
  }
  for (std::size_t done = explore; done < config.queries && !result.success;) {
    const auto count = std::min(kQueryChunk / 2, config.queries - done);
    const auto base = best;
    run_chunk(count, [&](std::span<double> d) { neighbour(base, d, radius, config.refine_step * radius, rng); });
    done += count;
  }

  result.delta = std::move(best);
  result.true_probability = best_prob;
  result.l2 = nn::l2_norm(result.delta);
  result.power_ratio = x_energy > 0.0 ? result.l2 * result.l2 / x_energy : 0.0;
  result.queries = oracle.queries() - start;
  return result;
}

UniversalSearchResult random_search_universal(PredictionOracle& oracle, const nn::Tensor& received,
                                              std::span<const int> labels, double energy,
                                              const RandomSearchConfig& config, std::uint64_t seed) {
  const auto sample = oracle.input_shape();
  const std::size_t dim = nn::shape_size(sample);
  if (received.rank() != 2 || received.dim(1) != dim || received.dim(0) != labels.size() || labels.empty())
    throw ConfigError("random_search_universal: received batch does not match the oracle or labels");
  if (!(energy >= 0.0) || !std::isfinite(energy)) throw ConfigError("random_search_universal: bad energy");

  UniversalSearchResult result;
  result.delta.assign(dim, 0.0);
  if (config.queries == 0) return result;

  const double radius = std::sqrt(energy);
  auto rng = make_rng(seed);

  // (error count, -mean true-class probability), larger is stronger
  auto score = [&](std::span<const double> delta) {
    nn::Tensor batch = received;
    for (std::size_t r = 0; r < batch.dim(0); ++r) {
      auto row = batch.row(r);
      for (std::size_t i = 0; i < dim; ++i) row[i] += delta[i];
    }
    const auto probs = oracle.probabilities(batch);
    std::size_t errors = 0;
    double pt = 0.0;
    for (std::size_t r = 0; r < labels.size(); ++r) {
      const auto p = probs.row(r);
      errors += nn::argmax(p) != static_cast<std::size_t>(labels[r]);
      pt += p[static_cast<std::size_t>(labels[r])];
    }
    ++result.queries;
    return std::pair<double, double>{static_cast<double>(errors), -pt / static_cast<double>(labels.size())};
  };

  const auto explore = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(config.explore_fraction * static_cast<double>(config.queries))), 1,
      config.queries);
  std::pair<double, double> best{-1.0, -2.0};
  std::vector<double> cand(dim);
  for (std::size_t q = 0; q < config.queries; ++q) {
    if (q < explore) random_direction(cand, radius, rng);
    else neighbour(result.delta, cand, radius, config.refine_step * radius, rng);
    const auto s = score(cand);
    if (s > best) {
      best = s;
      result.delta = cand;
    }
  }
  result.error_rate = best.first / static_cast<double>(labels.size());
  return result;
}

}  // namespace phyadv::harness
