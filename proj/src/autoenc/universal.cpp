#include "phyadv/autoenc/universal.hpp"

#include <cmath>
#include <random>

#include <spdlog/spdlog.h>

#include "phyadv/binary_io.hpp"
#include "phyadv/errors.hpp"
#include "phyadv/nn/weights_io.hpp"
#include "phyadv/rng.hpp"

namespace phyadv::autoenc {

void UniversalConfig::validate() const {
  if (!(power_ratio >= 0)) throw ConfigError("universal.power_ratio must be >= 0");
  if (steps == 0) throw ConfigError("universal.steps must be >= 1");
  if (!(step_fraction > 0)) throw ConfigError("universal.step_fraction must be positive");
}

double UniversalPerturbation::energy() const { return nn::squared_norm(delta); }
double UniversalPerturbation::realized_ratio() const {
  return delta.empty() ? 0.0 : energy() / static_cast<double>(delta.size());
}

namespace {

// Indices into the tape's activations that enter the objective.
std::vector<std::size_t> counted_activations(const nn::ModelState& decoder, std::size_t layers_run,
                                             ActivationObjective objective) {
  std::vector<std::size_t> idx;
  if (objective == ActivationObjective::all_hidden)
    for (std::size_t l = 0; l + 1 < layers_run; ++l)
      if (decoder.spec.layers[l].kind == nn::LayerKind::relu) idx.push_back(l + 1);
  if (idx.empty()) idx.push_back(layers_run);  // pre-softmax output
  return idx;
}

}  // namespace

double activation_objective(const nn::ModelState& decoder, std::span<const double> delta, ActivationObjective objective,
                            std::vector<double>* layer_means, std::vector<double>* gradient) {
  nn::Tape tape;
  (void)nn::logits(decoder, nn::Tensor({delta.size()}, std::vector<double>(delta.begin(), delta.end())), &tape);
  const auto counted = counted_activations(decoder, tape.layers_run(), objective);
  double total = 0.0;
  if (layer_means) layer_means->clear();
  std::vector<nn::Tensor> injected(tape.activations.size());
  for (auto a : counted) {
    const auto& act = tape.activations[a];
    double mean = 0.0;
    for (double v : act.data()) mean += v;
    mean /= static_cast<double>(act.size());
    total += mean;
    if (layer_means) layer_means->push_back(mean);
    injected[a] = nn::Tensor(act.shape(), 1.0 / static_cast<double>(act.size()));
  }
  if (gradient) {
    const auto g = nn::backward(decoder, tape, nn::Tensor{}, nn::GradTarget::input_only, injected);
    gradient->assign(g.input.data().begin(), g.input.data().end());
  }
  return total;
}

UniversalPerturbation craft_universal_perturbation(const nn::ModelState& decoder, const UniversalConfig& config,
                                                   std::uint64_t seed) {
  config.validate();
  const std::size_t n = decoder.spec.input_shape.at(0);
  UniversalPerturbation up;
  up.power_ratio = config.power_ratio;
  up.seed = seed;
  up.delta.assign(n, 0.0);
  const double radius = std::sqrt(config.power_ratio * static_cast<double>(n));
  if (radius == 0.0) {
    spdlog::warn("universal perturbation crafted with a zero budget; returning delta = 0");
    up.trace.push_back(activation_objective(decoder, up.delta, config.objective, &up.layer_means));
    return up;
  }

  // step 1: random Gaussian initialization on the budget sphere
  auto rng = make_rng(seed, {0});
  std::normal_distribution<double> normal;
  for (auto& v : up.delta) v = normal(rng);
  nn::scale(up.delta, radius / nn::l2_norm(up.delta));

  // step 2: projected ascent on the mean activations
  std::vector<double> grad, trial(n);
  double value = activation_objective(decoder, up.delta, config.objective, nullptr, &grad);
  up.trace.push_back(value);
  const double base_step = config.step_fraction * radius;
  for (std::size_t s = 0; s < config.steps; ++s) {
    const double gnorm = nn::l2_norm(grad);
    if (gnorm > 0.0) {
      double step = base_step;
      for (std::size_t b = 0; b <= config.max_backtracks; ++b, step *= 0.5) {
        for (std::size_t i = 0; i < n; ++i) trial[i] = up.delta[i] + step * grad[i] / gnorm;
        nn::project_l2_ball(trial, radius);
        std::vector<double> trial_grad;
        const double v = activation_objective(decoder, trial, config.objective, nullptr, &trial_grad);
        if (v >= value) {
          up.delta = trial;
          value = v;
          grad = std::move(trial_grad);
          break;
        }
      }
    }
    up.trace.push_back(value);
  }
  (void)activation_objective(decoder, up.delta, config.objective, &up.layer_means);
  return up;
}

void save_perturbations(std::span<const UniversalPerturbation> perts, const std::filesystem::path& path) {
  nn::WeightFile f;
  if (perts.empty()) throw ConfigError("no perturbations to save");
  const auto n = perts.front().delta.size();
  f.seed = perts.front().seed;
  f.input_shape = {n};
  for (const auto& p : perts) {
    if (p.delta.size() != n) throw ConfigError("perturbations of different lengths cannot share a file");
    nn::WeightRecord r;
    r.tag = "UPERT";
    r.sizes = {static_cast<std::uint32_t>(n), static_cast<std::uint32_t>(p.seed & 0xFFFFFFFFu),
               static_cast<std::uint32_t>(p.seed >> 32)};
    r.tensors = {nn::Tensor({n}, p.delta), nn::Tensor::vector({p.power_ratio})};
    f.records.push_back(std::move(r));
  }
  io::write_file(path, nn::encode_weight_file(f));
}

std::vector<UniversalPerturbation> load_perturbations(const std::filesystem::path& path) {
  const auto f = nn::decode_weight_file(io::read_file(path));
  std::vector<UniversalPerturbation> out;
  for (const auto& r : f.records) {
    if (r.tag != "UPERT" || r.tensors.size() != 2 || r.sizes.size() != 3 || r.tensors[0].size() != r.sizes[0] ||
        r.tensors[1].size() != 1)
      throw FormatError("not a perturbation record: " + r.tag);
    UniversalPerturbation p;
    p.delta.assign(r.tensors[0].data().begin(), r.tensors[0].data().end());
    p.power_ratio = r.tensors[1][0];
    p.seed = (static_cast<std::uint64_t>(r.sizes[2]) << 32) | r.sizes[1];
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace phyadv::autoenc
