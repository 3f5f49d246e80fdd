#include "phyadv/drl/feedback.hpp"

#include <cmath>
#include <random>

#include <spdlog/spdlog.h>

#include "phyadv/errors.hpp"
#include "phyadv/nn/loss.hpp"
#include "phyadv/wireless/channel.hpp"

namespace phyadv::drl {

void DrlConfig::validate() const {
  base.validate();
  if (!(sigma_pi > 0)) throw ConfigError("drl.sigma_pi must be > 0");
  if (!(sigma_f >= 0)) throw ConfigError("drl.sigma_f must be >= 0");
  if (batch_size == 0) throw ConfigError("drl.batch_size must be positive");
  if (receiver_epochs == 0) throw ConfigError("drl.receiver_epochs must be positive");
  if (!(receiver_learning_rate > 0) || !(transmitter_learning_rate > 0))
    throw ConfigError("drl learning rates must be positive");
  if (time_steps == 0) throw ConfigError("drl.time_steps must be positive");
  if (!std::isfinite(ebno_db)) throw ConfigError("drl.ebno_db must be finite");
}

void AttackSchedule::validate(std::size_t time_steps) const {
  if (!(window_start < window_end)) throw ConfigError("attack window must satisfy start < end");
  if (window_end > time_steps) throw ConfigError("attack window ends after the last time step");
  if (pool.empty()) throw ConfigError("attack window is active but the perturbation pool is empty");
  const auto n = pool.front().delta.size();
  for (const auto& p : pool)
    if (p.delta.size() != n) throw ConfigError("pool perturbations differ in length");
}

BroadcastAdversary::BroadcastAdversary(const AttackSchedule& schedule) : schedule_(&schedule) {}

std::optional<std::span<const double>> BroadcastAdversary::perturbation(std::size_t step) const {
  const auto& s = *schedule_;
  if (!s.active(step)) return std::nullopt;
  std::size_t pick = 0;
  if (s.policy == PoolPolicy::round_robin) {
    pick = (step - s.window_start) % s.pool.size();
  } else {
    auto rng = make_rng(s.seed, {step});
    pick = std::uniform_int_distribution<std::size_t>(0, s.pool.size() - 1)(rng);
  }
  return std::span<const double>(s.pool[pick].delta);
}

nn::Tensor LiveModel::forward(const nn::Tensor& input, nn::Tape* tape) {
  ++counts_.forward;
  return nn::forward(state_, input, tape);
}

nn::Tensor LiveModel::logits(const nn::Tensor& input, nn::Tape* tape) {
  ++counts_.forward;
  return nn::logits(state_, input, tape);
}

nn::Gradients LiveModel::backward(const nn::Tape& tape, const nn::Tensor& output_grad, nn::GradTarget target) {
  ++counts_.backward;
  return nn::backward(state_, tape, output_grad, target);
}

void LiveModel::update(nn::OptimState& optim, const nn::Gradients& grads) {
  ++counts_.update;
  nn::optimizer_step(optim, state_, grads);
}

ReceiverStep train_step_receiver(LiveModel& decoder, nn::OptimState& optim, const nn::Tensor& received,
                                 std::span<const int> messages, std::size_t epochs) {
  ReceiverStep out;
  for (std::size_t e = 0; e < epochs; ++e) {
    nn::Tape tape;
    const auto z = decoder.logits(received, &tape);
    const auto ce = nn::cross_entropy_logits(z, messages);
    if (!std::isfinite(ce.loss)) throw NumericError("receiver loss is not finite");
    if (e == 0) {
      std::size_t hits = 0;
      for (std::size_t i = 0; i < messages.size(); ++i) hits += static_cast<int>(nn::argmax(z.row(i))) == messages[i];
      out.accuracy = static_cast<double>(hits) / static_cast<double>(messages.size());
      out.loss = ce.loss;
    }
    decoder.update(optim, decoder.backward(tape, ce.grad));
  }
  return out;
}

std::optional<nn::Tensor> policy_gradient_outputs(const nn::Tensor& exploration, std::span<const double> feedback,
                                                  double sigma_pi) {
  const std::size_t b = exploration.dim(0);
  if (feedback.size() != b) throw ConfigError("feedback count does not match the round size");
  for (double l : feedback)
    if (!std::isfinite(l)) return std::nullopt;
  // mean taken as an offset from the first value so a constant round cancels exactly
  double offset = 0.0;
  for (double l : feedback) offset += l - feedback[0];
  const double baseline = feedback[0] + offset / static_cast<double>(b);
  nn::Tensor g(exploration.shape());
  const double k = 1.0 / (sigma_pi * sigma_pi * static_cast<double>(b));
  for (std::size_t i = 0; i < b; ++i) nn::axpy((feedback[i] - baseline) * k, exploration.row(i), g.row(i));
  return g;
}

namespace {

struct Explored {
  std::optional<nn::Gradients> grads;
  double mean_loss = 0.0;
};

Explored explore(LiveModel& encoder, LiveModel& decoder, std::span<const int> messages, double sigma_pi,
                 double sigma_f, double channel_stddev, std::optional<std::span<const double>> perturbation,
                 Rng& rng) {
  const auto m = encoder.snapshot().spec.input_shape.at(0);
  nn::Tape tape;
  const auto x = encoder.forward(autoenc::one_hot(messages, m), &tape);
  nn::Tensor w(x.shape());
  wireless::add_gaussian(w.data(), sigma_pi, rng);
  nn::Tensor rx = x;
  nn::axpy(1.0, w.data(), rx.data());
  wireless::add_gaussian(rx.data(), channel_stddev, rng);
  if (perturbation)
    for (std::size_t i = 0; i < rx.dim(0); ++i) nn::axpy(1.0, *perturbation, rx.row(i));

  // receiver side: per-example losses, returned over a noisy feedback link
  const auto losses = nn::per_example_cross_entropy(decoder.logits(rx), messages);
  std::vector<double> feedback(losses);
  wireless::add_gaussian(feedback, sigma_f, rng);

  Explored out;
  for (double l : losses) out.mean_loss += l;
  out.mean_loss /= static_cast<double>(losses.size());
  const auto g = policy_gradient_outputs(w, feedback, sigma_pi);
  if (g) out.grads = encoder.backward(tape, *g);
  return out;
}

}  // namespace

TransmitterStep train_step_transmitter(LiveModel& encoder, nn::OptimState& optim, LiveModel& decoder,
                                       std::span<const int> messages, double sigma_pi, double sigma_f,
                                       double channel_stddev, std::optional<std::span<const double>> perturbation,
                                       Rng& rng) {
  auto e = explore(encoder, decoder, messages, sigma_pi, sigma_f, channel_stddev, perturbation, rng);
  TransmitterStep out;
  out.mean_loss = e.mean_loss;
  if (!e.grads) {
    spdlog::warn("non-finite loss feedback; transmitter round skipped");
    out.skipped = true;
    return out;
  }
  encoder.update(optim, *e.grads);
  return out;
}

nn::Gradients policy_gradient_estimate(const nn::ModelState& encoder, const nn::ModelState& decoder,
                                       std::span<const int> messages, double sigma_pi, double sigma_f,
                                       double channel_stddev, Rng& rng) {
  LiveModel enc(encoder), dec(decoder);
  auto e = explore(enc, dec, messages, sigma_pi, sigma_f, channel_stddev, std::nullopt, rng);
  if (!e.grads) throw NumericError("non-finite loss feedback");
  return std::move(*e.grads);
}

nn::Gradients supervised_encoder_gradient(const nn::ModelState& encoder, const nn::ModelState& decoder,
                                          std::span<const int> messages, double channel_stddev, Rng& rng) {
  const auto m = encoder.spec.input_shape.at(0);
  nn::Tape et, dt;
  auto x = nn::forward(encoder, autoenc::one_hot(messages, m), &et);
  wireless::add_gaussian(x.data(), channel_stddev, rng);
  const auto z = nn::logits(decoder, x, &dt);
  const auto ce = nn::cross_entropy_logits(z, messages);
  const auto gd = nn::backward(decoder, dt, ce.grad, nn::GradTarget::input_only);
  return nn::backward(encoder, et, gd.input);
}

SimulationResult run_simulation(const DrlConfig& config, const AttackSchedule* schedule,
                                std::optional<std::size_t> stop_after) {
  config.validate();
  if (schedule) {
    schedule->validate(config.time_steps);
    if (schedule->pool.front().delta.size() != config.base.n)
      throw ConfigError("pool perturbation length does not match the codeword length");
  }
  const std::size_t steps = stop_after ? std::min(*stop_after, config.time_steps) : config.time_steps;

  LiveModel encoder(nn::init_model(autoenc::encoder_spec(config.base), derive_seed(config.seed, {0})));
  LiveModel decoder(nn::init_model(autoenc::decoder_spec(config.base), derive_seed(config.seed, {1})));
  auto tx_opt = nn::make_optimizer(nn::OptimAlgorithm::adam, config.transmitter_learning_rate, encoder.snapshot());
  auto rx_opt = nn::make_optimizer(nn::OptimAlgorithm::adam, config.receiver_learning_rate, decoder.snapshot());
  std::optional<BroadcastAdversary> adversary;
  if (schedule) adversary.emplace(*schedule);

  const auto m = static_cast<int>(config.base.messages());
  const double sd = autoenc::noise_stddev(config.ebno_db, config.base.rate());
  SimulationResult out;
  auto& trace = out.trace;
  trace.window_start = schedule ? schedule->window_start : 0;
  trace.window_end = schedule ? schedule->window_end : 0;
  std::vector<int> msgs(config.batch_size);
  for (std::size_t t = 0; t < steps; ++t) {
    auto rng = make_rng(config.seed, {3, t});
    std::uniform_int_distribution<int> pick(0, m - 1);
    const auto pert = adversary ? adversary->perturbation(t) : std::nullopt;

    // receiver round: deployed transmitter, supervised receiver update
    for (auto& v : msgs) v = pick(rng);
    auto rx = encoder.forward(autoenc::one_hot(msgs, config.base.messages()));
    wireless::add_gaussian(rx.data(), sd, rng);
    if (pert)
      for (std::size_t i = 0; i < rx.dim(0); ++i) nn::axpy(1.0, *pert, rx.row(i));
    ReceiverStep r;
    try {
      r = train_step_receiver(decoder, rx_opt, rx, msgs, config.receiver_epochs);
    } catch (const NumericError& e) {
      throw TrainingError(e.what(), static_cast<int>(t));
    }
    trace.accuracy.push_back(r.accuracy);
    trace.attacked.push_back(pert.has_value());

    // transmitter round: explore, receive loss feedback, policy-gradient update
    for (auto& v : msgs) v = pick(rng);
    try {
      const auto ts = train_step_transmitter(encoder, tx_opt, decoder, msgs, config.sigma_pi, config.sigma_f, sd,
                                             pert, rng);
      trace.skipped_rounds += ts.skipped;
    } catch (const NumericError& e) {
      throw TrainingError(e.what(), static_cast<int>(t));
    }
  }
  trace.encoder_access = encoder.counts();
  trace.decoder_access = decoder.counts();
  out.encoder = encoder.snapshot();
  out.decoder = decoder.snapshot();
  return out;
}

double window_mean(const AccuracyTrace& trace, std::size_t begin, std::size_t end) {
  end = std::min(end, trace.accuracy.size());
  if (begin >= end) throw ConfigError("empty trace window");
  double s = 0.0;
  for (std::size_t t = begin; t < end; ++t) s += trace.accuracy[t];
  return s / static_cast<double>(end - begin);
}

std::vector<TracePoint> aggregate_traces(std::span<const AccuracyTrace> traces) {
  if (traces.empty()) return {};
  const auto len = traces.front().accuracy.size();
  for (const auto& t : traces)
    if (t.accuracy.size() != len) throw ConfigError("replicate traces differ in length");
  std::vector<TracePoint> out(len);
  const auto n = static_cast<double>(traces.size());
  for (std::size_t i = 0; i < len; ++i) {
    double s = 0.0, s2 = 0.0;
    for (const auto& t : traces) s += t.accuracy[i];
    const double mean = s / n;
    for (const auto& t : traces) s2 += (t.accuracy[i] - mean) * (t.accuracy[i] - mean);
    out[i] = {i, mean, traces.size() > 1 ? std::sqrt(s2 / (n - 1)) : 0.0, traces.size()};
  }
  return out;
}

DrlConfig replicate_config(const DrlConfig& config, std::size_t replicate) {
  DrlConfig c = config;
  c.seed = derive_seed(config.seed, {100, replicate});
  return c;
}

std::vector<AccuracyTrace> run_replicates(const DrlConfig& config, const AttackSchedule* schedule,
                                          std::size_t replicates, kernels::Exec exec) {
  std::vector<AccuracyTrace> out(replicates);
  kernels::for_each_index(replicates, exec, [&](std::size_t r) {
    out[r] = run_simulation(replicate_config(config, r), schedule).trace;
  });
  return out;
}

}  // namespace phyadv::drl
