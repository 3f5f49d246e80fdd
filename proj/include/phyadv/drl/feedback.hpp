#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "phyadv/autoenc/autoencoder.hpp"
#include "phyadv/autoenc/universal.hpp"
#include "phyadv/kernels/parallel.hpp"
#include "phyadv/nn/optim.hpp"

namespace phyadv::drl {

struct DrlConfig {
  autoenc::AutoencoderConfig base;  // k, n, hidden sizes, seed
  double ebno_db = 4.0;             // channel during the simulation
  double sigma_pi = 0.15;           // exploration stddev of the transmitter policy
  double sigma_f = 0.1;             // feedback-noise stddev on per-example losses
  std::size_t batch_size = 128;     // messages per round
  std::size_t receiver_epochs = 1;  // supervised passes over each round's batch
  double receiver_learning_rate = 5e-3;
  double transmitter_learning_rate = 3e-3;
  std::size_t time_steps = 600;
  std::uint64_t seed = 1;

  void validate() const;
};

enum class PoolPolicy { uniform, round_robin };

struct AttackSchedule {
  std::size_t window_start = 200;
  std::size_t window_end = 400;
  std::vector<autoenc::UniversalPerturbation> pool;
  PoolPolicy policy = PoolPolicy::uniform;
  std::uint64_t seed = 0;  // pool draws

  bool active(std::size_t step) const noexcept { return step >= window_start && step < window_end; }
  void validate(std::size_t time_steps) const;
};

/// The broadcast-channel adversary. It holds only the perturbation pool: no
/// handle to the live encoder or decoder exists in its interface.
class BroadcastAdversary {
 public:
  explicit BroadcastAdversary(const AttackSchedule& schedule);
  /// Perturbation added to every received vector of `step`, if the window is active.
  std::optional<std::span<const double>> perturbation(std::size_t step) const;

 private:
  const AttackSchedule* schedule_;
};

struct AccessCounts {
  std::size_t forward = 0;
  std::size_t backward = 0;
  std::size_t update = 0;
  bool operator==(const AccessCounts&) const = default;
};

/// A live model of the communication system; every use is counted.
class LiveModel {
 public:
  explicit LiveModel(nn::ModelState state) : state_(std::move(state)) {}
  nn::Tensor forward(const nn::Tensor& input, nn::Tape* tape = nullptr);
  nn::Tensor logits(const nn::Tensor& input, nn::Tape* tape = nullptr);
  nn::Gradients backward(const nn::Tape& tape, const nn::Tensor& output_grad,
                         nn::GradTarget target = nn::GradTarget::params_and_input);
  void update(nn::OptimState& optim, const nn::Gradients& grads);
  const AccessCounts& counts() const noexcept { return counts_; }
  /// Read-only snapshot (counted as no access; used after the run).
  const nn::ModelState& snapshot() const noexcept { return state_; }

 private:
  nn::ModelState state_;
  AccessCounts counts_;
};

/// Receiver round: accuracy measured on `received` before the update, then
/// `epochs` supervised passes. Throws NumericError on a non-finite loss.
struct ReceiverStep {
  double accuracy = 0.0;
  double loss = 0.0;  // loss of the first pass (pre-update)
};
ReceiverStep train_step_receiver(LiveModel& decoder, nn::OptimState& optim, const nn::Tensor& received,
                                 std::span<const int> messages, std::size_t epochs = 1);

/// d(surrogate objective)/d(encoder output) from noisy feedback:
/// row i = (l~_i - mean(l~)) * w_i / sigma_pi^2 / B. Non-finite feedback yields
/// std::nullopt (the round is skipped).
std::optional<nn::Tensor> policy_gradient_outputs(const nn::Tensor& exploration, std::span<const double> feedback,
                                                  double sigma_pi);

struct TransmitterStep {
  bool skipped = false;
  double mean_loss = 0.0;  // true mean loss of the explored round (not fed back)
};

/// Transmitter round: x = enc(m), x_p = x + w, w ~ N(0, sigma_pi^2), channel
/// (AWGN + optional perturbation), per-example receiver losses fed back with
/// N(0, sigma_f^2) noise, then a policy-gradient step on the encoder.
TransmitterStep train_step_transmitter(LiveModel& encoder, nn::OptimState& optim, LiveModel& decoder,
                                       std::span<const int> messages, double sigma_pi, double sigma_f,
                                       double channel_stddev, std::optional<std::span<const double>> perturbation,
                                       Rng& rng);

/// Encoder parameter gradient of the policy-gradient estimate (no update),
/// for comparison against the white-box gradient.
nn::Gradients policy_gradient_estimate(const nn::ModelState& encoder, const nn::ModelState& decoder,
                                       std::span<const int> messages, double sigma_pi, double sigma_f,
                                       double channel_stddev, Rng& rng);
/// White-box reference: encoder parameter gradient of the mean receiver loss.
nn::Gradients supervised_encoder_gradient(const nn::ModelState& encoder, const nn::ModelState& decoder,
                                          std::span<const int> messages, double channel_stddev, Rng& rng);

struct AccuracyTrace {
  std::vector<double> accuracy;
  std::vector<bool> attacked;
  std::size_t window_start = 0;
  std::size_t window_end = 0;
  std::size_t skipped_rounds = 0;
  AccessCounts encoder_access;
  AccessCounts decoder_access;
};

struct SimulationResult {
  AccuracyTrace trace;
  nn::ModelState encoder;
  nn::ModelState decoder;
};

/// Alternating receiver/transmitter training for config.time_steps rounds.
/// `stop_after` truncates the run (used to snapshot the system mid-run).
SimulationResult run_simulation(const DrlConfig& config, const AttackSchedule* schedule,
                                std::optional<std::size_t> stop_after = std::nullopt);

/// Mean of trace.accuracy over [begin, end).
double window_mean(const AccuracyTrace& trace, std::size_t begin, std::size_t end);

struct TracePoint {
  std::size_t time_step = 0;
  double mean = 0.0;
  double std = 0.0;
  std::size_t n = 0;
};
std::vector<TracePoint> aggregate_traces(std::span<const AccuracyTrace> traces);

/// Independent replicates with seeds derived from config.seed; run on OpenMP
/// workers under Exec::parallel.
std::vector<AccuracyTrace> run_replicates(const DrlConfig& config, const AttackSchedule* schedule,
                                          std::size_t replicates, kernels::Exec exec = kernels::Exec::parallel);
DrlConfig replicate_config(const DrlConfig& config, std::size_t replicate);

}  // namespace phyadv::drl
