#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "phyadv/kernels/parallel.hpp"
#include "phyadv/nn/model.hpp"
#include "phyadv/nn/optim.hpp"
#include "phyadv/rng.hpp"

namespace phyadv::autoenc {

struct AutoencoderConfig {
  std::size_t k = 4;                // bits per message
  std::size_t n = 7;                // real channel uses per message
  std::size_t encoder_hidden = 0;   // 0 means M = 2^k
  std::size_t decoder_hidden = 0;   // 0 means M
  double train_ebno_db = 7.0;
  std::size_t epochs = 60;
  std::size_t steps_per_epoch = 50;
  std::size_t batch_size = 256;
  double learning_rate = 5e-3;
  std::uint64_t seed = 1;

  std::size_t messages() const noexcept { return std::size_t{1} << k; }
  double rate() const noexcept { return static_cast<double>(k) / static_cast<double>(n); }
  void validate() const;
};

/// one-hot(M) -> dense(M->H) -> relu -> dense(H->n) -> energy-norm(n)
nn::ModelSpec encoder_spec(const AutoencoderConfig& config);
/// (n) -> dense(n->H) -> relu -> dense(H->M) -> softmax
nn::ModelSpec decoder_spec(const AutoencoderConfig& config);

/// Per-real-dimension AWGN stddev for unit-power codewords: sigma^2 = 1 / (2 R Eb/N0).
double noise_stddev(double ebno_db, double rate);

struct AeEpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;
  double accuracy = 0.0;
};

struct Autoencoder {
  nn::ModelState encoder;
  nn::ModelState decoder;
  std::vector<AeEpochRecord> history;

  std::size_t k() const;
  std::size_t n() const;
  std::size_t messages() const;
  double rate() const { return static_cast<double>(k()) / static_cast<double>(n()); }
};

/// [B, M] one-hot rows.
nn::Tensor one_hot(std::span<const int> messages, std::size_t m);
/// Encoder output for every message, [M, n].
nn::Tensor codebook(const nn::ModelState& encoder);

/// One end-to-end supervised step through an AWGN layer; returns the mean loss
/// and the pre-update accuracy. Throws NumericError on a non-finite loss.
struct StepResult {
  double loss = 0.0;
  double accuracy = 0.0;
};
StepResult end_to_end_step(Autoencoder& ae, nn::OptimState& enc_opt, nn::OptimState& dec_opt,
                           std::span<const int> messages, double stddev, Rng& rng);

/// Trains encoder and decoder jointly (fresh noise every batch). Throws
/// TrainingError with the epoch index on divergence.
Autoencoder train_autoencoder(const AutoencoderConfig& config);

/// Applied additively at the receiver input after AWGN.
struct ChannelModifier {
  enum class Kind { none, jam, adversarial };
  Kind kind = Kind::none;
  double jam_energy = 0.0;    // exact injected energy per block
  std::vector<double> delta;  // universal perturbation, length n

  static ChannelModifier none() { return {}; }
  static ChannelModifier jam(double energy_per_block) { return {Kind::jam, energy_per_block, {}}; }
  static ChannelModifier adversarial(std::vector<double> delta) { return {Kind::adversarial, 0.0, std::move(delta)}; }
  /// Energy this modifier adds to every block.
  double energy() const noexcept;
};

struct BlerPoint {
  double ebno_db = 0.0;
  double bler = 0.0;
  std::size_t errors = 0;
  std::size_t trials = 0;
  bool low_confidence = false;  // fewer than 10 errors observed
};

inline constexpr std::size_t kBlerChunk = 2048;

/// Monte-Carlo BLER with uniformly random messages. Randomness is drawn per
/// (grid point, chunk of kBlerChunk blocks), so the modifier does not disturb
/// the message/AWGN streams and curves with identical seeds are comparable.
/// serial: block-at-a-time decoding; parallel: chunked batched decoding on OpenMP.
std::vector<BlerPoint> bler_curve(const nn::ModelState& encoder, const nn::ModelState& decoder,
                                  std::span<const double> ebno_grid_db, std::size_t trials,
                                  const ChannelModifier& modifier, std::uint64_t seed,
                                  kernels::Exec exec = kernels::Exec::parallel);

}  // namespace phyadv::autoenc
