#pragma once

#include <cstdint>
#include <limits>
#include <span>

#include "phyadv/kernels/parallel.hpp"
#include "phyadv/rng.hpp"
#include "phyadv/wireless/modulation.hpp"

namespace phyadv::wireless {

/// Pass-through sentinel for awgn().
inline constexpr double kInfiniteSnr = std::numeric_limits<double>::infinity();

enum class ChannelKind { awgn };

struct ChannelConfig {
  ChannelKind kind = ChannelKind::awgn;
  bool random_phase_offset = true;
};

/// Mean |s|^2.
double signal_power(std::span<const Complex> signal) noexcept;

/// Complex AWGN at total-signal-power over total-noise-power `snr_db`: noise
/// variance P/10^(snr/10), split equally across I and Q. +inf passes through.
Signal awgn(std::span<const Complex> signal, double snr_db, std::uint64_t seed);
void add_awgn(std::span<Complex> signal, double snr_db, Rng& rng);

/// White Gaussian jamming whose realized energy is exactly
/// jam_power_ratio * |signal|^2 (matching an adversarial budget of the same ratio).
Signal jam(std::span<const Complex> signal, double jam_power_ratio, std::uint64_t seed);

/// Real-vector counterparts used by the autoencoders.
void add_gaussian(std::span<double> x, double stddev, Rng& rng);
/// Adds Gaussian noise rescaled to exactly `energy` total energy.
void add_jamming(std::span<double> x, double energy, Rng& rng);

/// snr = ebno + 10 log10(bits per channel use).
double ebno_to_snr(double ebno_db, double bits_per_channel_use);

/// Gaussian tail Q(x) = P(N(0,1) > x).
double q_function(double x);

/// Closed form for uncoded BPSK: Q(sqrt(2 Eb/N0)).
double bpsk_ber_theory(double ebno_db);

struct BerEstimate {
  std::size_t errors = 0;
  std::size_t bits = 0;
  double ber() const noexcept { return bits ? static_cast<double>(errors) / static_cast<double>(bits) : 0.0; }
  /// Binomial standard error at the estimated rate.
  double standard_error() const noexcept;
};

/// Monte-Carlo uncoded BPSK over complex AWGN (1 bit per channel use),
/// hard decisions on the real part; chunked with per-chunk seeds.
BerEstimate simulate_bpsk_ber(double ebno_db, std::size_t bits, std::uint64_t seed,
                              kernels::Exec exec = kernels::Exec::parallel);

}  // namespace phyadv::wireless
