#include "phyadv/wireless/channel.hpp"

#include <cmath>
#include <random>

#include "phyadv/errors.hpp"
#include "phyadv/nn/tensor.hpp"

namespace phyadv::wireless {

double signal_power(std::span<const Complex> signal) noexcept {
  if (signal.empty()) return 0.0;
  double p = 0.0;
  for (const auto& s : signal) p += std::norm(s);
  return p / static_cast<double>(signal.size());
}

void add_awgn(std::span<Complex> signal, double snr_db, Rng& rng) {
  if (std::isinf(snr_db) && snr_db > 0) return;
  const double variance = signal_power(signal) / std::pow(10.0, snr_db / 10.0);
  std::normal_distribution<double> normal(0.0, std::sqrt(variance / 2.0));
  for (auto& s : signal) {
    const double i = normal(rng);
    const double q = normal(rng);
    s += Complex(i, q);
  }
}

Signal awgn(std::span<const Complex> signal, double snr_db, std::uint64_t seed) {
  Signal out(signal.begin(), signal.end());
  Rng rng(mix_seed(seed));
  add_awgn(out, snr_db, rng);
  return out;
}

Signal jam(std::span<const Complex> signal, double jam_power_ratio, std::uint64_t seed) {
  if (jam_power_ratio < 0.0) throw ConfigError("jam power ratio must be >= 0");
  Signal out(signal.begin(), signal.end());
  if (jam_power_ratio == 0.0 || signal.empty()) return out;
  Rng rng(mix_seed(seed));
  std::normal_distribution<double> normal;
  Signal noise(signal.size());
  double energy = 0.0;
  for (auto& n : noise) {
    const double i = normal(rng);
    const double q = normal(rng);
    n = Complex(i, q);
    energy += std::norm(n);
  }
  const double target = jam_power_ratio * signal_power(signal) * static_cast<double>(signal.size());
  const double k = std::sqrt(target / energy);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += k * noise[i];
  return out;
}

void add_gaussian(std::span<double> x, double stddev, Rng& rng) {
  if (stddev == 0.0) return;
  std::normal_distribution<double> normal(0.0, stddev);
  for (auto& v : x) v += normal(rng);
}

void add_jamming(std::span<double> x, double energy, Rng& rng) {
  if (energy <= 0.0) return;
  std::normal_distribution<double> normal;
  std::vector<double> j(x.size());
  for (auto& v : j) v = normal(rng);
  const double k = std::sqrt(energy / nn::squared_norm(j));
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += k * j[i];
}

double ebno_to_snr(double ebno_db, double bits_per_channel_use) {
  if (!(bits_per_channel_use > 0.0)) throw ConfigError("bits per channel use must be positive");
  return ebno_db + 10.0 * std::log10(bits_per_channel_use);
}

double q_function(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

double bpsk_ber_theory(double ebno_db) { return q_function(std::sqrt(2.0 * std::pow(10.0, ebno_db / 10.0))); }

double BerEstimate::standard_error() const noexcept {
  if (bits == 0) return 0.0;
  const double p = ber();
  return std::sqrt(p * (1.0 - p) / static_cast<double>(bits));
}

BerEstimate simulate_bpsk_ber(double ebno_db, std::size_t bits, std::uint64_t seed, kernels::Exec exec) {
  constexpr std::size_t kChunk = 8192;
  const std::size_t chunks = (bits + kChunk - 1) / kChunk;
  const double snr_db = ebno_to_snr(ebno_db, 1.0);
  const double sigma = std::sqrt(1.0 / std::pow(10.0, snr_db / 10.0) / 2.0);
  std::vector<std::size_t> errors(chunks, 0);
  kernels::for_each_index(chunks, exec, [&](std::size_t c) {
    Rng rng(derive_seed(seed, {c}));
    std::bernoulli_distribution coin;
    std::normal_distribution<double> normal(0.0, sigma);
    const std::size_t n = std::min(kChunk, bits - c * kChunk);
    std::size_t e = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const bool bit = coin(rng);
      const double tx = bit ? -1.0 : 1.0;
      const double rx = tx + normal(rng);
      (void)normal(rng);  // quadrature noise, irrelevant to the real-axis decision
      if ((rx < 0.0) != bit) ++e;
    }
    errors[c] = e;
  });
  BerEstimate est;
  est.bits = bits;
  for (auto e : errors) est.errors += e;
  return est;
}

}  // namespace phyadv::wireless
