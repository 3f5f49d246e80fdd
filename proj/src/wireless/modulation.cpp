#include "phyadv/wireless/modulation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "phyadv/errors.hpp"

namespace phyadv::wireless {

namespace {

constexpr std::array<std::string_view, kNumSchemes> kNames{"PAM4",  "BPSK",  "QPSK",  "8PSK",
                                                           "QAM16", "QAM64", "CPFSK", "GFSK"};

unsigned gray_decode(unsigned g) {
  unsigned b = g;
  for (unsigned shift = 1; shift < 8; shift <<= 1) b ^= b >> shift;
  return b;
}

// Gray-coded PAM levels for `bits` bits per axis: pattern -> odd integer level.
double pam_level(unsigned pattern, unsigned bits) {
  const unsigned index = gray_decode(pattern);
  const int levels = 1 << bits;
  return static_cast<double>(2 * static_cast<int>(index) - (levels - 1));
}

unsigned read_bits(std::span<const std::uint8_t> bits, std::size_t offset, int count) {
  unsigned v = 0;
  for (int i = 0; i < count; ++i) v = (v << 1) | (bits[offset + static_cast<std::size_t>(i)] & 1u);
  return v;
}

void check_bits(Scheme s, std::span<const std::uint8_t> bits) {
  const auto k = static_cast<std::size_t>(bits_per_symbol(s));
  if (bits.size() % k != 0)
    throw ConfigError(std::string(scheme_name(s)) + " needs a bit count divisible by " + std::to_string(k));
}

Signal continuous_phase(std::span<const double> frequency, double index, int sps) {
  Signal out(frequency.size());
  double phase = 0.0;
  for (std::size_t n = 0; n < frequency.size(); ++n) {
    phase += std::numbers::pi * index * frequency[n] / sps;
    out[n] = std::polar(1.0, phase);
  }
  return out;
}

}  // namespace

std::string_view scheme_name(Scheme s) noexcept {
  const auto i = static_cast<std::size_t>(s);
  return i < kNumSchemes ? kNames[i] : "?";
}

Scheme scheme_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kNumSchemes; ++i)
    if (kNames[i] == name) return static_cast<Scheme>(i);
  throw ConfigError("unknown modulation scheme '" + std::string(name) + "'");
}

Scheme scheme_from_tag(std::uint8_t tag) {
  if (tag >= kNumSchemes) throw ConfigError("unknown modulation scheme tag " + std::to_string(tag));
  return static_cast<Scheme>(tag);
}

int bits_per_symbol(Scheme s) {
  switch (s) {
    case Scheme::PAM4:
      return 2;
    case Scheme::BPSK:
      return 1;
    case Scheme::QPSK:
      return 2;
    case Scheme::PSK8:
      return 3;
    case Scheme::QAM16:
      return 4;
    case Scheme::QAM64:
      return 6;
    case Scheme::CPFSK:
    case Scheme::GFSK:
      return 1;
  }
  throw ConfigError("unknown modulation scheme");
}

bool is_linear(Scheme s) noexcept { return s != Scheme::CPFSK && s != Scheme::GFSK; }

std::vector<Complex> constellation(Scheme s) {
  const int k = bits_per_symbol(s);
  const unsigned m = 1u << k;
  std::vector<Complex> points(m);
  switch (s) {
    case Scheme::BPSK:
      points = {{1.0, 0.0}, {-1.0, 0.0}};
      break;
    case Scheme::QPSK:
      for (unsigned p = 0; p < m; ++p)
        points[p] = Complex(1.0 - 2.0 * ((p >> 1) & 1u), 1.0 - 2.0 * (p & 1u)) / std::sqrt(2.0);
      break;
    case Scheme::PAM4:
      for (unsigned p = 0; p < m; ++p) points[p] = Complex(pam_level(p, 2) / std::sqrt(5.0), 0.0);
      break;
    case Scheme::PSK8:
      for (unsigned p = 0; p < m; ++p) points[p] = std::polar(1.0, 2.0 * std::numbers::pi * gray_decode(p) / 8.0);
      break;
    case Scheme::QAM16:
    case Scheme::QAM64: {
      const unsigned half = static_cast<unsigned>(k / 2);
      // mean energy of a square QAM with odd levels +-1..+-(L-1): 2(L^2-1)/3
      const double levels = static_cast<double>(1u << half);
      const double norm = std::sqrt(2.0 * (levels * levels - 1.0) / 3.0);
      for (unsigned p = 0; p < m; ++p)
        points[p] = Complex(pam_level(p >> half, half), pam_level(p & ((1u << half) - 1u), half)) / norm;
      break;
    }
    default:
      throw ConfigError(std::string(scheme_name(s)) + " has no constellation");
  }
  return points;
}

Signal map_symbols(Scheme s, std::span<const std::uint8_t> bits) {
  check_bits(s, bits);
  const auto points = constellation(s);
  const int k = bits_per_symbol(s);
  Signal out(bits.size() / static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = points[read_bits(bits, i * static_cast<std::size_t>(k), k)];
  return out;
}

Signal modulate(Scheme s, std::span<const std::uint8_t> bits, int samples_per_symbol, const ModulationParams& params) {
  if (samples_per_symbol < 1) throw ConfigError("samples per symbol must be >= 1");
  check_bits(s, bits);
  const auto sps = static_cast<std::size_t>(samples_per_symbol);
  if (is_linear(s)) {
    const auto symbols = map_symbols(s, bits);
    Signal out;
    out.reserve(symbols.size() * sps);
    for (const auto& sym : symbols) out.insert(out.end(), sps, sym);
    return out;
  }

  std::vector<double> nrz(bits.size() * sps);
  for (std::size_t i = 0; i < bits.size(); ++i)
    for (std::size_t j = 0; j < sps; ++j) nrz[i * sps + j] = bits[i] ? 1.0 : -1.0;

  if (s == Scheme::CPFSK) return continuous_phase(nrz, params.cpfsk_index, samples_per_symbol);

  // GFSK: NRZ frequency pulse through a unit-area Gaussian filter.
  const double sigma = std::sqrt(std::log(2.0)) / (2.0 * std::numbers::pi * params.gfsk_bt) * samples_per_symbol;
  const int half = params.gfsk_span_symbols * samples_per_symbol / 2;
  std::vector<double> taps(static_cast<std::size_t>(2 * half + 1));
  double area = 0.0;
  for (int t = -half; t <= half; ++t) area += taps[static_cast<std::size_t>(t + half)] = std::exp(-0.5 * t * t / (sigma * sigma));
  for (auto& t : taps) t /= area;
  std::vector<double> freq(nrz.size(), 0.0);
  for (std::size_t n = 0; n < nrz.size(); ++n)
    for (int t = -half; t <= half; ++t) {
      const auto idx = static_cast<long long>(n) - t;
      // hold the edge values so the waveform has no start-up transient
      const auto clamped = std::clamp<long long>(idx, 0, static_cast<long long>(nrz.size()) - 1);
      freq[n] += taps[static_cast<std::size_t>(t + half)] * nrz[static_cast<std::size_t>(clamped)];
    }
  return continuous_phase(freq, params.gfsk_index, samples_per_symbol);
}

}  // namespace phyadv::wireless
