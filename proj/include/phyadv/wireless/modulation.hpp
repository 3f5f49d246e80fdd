#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace phyadv::wireless {

using Complex = std::complex<double>;
using Signal = std::vector<Complex>;

/// The eight digital schemes of the RML2016.10a-style corpus. The numeric value
/// is the on-disk scheme tag and the classifier label.
enum class Scheme : std::uint8_t { PAM4 = 0, BPSK, QPSK, PSK8, QAM16, QAM64, CPFSK, GFSK };

inline constexpr std::size_t kNumSchemes = 8;
inline constexpr std::array<Scheme, kNumSchemes> kAllSchemes{Scheme::PAM4,  Scheme::BPSK,  Scheme::QPSK,
                                                             Scheme::PSK8,  Scheme::QAM16, Scheme::QAM64,
                                                             Scheme::CPFSK, Scheme::GFSK};

std::string_view scheme_name(Scheme s) noexcept;
/// Throws ConfigError for names outside the eight schemes.
Scheme scheme_from_name(std::string_view name);
/// Throws ConfigError for tags >= 8.
Scheme scheme_from_tag(std::uint8_t tag);

int bits_per_symbol(Scheme s);
/// Linear (constellation-mapped) schemes; CPFSK and GFSK are constant-envelope.
bool is_linear(Scheme s) noexcept;

struct ModulationParams {
  int samples_per_symbol = 8;
  double cpfsk_index = 0.5;
  double gfsk_index = 0.5;
  double gfsk_bt = 0.35;
  int gfsk_span_symbols = 4;
};

/// Gray-mapped unit-average-energy constellation (linear schemes only), indexed by
/// the symbol's bit pattern read MSB first.
std::vector<Complex> constellation(Scheme s);

/// One complex symbol per group of bits_per_symbol bits (linear schemes only).
Signal map_symbols(Scheme s, std::span<const std::uint8_t> bits);

/// Complex baseband waveform: rectangular pulses for linear schemes, continuous
/// phase for CPFSK/GFSK. Bit count must be a multiple of bits_per_symbol.
Signal modulate(Scheme s, std::span<const std::uint8_t> bits, int samples_per_symbol,
                const ModulationParams& params = {});

}  // namespace phyadv::wireless
