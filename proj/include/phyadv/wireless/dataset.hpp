#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "phyadv/kernels/parallel.hpp"
#include "phyadv/nn/tensor.hpp"
#include "phyadv/wireless/channel.hpp"
#include "phyadv/wireless/modulation.hpp"

namespace phyadv::wireless {

inline constexpr std::size_t kFrameLength = 128;
inline constexpr std::size_t kFrameValues = 2 * kFrameLength;

/// The 2 dB SNR grid -20, -18, ..., 18.
inline constexpr std::array<int, 20> kSnrGrid{-20, -18, -16, -14, -12, -10, -8, -6, -4, -2,
                                              0,   2,   4,   6,   8,   10,  12, 14, 16, 18};
bool on_snr_grid(int snr_db) noexcept;

/// 2 x 128 window: samples[0..127] is the I row, samples[128..255] the Q row.
struct IqFrame {
  std::array<float, kFrameValues> samples{};
  Scheme label = Scheme::BPSK;
  std::int8_t snr_db = 0;

  Complex at(std::size_t n) const noexcept { return {samples[n], samples[kFrameLength + n]}; }
  bool finite() const noexcept;
};

enum class Split : std::uint8_t { train, test };

struct Dataset {
  std::vector<IqFrame> frames;
  std::vector<Split> split;  // one marker per frame
  std::uint64_t seed = 0;

  std::size_t size() const noexcept { return frames.size(); }
  std::vector<std::size_t> indices(Split s) const;
};

struct DatasetConfig {
  std::size_t frames_per_cell = 100;
  std::uint64_t seed = 1;
  double train_fraction = 0.8;
  ChannelConfig channel;
  ModulationParams modulation;
  /// Symbols in the burst a window is cut from (beyond the window itself).
  std::size_t burst_margin_symbols = 16;
  std::vector<Scheme> schemes{kAllSchemes.begin(), kAllSchemes.end()};
  std::vector<int> snrs{kSnrGrid.begin(), kSnrGrid.end()};
};

/// Clean (phase-rotated) and noisy versions of one window.
struct FrameParts {
  Signal clean;
  Signal noisy;
};

/// One frame as a pure function of (scheme, snr, seed, config): random bits,
/// modulation, random window offset, optional uniform phase offset, AWGN.
FrameParts synthesize_frame(Scheme scheme, int snr_db, std::uint64_t frame_seed, const DatasetConfig& config);
IqFrame to_frame(std::span<const Complex> window, Scheme scheme, int snr_db);
Signal frame_signal(const IqFrame& frame);

/// Seed of frame `index` of cell (scheme, snr).
std::uint64_t frame_seed(std::uint64_t dataset_seed, Scheme scheme, int snr_db, std::size_t index) noexcept;

/// schemes x snrs x frames_per_cell frames, cell-major; first
/// floor(train_fraction * count) frames of each cell are training frames.
Dataset synthesize_dataset(const DatasetConfig& config, kernels::Exec exec = kernels::Exec::parallel);

/// Recomputes split markers from per-cell order (used after import).
void assign_split(Dataset& dataset, double train_fraction);

/// [N, 2, 128] network input and label vector for the chosen frames.
nn::Tensor frames_tensor(std::span<const IqFrame> frames);
nn::Tensor frames_tensor(const Dataset& dataset, std::span<const std::size_t> indices);
std::vector<int> frame_labels(const Dataset& dataset, std::span<const std::size_t> indices);

/// "PHYADVD1" | u64 frame count | u32 schema version=1 | per frame: u8 scheme
/// tag, i8 snr-db, 256 x f32 (I row then Q row); little-endian.
std::vector<std::uint8_t> encode_dataset(const Dataset& dataset);
Dataset decode_dataset(std::vector<std::uint8_t> bytes, double train_fraction = 0.8);
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path, double train_fraction = 0.8);

/// SHA-256 of the encoded dataset.
std::string dataset_hash(const Dataset& dataset);

}  // namespace phyadv::wireless
