#include "phyadv/wireless/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>

#include "phyadv/binary_io.hpp"
#include "phyadv/errors.hpp"
#include "phyadv/rng.hpp"

namespace phyadv::wireless {

namespace {
constexpr std::string_view kMagic = "PHYADVD1";
constexpr std::uint32_t kSchemaVersion = 1;
}  // namespace

bool on_snr_grid(int snr_db) noexcept {
  return std::find(kSnrGrid.begin(), kSnrGrid.end(), snr_db) != kSnrGrid.end();
}

bool IqFrame::finite() const noexcept {
  return std::all_of(samples.begin(), samples.end(), [](float v) { return std::isfinite(v); });
}

std::vector<std::size_t> Dataset::indices(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < split.size(); ++i)
    if (split[i] == s) out.push_back(i);
  return out;
}

std::uint64_t frame_seed(std::uint64_t dataset_seed, Scheme scheme, int snr_db, std::size_t index) noexcept {
  return derive_seed(dataset_seed, {static_cast<std::uint64_t>(scheme), static_cast<std::uint64_t>(snr_db + 128),
                                    static_cast<std::uint64_t>(index)});
}

FrameParts synthesize_frame(Scheme scheme, int snr_db, std::uint64_t seed, const DatasetConfig& config) {
  Rng rng(seed);
  const auto sps = static_cast<std::size_t>(config.modulation.samples_per_symbol);
  const std::size_t symbols = (kFrameLength + sps - 1) / sps + config.burst_margin_symbols;
  const auto k = static_cast<std::size_t>(bits_per_symbol(scheme));
  std::vector<std::uint8_t> bits(symbols * k);
  std::bernoulli_distribution coin;
  for (auto& b : bits) b = coin(rng) ? 1 : 0;
  const auto burst = modulate(scheme, bits, config.modulation.samples_per_symbol, config.modulation);

  std::uniform_int_distribution<std::size_t> start_dist(0, burst.size() - kFrameLength);
  const auto start = start_dist(rng);
  FrameParts parts;
  parts.clean.assign(burst.begin() + static_cast<std::ptrdiff_t>(start),
                     burst.begin() + static_cast<std::ptrdiff_t>(start + kFrameLength));
  if (config.channel.random_phase_offset) {
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    const auto rot = std::polar(1.0, phase(rng));
    for (auto& s : parts.clean) s *= rot;
  }
  parts.noisy = parts.clean;
  add_awgn(parts.noisy, snr_db, rng);
  return parts;
}

IqFrame to_frame(std::span<const Complex> window, Scheme scheme, int snr_db) {
  if (window.size() != kFrameLength) throw ConfigError("frame window must have 128 samples");
  IqFrame f;
  f.label = scheme;
  f.snr_db = static_cast<std::int8_t>(snr_db);
  for (std::size_t n = 0; n < kFrameLength; ++n) {
    f.samples[n] = static_cast<float>(window[n].real());
    f.samples[kFrameLength + n] = static_cast<float>(window[n].imag());
  }
  return f;
}

Signal frame_signal(const IqFrame& frame) {
  Signal s(kFrameLength);
  for (std::size_t n = 0; n < kFrameLength; ++n) s[n] = frame.at(n);
  return s;
}

void assign_split(Dataset& dataset, double train_fraction) {
  if (train_fraction < 0.0 || train_fraction > 1.0) throw ConfigError("train fraction must be in [0,1]");
  std::map<std::pair<int, int>, std::size_t> cell_count;
  for (const auto& f : dataset.frames) ++cell_count[{static_cast<int>(f.label), f.snr_db}];
  std::map<std::pair<int, int>, std::size_t> seen;
  dataset.split.resize(dataset.frames.size());
  for (std::size_t i = 0; i < dataset.frames.size(); ++i) {
    const std::pair<int, int> cell{static_cast<int>(dataset.frames[i].label), dataset.frames[i].snr_db};
    const auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(cell_count[cell])));
    dataset.split[i] = seen[cell]++ < n_train ? Split::train : Split::test;
  }
}

Dataset synthesize_dataset(const DatasetConfig& config, kernels::Exec exec) {
  if (config.frames_per_cell == 0) throw ConfigError("frames per cell must be > 0");
  if (config.schemes.empty() || config.snrs.empty()) throw ConfigError("dataset needs schemes and SNR levels");
  for (int snr : config.snrs)
    if (!on_snr_grid(snr)) throw ConfigError("SNR " + std::to_string(snr) + " dB is not on the 2 dB grid");
  const std::size_t per_cell = config.frames_per_cell;
  const std::size_t cells = config.schemes.size() * config.snrs.size();
  Dataset ds;
  ds.seed = config.seed;
  ds.frames.resize(cells * per_cell);
  kernels::for_each_index(ds.frames.size(), exec, [&](std::size_t idx) {
    const std::size_t cell = idx / per_cell;
    const Scheme scheme = config.schemes[cell / config.snrs.size()];
    const int snr = config.snrs[cell % config.snrs.size()];
    const auto parts = synthesize_frame(scheme, snr, frame_seed(config.seed, scheme, snr, idx % per_cell), config);
    ds.frames[idx] = to_frame(parts.noisy, scheme, snr);
  });
  assign_split(ds, config.train_fraction);
  return ds;
}

nn::Tensor frames_tensor(std::span<const IqFrame> frames) {
  if (frames.empty()) throw ConfigError("no frames selected");
  nn::Tensor t({frames.size(), 2, kFrameLength});
  for (std::size_t i = 0; i < frames.size(); ++i)
    std::copy(frames[i].samples.begin(), frames[i].samples.end(), t.raw() + i * kFrameValues);
  return t;
}

nn::Tensor frames_tensor(const Dataset& dataset, std::span<const std::size_t> indices) {
  std::vector<IqFrame> picked;
  picked.reserve(indices.size());
  for (auto i : indices) picked.push_back(dataset.frames.at(i));
  return frames_tensor(picked);
}

std::vector<int> frame_labels(const Dataset& dataset, std::span<const std::size_t> indices) {
  std::vector<int> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(static_cast<int>(dataset.frames.at(i).label));
  return out;
}

std::vector<std::uint8_t> encode_dataset(const Dataset& dataset) {
  io::ByteWriter w;
  w.bytes(kMagic);
  w.u64(dataset.frames.size());
  w.u32(kSchemaVersion);
  for (const auto& f : dataset.frames) {
    w.u8(static_cast<std::uint8_t>(f.label));
    w.i8(f.snr_db);
    for (float v : f.samples) w.f32(v);
  }
  return w.buffer();
}

Dataset decode_dataset(std::vector<std::uint8_t> bytes, double train_fraction) {
  io::ByteReader r(std::move(bytes));
  if (r.bytes(kMagic.size()) != kMagic) throw FormatError("bad magic: not a PHYADVD1 dataset");
  const auto count = r.u64();
  if (const auto v = r.u32(); v != kSchemaVersion) throw FormatError("unsupported dataset schema " + std::to_string(v));
  constexpr std::size_t kRecord = 2 + 4 * kFrameValues;
  if (r.remaining() != count * kRecord) throw FormatError("dataset size does not match frame count");
  Dataset ds;
  ds.frames.resize(count);
  for (auto& f : ds.frames) {
    try {
      f.label = scheme_from_tag(r.u8());
    } catch (const ConfigError& e) {
      throw FormatError(e.what());
    }
    f.snr_db = r.i8();
    if (!on_snr_grid(f.snr_db)) throw FormatError("frame SNR " + std::to_string(f.snr_db) + " dB is off the grid");
    for (auto& v : f.samples) v = r.f32();
    if (!f.finite()) throw FormatError("non-finite sample in dataset");
  }
  assign_split(ds, train_fraction);
  return ds;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  io::write_file(path, encode_dataset(dataset));
}

Dataset load_dataset(const std::filesystem::path& path, double train_fraction) {
  return decode_dataset(io::read_file(path), train_fraction);
}

std::string dataset_hash(const Dataset& dataset) { return io::sha256_hex(encode_dataset(dataset)); }

}  // namespace phyadv::wireless
