#include "phyadv/harness/ood.hpp"

#include <cmath>
#include <cstring>

#include "phyadv/binary_io.hpp"
#include "phyadv/errors.hpp"
#include "phyadv/nn/loss.hpp"
#include "phyadv/rng.hpp"

namespace phyadv::harness {

namespace {

constexpr std::size_t kProbeChunk = 256;

wireless::IqFrame noise_frame(std::uint64_t seed) {
  auto rng = make_rng(seed);
  std::normal_distribution<double> n01(0.0, std::sqrt(0.5));
  wireless::Signal s(wireless::kFrameLength);
  for (auto& v : s) v = {n01(rng), n01(rng)};
  return wireless::to_frame(s, wireless::Scheme::PAM4, 0);
}

}  // namespace

std::string frame_hash(const wireless::IqFrame& frame) {
  std::vector<std::uint8_t> bytes(sizeof(frame.samples) + 2);
  std::memcpy(bytes.data(), frame.samples.data(), sizeof(frame.samples));
  bytes[sizeof(frame.samples)] = static_cast<std::uint8_t>(frame.label);
  bytes[sizeof(frame.samples) + 1] = static_cast<std::uint8_t>(frame.snr_db);
  return io::sha256_hex(bytes);
}

std::unordered_set<std::string> frame_hashes(const wireless::Dataset& dataset, std::span<const std::size_t> indices) {
  std::vector<std::string> hashes(indices.size());
  kernels::for_each_index(indices.size(), kernels::Exec::parallel,
                          [&](std::size_t i) { hashes[i] = frame_hash(dataset.frames[indices[i]]); });
  return {hashes.begin(), hashes.end()};
}

OutOfDistributionSuite build_ood_suite(const wireless::DatasetConfig& dataset, const OodConfig& config,
                                       std::uint64_t seed) {
  OutOfDistributionSuite suite;
  const auto per_cell = config.frames_per_cell;
  auto add_cells = [&](ProbeSet& probe, wireless::Scheme scheme, int snr, std::uint64_t stream) {
    for (std::size_t i = 0; i < per_cell; ++i) {
      const auto parts = wireless::synthesize_frame(scheme, snr, wireless::frame_seed(stream, scheme, snr, i), dataset);
      probe.frames.push_back(wireless::to_frame(parts.noisy, scheme, snr));
      probe.labels.push_back(static_cast<int>(scheme));
    }
  };
  for (int snr : config.unseen_snrs) {
    ProbeSet p;
    p.name = "unseen-snr " + std::to_string(snr) + " dB";
    p.snr_db = snr;
    for (auto s : dataset.schemes)
      if (!config.holdout_scheme || s != *config.holdout_scheme) add_cells(p, s, snr, derive_seed(seed, {0}));
    suite.probes.push_back(std::move(p));
  }
  if (config.holdout_scheme) {
    ProbeSet p;
    p.name = "held-out-scheme " + std::string(wireless::scheme_name(*config.holdout_scheme));
    for (int snr : dataset.snrs) add_cells(p, *config.holdout_scheme, snr, derive_seed(seed, {1}));
    suite.probes.push_back(std::move(p));
  }
  if (config.noise_frames > 0) {
    ProbeSet p;
    p.name = "pure-noise";
    for (std::size_t i = 0; i < config.noise_frames; ++i) {
      p.frames.push_back(noise_frame(derive_seed(seed, {2, i})));
      p.labels.push_back(static_cast<int>(i % wireless::kNumSchemes));
    }
    suite.probes.push_back(std::move(p));
  }
  return suite;
}

std::vector<ProbeResult> ood_probe(const nn::ModelState& model, const OutOfDistributionSuite& suite,
                                   const std::unordered_set<std::string>& training_hashes, kernels::Exec exec) {
  for (const auto& probe : suite.probes) {
    if (probe.frames.empty()) throw ConfigError("probe set '" + probe.name + "' is empty");
    if (probe.labels.size() != probe.frames.size()) throw ConfigError("probe set '" + probe.name + "' lacks labels");
    for (const auto& f : probe.frames)
      if (training_hashes.count(frame_hash(f)))
        throw ConfigError("probe set '" + probe.name + "' overlaps the training data");
  }

  std::vector<ProbeResult> results;
  for (const auto& probe : suite.probes) {
    const auto inputs = wireless::frames_tensor(probe.frames);
    const std::size_t n = probe.frames.size();
    const std::size_t chunks = (n + kProbeChunk - 1) / kProbeChunk;
    std::vector<double> confidence(n);
    std::vector<int> hit(n);
    kernels::for_each_index(chunks, exec, [&](std::size_t c) {
      const std::size_t begin = c * kProbeChunk;
      const std::size_t count = std::min(kProbeChunk, n - begin);
      const auto batch = kernels::take_rows(inputs, begin, count);
      const auto probs = model.ends_with_softmax() ? nn::forward(model, batch) : nn::softmax(nn::logits(model, batch));
      for (std::size_t r = 0; r < count; ++r) {
        const auto p = probs.row(r);
        const auto top = nn::argmax(p);
        confidence[begin + r] = p[top];
        hit[begin + r] = static_cast<int>(top) == probe.labels[begin + r];
      }
    });
    ProbeResult r;
    r.name = probe.name;
    r.frames = n;
    double sum = 0.0, sq = 0.0, hits = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      sum += confidence[i];
      sq += confidence[i] * confidence[i];
      hits += hit[i];
    }
    const double dn = static_cast<double>(n);
    r.accuracy = hits / dn;
    r.mean_confidence = sum / dn;
    r.std_confidence = std::sqrt(std::max(0.0, sq / dn - r.mean_confidence * r.mean_confidence));
    results.push_back(r);
  }
  return results;
}

}  // namespace phyadv::harness
