#pragma once

#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "phyadv/harness/config.hpp"
#include "phyadv/kernels/parallel.hpp"
#include "phyadv/nn/model.hpp"
#include "phyadv/wireless/dataset.hpp"

namespace phyadv::harness {

struct ProbeSet {
  std::string name;  // "unseen-snr <dB>", "held-out-scheme <name>", "pure-noise"
  int snr_db = 0;    // unseen-snr probes
  std::vector<wireless::IqFrame> frames;
  /// Pure-noise labels are assigned round-robin over the classes.
  std::vector<int> labels;
};

struct OutOfDistributionSuite {
  std::vector<ProbeSet> probes;
};

/// Hex digest of one frame's samples, label and SNR (used for overlap checks).
std::string frame_hash(const wireless::IqFrame& frame);
std::unordered_set<std::string> frame_hashes(const wireless::Dataset& dataset, std::span<const std::size_t> indices);

/// One probe per unseen odd-dB SNR (every dataset scheme except the holdout),
/// frames of the held-out scheme on the dataset SNRs, and unit-power complex
/// white noise. Frame seeds are derived from `seed`.
OutOfDistributionSuite build_ood_suite(const wireless::DatasetConfig& dataset, const OodConfig& config,
                                       std::uint64_t seed);

struct ProbeResult {
  std::string name;
  std::size_t frames = 0;
  double accuracy = 0.0;
  double mean_confidence = 0.0;  // mean max-softmax probability
  double std_confidence = 0.0;
  /// Accuracy the probe is compared against (neighbouring trained SNRs,
  /// in-distribution accuracy, or chance); filled in by the caller.
  double reference_accuracy = 0.0;
};

/// Accuracy and confidence per probe set. Throws ConfigError if any probe frame
/// hashes to a training frame.
std::vector<ProbeResult> ood_probe(const nn::ModelState& model, const OutOfDistributionSuite& suite,
                                   const std::unordered_set<std::string>& training_hashes,
                                   kernels::Exec exec = kernels::Exec::parallel);

}  // namespace phyadv::harness
