#pragma once

#include <cstdint>
#include <vector>

#include "phyadv/autoenc/autoencoder.hpp"
#include "phyadv/autoenc/universal.hpp"
#include "phyadv/drl/feedback.hpp"

namespace phyadv::drl {

struct Candidate {
  autoenc::UniversalPerturbation perturbation;
  double surrogate_bler = 0.0;
  double clean_bler = 0.0;
  bool success() const noexcept { return surrogate_bler > clean_bler; }
};

struct SourceRun {
  std::vector<Candidate> candidates;
  double eval_ebno_db = 0.0;
  std::size_t trials = 0;
  std::size_t successes() const noexcept;
};

struct SourceConfig {
  autoenc::UniversalConfig crafting;
  std::size_t candidates = 250;
  double eval_ebno_db = 4.0;
  std::size_t trials = 4096;
  std::uint64_t seed = 17;
};

/// Crafts `candidates` universal perturbations (seeds derived from config.seed)
/// against a surrogate and scores each by paired Monte-Carlo BLER.
SourceRun craft_source_run(const autoenc::Autoencoder& surrogate, const SourceConfig& config,
                           kernels::Exec exec = kernels::Exec::parallel);

/// The `count` successful candidates with the largest surrogate BLER, in that
/// order. Throws ConfigError reporting the shortfall when fewer succeeded.
std::vector<Candidate> transfer_perturbations(const SourceRun& source, std::size_t count);

std::vector<autoenc::UniversalPerturbation> pool_of(const std::vector<Candidate>& selected);

struct TransferOutcome {
  std::vector<double> clean_accuracy;     // per pool member (paired rounds)
  std::vector<double> attacked_accuracy;  // per pool member
  double success_rate = 0.0;              // fraction with attacked < clean
};

/// Applies each member to `rounds` rounds of `batch` messages of the target
/// system; the clean and attacked rounds share messages and noise.
TransferOutcome evaluate_transfer(const nn::ModelState& encoder, const nn::ModelState& decoder,
                                  const std::vector<autoenc::UniversalPerturbation>& pool, double ebno_db,
                                  std::size_t batch, std::size_t rounds, std::uint64_t seed,
                                  kernels::Exec exec = kernels::Exec::parallel);

}  // namespace phyadv::drl
