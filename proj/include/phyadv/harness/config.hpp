#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "phyadv/autoenc/autoencoder.hpp"
#include "phyadv/autoenc/universal.hpp"
#include "phyadv/drl/feedback.hpp"
#include "phyadv/drl/transfer.hpp"
#include "phyadv/modclass/attacks.hpp"
#include "phyadv/modclass/classifier.hpp"
#include "phyadv/threat_model.hpp"
#include "phyadv/wireless/dataset.hpp"

namespace phyadv::harness {

enum class CaseStudy { modclass, autoencoder, drl };
std::string_view case_study_name(CaseStudy c) noexcept;
CaseStudy case_study_from_name(std::string_view name);

/// Attack names used as report rows, with the family each belongs to.
inline constexpr std::string_view kGradientBased = "gradient-based";
inline constexpr std::string_view kGradientFree = "gradient-free";
inline constexpr std::string_view kRandomNoise = "random-noise";

struct RandomSearchConfig {
  std::size_t queries = 200;
  /// Fraction of the queries spent on independent directions; the rest refine the best one.
  double explore_fraction = 0.5;
  /// Refinement step as a fraction of the budget radius.
  double refine_step = 0.3;
};

struct ModclassAttackConfig {
  double power_ratio = 0.1;           // shared budget of every family
  std::size_t frames_per_snr = 16;    // attacked test frames per SNR level
  modclass::CwAttackConfig cw;        // max_power_ratio is forced to power_ratio
  RandomSearchConfig random_search;
};

struct AutoencoderAttackConfig {
  autoenc::UniversalConfig universal;  // power_ratio is the shared budget
  std::vector<double> ebno_grid_db{0, 2, 4, 6, 8, 10, 12};
  std::size_t trials = 100000;         // blocks per grid point
  double report_ebno_db = 8.0;         // operating point of the metric table
  std::size_t report_trials = 20000;
  RandomSearchConfig random_search;
  std::size_t search_batch = 512;      // received vectors scored per random-search query
};

/// Where the adversary's pools are crafted. independent: a surrogate the
/// adversary trained with its own seed. same_weights: a frozen copy of the live
/// system at the window start (the live run itself stays black-box).
enum class SurrogateMode { independent, same_weights };

struct DrlExperimentConfig {
  drl::DrlConfig system;
  autoenc::AutoencoderConfig surrogate;  // trained offline by the adversary
  SurrogateMode surrogate_mode = SurrogateMode::independent;
  drl::SourceConfig source;
  std::size_t pool_size = 200;
  std::size_t window_start = 200;
  std::size_t window_end = 400;
  drl::PoolPolicy policy = drl::PoolPolicy::uniform;
  std::size_t replicates = 5;
  RandomSearchConfig random_search;
  std::size_t search_batch = 512;
  std::size_t eval_rounds = 8;  // paired rounds per pool member for the metric table
};

struct TransferGridConfig {
  std::size_t models = 3;       // independently seeded models (matrix is models x models)
  std::size_t frames = 48;      // modclass: attacked frames per source model
  std::size_t candidates = 16;  // autoencoder/drl: perturbations per source model
};

struct OodConfig {
  bool enabled = true;
  std::vector<int> unseen_snrs{11, 13, 15, 17};
  std::size_t frames_per_cell = 32;
  std::optional<wireless::Scheme> holdout_scheme = wireless::Scheme::QAM64;
  std::size_t noise_frames = 512;
};

/// Everything an experiment needs. Every module seed left out of the file is
/// derived from `seed`.
struct ExperimentConfig {
  CaseStudy case_study = CaseStudy::modclass;
  std::uint64_t seed = 1;
  std::optional<ThreatModel> threat_model;
  /// Attack families left out, with the reason recorded in the report.
  std::map<std::string, std::string> skip;

  wireless::DatasetConfig dataset;
  modclass::ClassifierConfig classifier;
  ModclassAttackConfig modclass_attack;

  autoenc::AutoencoderConfig autoencoder;
  AutoencoderAttackConfig autoencoder_attack;

  DrlExperimentConfig drl;

  TransferGridConfig transfer;
  OodConfig ood;

  std::uint64_t attack_seed = 0;
  std::uint64_t transfer_seed = 0;
  std::uint64_t ood_seed = 0;

  /// Throws ConfigError; a missing or incomplete threat model is rejected
  /// before anything else.
  void validate() const;
};

/// Parses YAML. Unknown keys and malformed values throw ConfigError naming the
/// key path. `seed_override` replaces the top-level seed before module seeds
/// are derived (seeds written explicitly in the file are kept). The result is
/// validated.
ExperimentConfig parse_config(std::string_view yaml_text, std::optional<std::uint64_t> seed_override = {});
ExperimentConfig load_config(const std::filesystem::path& path, std::optional<std::uint64_t> seed_override = {});

/// Canonical JSON of the resolved configuration (sorted keys, every seed).
std::string config_json(const ExperimentConfig& config);

/// Attack names ("cw", "fgsm", "random-search", "noise" / "universal", "jam").
std::vector<std::string> attack_names(CaseStudy c);
std::string_view attack_family(std::string_view attack);

}  // namespace phyadv::harness
