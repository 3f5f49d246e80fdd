#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "phyadv/errors.hpp"
#include "phyadv/harness/ood.hpp"
#include "phyadv/wireless/metrics.hpp"

namespace phyadv::harness {

inline constexpr std::string_view kReportSchema = "phyadv-report/1";
inline constexpr std::string_view kSummarySchema = "phyadv-summary/1";

/// The report refuses to compare attack families evaluated at different budgets.
class ReportRefused : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

struct AttackResult {
  std::string name;    // "cw", "fgsm", "random-search", "noise", "universal", "jam"
  std::string family;  // gradient-based | gradient-free | random-noise
  bool performed = true;
  std::string skip_reason;
  double budget_power_ratio = 0.0;    // declared budget
  double max_power_ratio = 0.0;       // largest realized ratio over the evaluated inputs
  double mean_power_ratio = 0.0;
  wireless::MetricSummary metrics;    // under attack
  double success_rate = 0.0;          // attack-specific: flipped frames, BLER increase, ...
  std::string notes;
};

struct TransferMatrix {
  bool performed = false;
  std::string skip_reason;
  std::vector<std::uint64_t> seeds;                // model seeds, row = source, column = target
  std::vector<std::vector<double>> success_rate;
  double diagonal_mean() const;
  double off_diagonal_mean() const;
};

/// What the attack/simulate stages record for the report.
struct AttackSummary {
  std::string case_study;
  double budget_power_ratio = 0.0;
  std::string evaluation_set;  // description of the inputs the metrics were taken on
  std::size_t evaluated = 0;   // inputs per attack
  wireless::MetricSummary clean;
  std::vector<AttackResult> attacks;
  TransferMatrix transfer;
  bool ood_performed = false;
  std::string ood_skip_reason;
  std::vector<ProbeResult> ood;
  double in_distribution_accuracy = 0.0;  // reference for the OOD probes
};

std::string summary_to_json(const AttackSummary& summary);
/// Throws FormatError on a malformed or wrong-schema document.
AttackSummary summary_from_json(std::string_view text);

struct MetricRow {
  std::string attack;
  wireless::MetricSummary metrics;
  double delta_accuracy = 0.0;          // attacked - clean
  long long delta_false_positives = 0;  // attacked - clean
  long long delta_false_negatives = 0;
};

struct RobustnessReport {
  std::string schema{kReportSchema};
  std::string case_study;
  std::string config_json;   // resolved configuration, embedded verbatim (threat model and seeds included)
  double budget_power_ratio = 0.0;
  AttackSummary summary;
  std::vector<MetricRow> metric_table;  // clean row first
  std::vector<std::string> strongest;   // all attacks tied at the lowest attacked accuracy
  std::vector<std::string> strongest_families;
  double strongest_accuracy = 0.0;
  bool strongest_tie = false;
  std::vector<std::string> anomalies;
  bool false_sense_of_security = false;
  std::string false_sense_reason;
  /// Random-noise and jamming baselines inject exactly the perturbation budget.
  std::string energy_parity;
  std::string adaptive_evaluation = "not-performed";
  std::string adaptive_reason;
};

/// Pure function of the resolved config and the attack summary. Throws
/// ReportRefused when performed attacks disagree on the declared budget or any
/// realized perturbation exceeds it, and ConfigError when a family is neither
/// performed nor skipped with a reason.
RobustnessReport build_report(const std::string& config_json, const AttackSummary& summary);

/// Reads config.json and summary.json from an experiment directory.
RobustnessReport generate_report(const std::filesystem::path& artifact_dir);

std::string report_json(const RobustnessReport& report);
std::string report_text(const RobustnessReport& report);

}  // namespace phyadv::harness
