#include "phyadv/harness/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "phyadv/harness/config.hpp"

namespace phyadv::harness {

namespace {

using nlohmann::json;

// Perturbations are stored in f32, so a projected one can re-measure a few ulp over.
constexpr double kBudgetTolerance = 1e-6;
constexpr double kTieTolerance = 1e-12;

json metrics_json(const wireless::MetricSummary& m) {
  return {{"accuracy", m.accuracy},
          {"precision", m.macro_precision},
          {"recall", m.macro_recall},
          {"f1", m.macro_f1},
          {"false_positives", m.false_positives},
          {"false_negatives", m.false_negatives}};
}

wireless::MetricSummary metrics_from(const json& j) {
  wireless::MetricSummary m;
  m.accuracy = j.at("accuracy").get<double>();
  m.macro_precision = j.at("precision").get<double>();
  m.macro_recall = j.at("recall").get<double>();
  m.macro_f1 = j.at("f1").get<double>();
  m.false_positives = j.at("false_positives").get<std::size_t>();
  m.false_negatives = j.at("false_negatives").get<std::size_t>();
  return m;
}

json probe_json(const ProbeResult& p) {
  return {{"name", p.name},
          {"frames", p.frames},
          {"accuracy", p.accuracy},
          {"mean_confidence", p.mean_confidence},
          {"std_confidence", p.std_confidence},
          {"reference_accuracy", p.reference_accuracy}};
}

json transfer_json(const TransferMatrix& t) {
  if (!t.performed) return {{"status", "skipped"}, {"reason", t.skip_reason}};
  return {{"status", "performed"},
          {"seeds", t.seeds},
          {"success_rate", t.success_rate},
          {"diagonal_mean", t.diagonal_mean()},
          {"off_diagonal_mean", t.off_diagonal_mean()}};
}

json attack_json(const AttackResult& a) {
  json j{{"name", a.name}, {"family", a.family}, {"status", a.performed ? "performed" : "skipped"}};
  if (!a.performed) {
    j["reason"] = a.skip_reason;
    return j;
  }
  j["budget_power_ratio"] = a.budget_power_ratio;
  j["max_power_ratio"] = a.max_power_ratio;
  j["mean_power_ratio"] = a.mean_power_ratio;
  j["metrics"] = metrics_json(a.metrics);
  j["success_rate"] = a.success_rate;
  j["notes"] = a.notes;
  return j;
}

json parse_json(std::string_view text, std::string_view what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string(what) + " is not valid JSON: " + e.what());
  }
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("missing artifact " + path.string() + " (run the attack or simulate stage first)");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

double TransferMatrix::diagonal_mean() const {
  if (success_rate.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < success_rate.size(); ++i) s += success_rate[i][i];
  return s / static_cast<double>(success_rate.size());
}

double TransferMatrix::off_diagonal_mean() const {
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < success_rate.size(); ++i)
    for (std::size_t j = 0; j < success_rate[i].size(); ++j)
      if (i != j) {
        s += success_rate[i][j];
        ++n;
      }
  return n ? s / static_cast<double>(n) : 0.0;
}

std::string summary_to_json(const AttackSummary& s) {
  json j;
  j["schema"] = kSummarySchema;
  j["case_study"] = s.case_study;
  j["budget_power_ratio"] = s.budget_power_ratio;
  j["evaluation_set"] = s.evaluation_set;
  j["evaluated"] = s.evaluated;
  j["clean"] = metrics_json(s.clean);
  j["attacks"] = json::array();
  for (const auto& a : s.attacks) j["attacks"].push_back(attack_json(a));
  j["transferability"] = transfer_json(s.transfer);
  if (s.ood_performed) {
    j["ood"] = {{"status", "performed"}, {"in_distribution_accuracy", s.in_distribution_accuracy}};
    j["ood"]["probes"] = json::array();
    for (const auto& p : s.ood) j["ood"]["probes"].push_back(probe_json(p));
  } else {
    j["ood"] = {{"status", "skipped"}, {"reason", s.ood_skip_reason}};
  }
  return j.dump(2) + "\n";
}

AttackSummary summary_from_json(std::string_view text) {
  const auto j = parse_json(text, "summary");
  try {
    if (j.at("schema").get<std::string>() != kSummarySchema)
      throw FormatError("summary schema is not " + std::string(kSummarySchema));
    AttackSummary s;
    s.case_study = j.at("case_study").get<std::string>();
    s.budget_power_ratio = j.at("budget_power_ratio").get<double>();
    s.evaluation_set = j.at("evaluation_set").get<std::string>();
    s.evaluated = j.at("evaluated").get<std::size_t>();
    s.clean = metrics_from(j.at("clean"));
    for (const auto& a : j.at("attacks")) {
      AttackResult r;
      r.name = a.at("name").get<std::string>();
      r.family = a.at("family").get<std::string>();
      r.performed = a.at("status").get<std::string>() == "performed";
      if (!r.performed) {
        r.skip_reason = a.value("reason", std::string());
      } else {
        r.budget_power_ratio = a.at("budget_power_ratio").get<double>();
        r.max_power_ratio = a.at("max_power_ratio").get<double>();
        r.mean_power_ratio = a.at("mean_power_ratio").get<double>();
        r.metrics = metrics_from(a.at("metrics"));
        r.success_rate = a.at("success_rate").get<double>();
        r.notes = a.value("notes", std::string());
      }
      s.attacks.push_back(std::move(r));
    }
    const auto& t = j.at("transferability");
    s.transfer.performed = t.at("status").get<std::string>() == "performed";
    if (s.transfer.performed) {
      s.transfer.seeds = t.at("seeds").get<std::vector<std::uint64_t>>();
      s.transfer.success_rate = t.at("success_rate").get<std::vector<std::vector<double>>>();
    } else {
      s.transfer.skip_reason = t.value("reason", std::string());
    }
    const auto& o = j.at("ood");
    s.ood_performed = o.at("status").get<std::string>() == "performed";
    if (s.ood_performed) {
      s.in_distribution_accuracy = o.at("in_distribution_accuracy").get<double>();
      for (const auto& p : o.at("probes")) {
        ProbeResult r;
        r.name = p.at("name").get<std::string>();
        r.frames = p.at("frames").get<std::size_t>();
        r.accuracy = p.at("accuracy").get<double>();
        r.mean_confidence = p.at("mean_confidence").get<double>();
        r.std_confidence = p.at("std_confidence").get<double>();
        r.reference_accuracy = p.at("reference_accuracy").get<double>();
        s.ood.push_back(r);
      }
    } else {
      s.ood_skip_reason = o.value("reason", std::string());
    }
    return s;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed summary: ") + e.what());
  }
}

RobustnessReport build_report(const std::string& config_text, const AttackSummary& summary) {
  const auto config = parse_json(config_text, "config");
  RobustnessReport r;
  r.case_study = config.value("case_study", std::string());
  if (r.case_study != summary.case_study)
    throw ConfigError("summary belongs to case study '" + summary.case_study + "', config to '" + r.case_study + "'");
  if (!config.contains("threat_model")) throw ConfigError("config carries no threat model");
  r.config_json = config_text;
  r.summary = summary;
  r.budget_power_ratio = summary.budget_power_ratio;

  for (auto family : {kGradientBased, kGradientFree, kRandomNoise}) {
    bool present = false;
    for (const auto& a : summary.attacks) {
      if (a.family != family) continue;
      present = true;
      if (!a.performed && a.skip_reason.empty())
        throw ConfigError("attack '" + a.name + "' is skipped without a reason");
    }
    if (!present) throw ConfigError("attack family " + std::string(family) + " is neither performed nor skipped");
  }

  // Matched-budget rule.
  const double budget = summary.budget_power_ratio;
  const double slack = kBudgetTolerance * std::max(1.0, budget);
  for (const auto& a : summary.attacks) {
    if (!a.performed) continue;
    if (std::abs(a.budget_power_ratio - budget) > slack)
      throw ReportRefused(fmt::format("budget mismatch: {} was evaluated at power ratio {} but the report budget is {}",
                                      a.name, a.budget_power_ratio, budget));
    if (a.max_power_ratio > budget + slack)
      throw ReportRefused(fmt::format("budget mismatch: {} realized power ratio {} exceeds the budget {}", a.name,
                                      a.max_power_ratio, budget));
  }

  r.metric_table.push_back({"clean", summary.clean, 0.0, 0, 0});
  const MetricRow* best = nullptr;
  for (const auto& a : summary.attacks) {
    if (!a.performed) continue;
    MetricRow row;
    row.attack = a.name;
    row.metrics = a.metrics;
    row.delta_accuracy = a.metrics.accuracy - summary.clean.accuracy;
    row.delta_false_positives =
        static_cast<long long>(a.metrics.false_positives) - static_cast<long long>(summary.clean.false_positives);
    row.delta_false_negatives =
        static_cast<long long>(a.metrics.false_negatives) - static_cast<long long>(summary.clean.false_negatives);
    r.metric_table.push_back(row);
  }
  for (const auto& row : r.metric_table)
    if (row.attack != "clean" && (!best || row.metrics.accuracy < best->metrics.accuracy)) best = &row;

  if (best) {
    r.strongest_accuracy = best->metrics.accuracy;
    std::set<std::string> families;
    for (const auto& a : summary.attacks)
      if (a.performed && std::abs(a.metrics.accuracy - r.strongest_accuracy) <= kTieTolerance) {
        r.strongest.push_back(a.name);
        families.insert(a.family);
      }
    r.strongest_families.assign(families.begin(), families.end());
    r.strongest_tie = r.strongest.size() > 1;
  }

  // Sanity rules: at matched energy, nothing should beat the gradient-based family.
  std::optional<double> gradient_best;
  for (const auto& a : summary.attacks)
    if (a.performed && a.family == kGradientBased)
      gradient_best = std::min(gradient_best.value_or(a.metrics.accuracy), a.metrics.accuracy);
  for (const auto& a : summary.attacks) {
    if (!a.performed || a.family == kGradientBased || !gradient_best) continue;
    if (a.metrics.accuracy < *gradient_best - kTieTolerance)
      r.anomalies.push_back(fmt::format(
          "{} attack '{}' lowers accuracy more than every gradient-based attack at matched energy ({:.4f} vs {:.4f})",
          a.family, a.name, a.metrics.accuracy, *gradient_best));
  }
  if (summary.transfer.performed && summary.transfer.diagonal_mean() < summary.transfer.off_diagonal_mean())
    r.anomalies.push_back(fmt::format("transferability: self-transfer {:.3f} is below cross-model transfer {:.3f}",
                                      summary.transfer.diagonal_mean(), summary.transfer.off_diagonal_mean()));

  if (!gradient_best) {
    r.false_sense_of_security = true;
    r.false_sense_reason =
        "no gradient-based attack was performed; gradient-free and random-noise results alone understate the "
        "strongest known attack";
  } else if (!r.anomalies.empty()) {
    r.false_sense_of_security = true;
    r.false_sense_reason =
        "a weaker attack family outperformed the gradient-based attacks; the gradient attack may be failing "
        "(e.g. masked gradients) and should not be trusted as the baseline";
  }
  r.energy_parity =
      "random-noise and jamming baselines inject the same energy as the adversarial perturbations they are "
      "compared with; matched energy is a fairness choice of this testbed";
  r.adaptive_reason =
      "no defense mechanism is evaluated, so no defense flag can trigger the adaptive re-attack hook; adaptive "
      "strategies are not implemented";
  return r;
}

RobustnessReport generate_report(const std::filesystem::path& dir) {
  const auto config = read_text(dir / "config.json");
  const auto summary = summary_from_json(read_text(dir / "summary.json"));
  return build_report(config, summary);
}

std::string report_json(const RobustnessReport& r) {
  json j;
  j["schema"] = r.schema;
  j["case_study"] = r.case_study;
  const auto config = json::parse(r.config_json);
  j["config"] = config;
  j["threat_model"] = config.at("threat_model");
  j["seeds"] = config.value("seeds", json::object());
  j["budget_power_ratio"] = r.budget_power_ratio;
  j["energy_parity"] = r.energy_parity;
  j["evaluation_set"] = {{"description", r.summary.evaluation_set}, {"inputs", r.summary.evaluated}};
  json families = json::object();
  for (auto family : {kGradientBased, kGradientFree, kRandomNoise}) {
    json list = json::array();
    for (const auto& a : r.summary.attacks)
      if (a.family == family) list.push_back(attack_json(a));
    families[std::string(family)] = list;
  }
  j["attack_families"] = families;
  j["metric_table"] = json::array();
  for (const auto& row : r.metric_table) {
    auto m = metrics_json(row.metrics);
    m["attack"] = row.attack;
    m["delta_accuracy"] = row.delta_accuracy;
    m["delta_false_positives"] = row.delta_false_positives;
    m["delta_false_negatives"] = row.delta_false_negatives;
    j["metric_table"].push_back(m);
  }
  j["strongest_attack"] = {{"attacks", r.strongest},
                           {"families", r.strongest_families},
                           {"accuracy", r.strongest_accuracy},
                           {"tie", r.strongest_tie}};
  j["anomalies"] = r.anomalies;
  j["false_sense_of_security"] = {{"flag", r.false_sense_of_security}, {"reason", r.false_sense_reason}};
  j["adaptive_evaluation"] = {{"status", r.adaptive_evaluation}, {"reason", r.adaptive_reason}};
  j["transferability"] = transfer_json(r.summary.transfer);
  if (r.summary.ood_performed) {
    j["out_of_distribution"] = {{"status", "performed"},
                                {"in_distribution_accuracy", r.summary.in_distribution_accuracy}};
    j["out_of_distribution"]["probes"] = json::array();
    for (const auto& p : r.summary.ood) j["out_of_distribution"]["probes"].push_back(probe_json(p));
  } else {
    j["out_of_distribution"] = {{"status", "skipped"}, {"reason", r.summary.ood_skip_reason}};
  }
  return j.dump(2) + "\n";
}

std::string report_text(const RobustnessReport& r) {
  std::string out;
  auto line = [&out](const std::string& s) { out += s + "\n"; };
  const auto config = json::parse(r.config_json);
  const auto& tm = config.at("threat_model");
  line(fmt::format("robustness report ({}) case study: {}", r.schema, r.case_study));
  line(fmt::format("threat model: {} {} attack on {}, metric {}", tm.value("knowledge", ""),
                   tm.value("attack_phase", ""), tm.value("goal", ""), tm.value("success_metric", "")));
  line("  assumptions: " + tm.value("assumptions", std::string()));
  line("  adversary:   " + tm.value("adversary", std::string()));
  line(fmt::format("seeds: {}", config.value("seeds", json::object()).dump()));
  line(fmt::format("budget: power ratio {} for every attack family", r.budget_power_ratio));
  line("energy parity: " + r.energy_parity);
  line(fmt::format("evaluated on: {} ({} inputs)", r.summary.evaluation_set, r.summary.evaluated));
  line("");
  line(fmt::format("{:<14} {:>9} {:>9} {:>9} {:>9} {:>7} {:>7} {:>10}", "attack", "accuracy", "precision", "recall",
                   "f1", "dFP", "dFN", "dAccuracy"));
  for (const auto& row : r.metric_table)
    line(fmt::format("{:<14} {:>9.4f} {:>9.4f} {:>9.4f} {:>9.4f} {:>7} {:>7} {:>+10.4f}", row.attack,
                     row.metrics.accuracy, row.metrics.macro_precision, row.metrics.macro_recall, row.metrics.macro_f1,
                     row.delta_false_positives, row.delta_false_negatives, row.delta_accuracy));
  for (const auto& a : r.summary.attacks)
    if (!a.performed) line(fmt::format("{:<14} skipped: {}", a.name, a.skip_reason));
  line("");
  std::string names;
  for (const auto& n : r.strongest) names += (names.empty() ? "" : ", ") + n;
  line(fmt::format("strongest attack: {} (accuracy {:.4f}){}", names.empty() ? "none" : names, r.strongest_accuracy,
                   r.strongest_tie ? " [tie]" : ""));
  for (const auto& a : r.anomalies) line("ANOMALY: " + a);
  if (r.false_sense_of_security) line("WARNING (false sense of security): " + r.false_sense_reason);
  line("adaptive evaluation: " + r.adaptive_evaluation + " (" + r.adaptive_reason + ")");
  if (r.summary.transfer.performed) {
    line(fmt::format("transferability (row = source, column = target): self {:.3f}, cross {:.3f}",
                     r.summary.transfer.diagonal_mean(), r.summary.transfer.off_diagonal_mean()));
    for (const auto& row : r.summary.transfer.success_rate) {
      std::string cells;
      for (double v : row) cells += fmt::format(" {:6.3f}", v);
      line("  " + cells);
    }
  } else {
    line("transferability: skipped (" + r.summary.transfer.skip_reason + ")");
  }
  if (r.summary.ood_performed) {
    line(fmt::format("out-of-distribution probes (in-distribution accuracy {:.4f}):", r.summary.in_distribution_accuracy));
    for (const auto& p : r.summary.ood)
      line(fmt::format("  {:<24} n={:<6} accuracy {:.4f} (reference {:.4f}) confidence {:.3f} +- {:.3f}", p.name,
                       p.frames, p.accuracy, p.reference_accuracy, p.mean_confidence, p.std_confidence));
  } else {
    line("out-of-distribution probes: skipped (" + r.summary.ood_skip_reason + ")");
  }
  return out;
}

}  // namespace phyadv::harness
