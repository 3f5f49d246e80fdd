#pragma once

#include <string>
#include <string_view>

namespace phyadv {

enum class Knowledge { white_box, grey_box, black_box };

std::string_view knowledge_name(Knowledge k) noexcept;
Knowledge knowledge_from_name(std::string_view name);

/// Adversary declaration that every experiment carries before an attack runs.
/// Only evasion attacks against integrity are modelled.
struct ThreatModel {
  Knowledge knowledge = Knowledge::white_box;
  std::string attack_phase = "evasion";
  std::string goal = "integrity";
  std::string success_metric;  // e.g. "accuracy", "bler"
  std::string assumptions;     // free text: channel access, budget semantics, ...
  std::string adversary;       // free text: who the adversary is and what it observes

  /// Throws ConfigError naming the offending field.
  void validate() const;
  bool operator==(const ThreatModel&) const = default;
};

}  // namespace phyadv
