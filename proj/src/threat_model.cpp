#include "phyadv/threat_model.hpp"

#include "phyadv/errors.hpp"

namespace phyadv {

std::string_view knowledge_name(Knowledge k) noexcept {
  switch (k) {
    case Knowledge::white_box: return "white-box";
    case Knowledge::grey_box: return "grey-box";
    case Knowledge::black_box: return "black-box";
  }
  return "?";
}

Knowledge knowledge_from_name(std::string_view name) {
  for (auto k : {Knowledge::white_box, Knowledge::grey_box, Knowledge::black_box})
    if (knowledge_name(k) == name) return k;
  throw ConfigError("threat_model.knowledge must be white-box, grey-box or black-box, got '" + std::string(name) + "'");
}

void ThreatModel::validate() const {
  if (attack_phase != "evasion")
    throw ConfigError("threat_model.attack_phase: only 'evasion' is supported, got '" + attack_phase + "'");
  if (goal != "integrity") throw ConfigError("threat_model.goal: only 'integrity' is supported, got '" + goal + "'");
  if (success_metric.empty()) throw ConfigError("threat_model.success_metric must name the metric used");
  if (assumptions.empty()) throw ConfigError("threat_model.assumptions must state what the adversary can do");
  if (adversary.empty()) throw ConfigError("threat_model.adversary must describe the adversary");
}

}  // namespace phyadv
