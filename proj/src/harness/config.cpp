#include "phyadv/harness/config.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "phyadv/errors.hpp"
#include "phyadv/rng.hpp"

namespace phyadv::harness {

namespace {

using nlohmann::json;

constexpr std::string_view kThreatModelGuideline =
    "threat_model is required before any attack runs; the robustness-evaluation guideline asks every "
    "evaluation to declare its assumptions (threat_model.assumptions), the adversary type "
    "(threat_model.knowledge, threat_model.adversary) and the metric used (threat_model.success_metric)";

/// A YAML mapping whose keys are checked off as they are read; finish()
/// rejects anything left over.
class Section {
 public:
  Section(YAML::Node node, std::string path) : node_(std::move(node)), path_(std::move(path)) {
    if (node_ && !node_.IsNull() && !node_.IsMap()) throw ConfigError(path_ + " must be a mapping");
  }

  bool has(const std::string& key) const { return node_ && node_.IsMap() && node_[key]; }

  template <typename T>
  bool get(const std::string& key, T& out) {
    if (!has(key)) return false;
    seen_.insert(key);
    try {
      out = node_[key].as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigError(where(key) + ": malformed value");
    }
    return true;
  }

  bool get_size(const std::string& key, std::size_t& out) {
    long long v = 0;
    if (!get(key, v)) return false;
    if (v < 0) throw ConfigError(where(key) + " must be non-negative");
    out = static_cast<std::size_t>(v);
    return true;
  }

  bool get_seed(const std::string& key, std::uint64_t& out) {
    unsigned long long v = 0;
    if (!get(key, v)) return false;
    out = v;
    return true;
  }

  Section sub(const std::string& key) {
    if (!has(key)) return Section(YAML::Node(), where(key));
    seen_.insert(key);
    return Section(node_[key], where(key));
  }

  void finish() const {
    if (!node_ || !node_.IsMap()) return;
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!seen_.count(key)) throw ConfigError("unknown key " + where(key));
    }
  }

  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  YAML::Node node_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_random_search(Section s, RandomSearchConfig& rs) {
  s.get_size("queries", rs.queries);
  s.get("explore_fraction", rs.explore_fraction);
  s.get("refine_step", rs.refine_step);
  s.finish();
}

autoenc::ActivationObjective objective_from_name(const std::string& name, const std::string& where) {
  if (name == "all_hidden") return autoenc::ActivationObjective::all_hidden;
  if (name == "final_layer") return autoenc::ActivationObjective::final_layer;
  throw ConfigError(where + " must be all_hidden or final_layer, got '" + name + "'");
}

std::string objective_name(autoenc::ActivationObjective o) {
  return o == autoenc::ActivationObjective::all_hidden ? "all_hidden" : "final_layer";
}

void read_universal(Section& s, autoenc::UniversalConfig& u) {
  s.get("power_ratio", u.power_ratio);
  s.get_size("steps", u.steps);
  s.get("step_fraction", u.step_fraction);
  std::string obj;
  if (s.get("objective", obj)) u.objective = objective_from_name(obj, s.where("objective"));
}

/// Autoencoder keys; `seeded` records whether a seed was given.
void read_autoencoder(Section s, autoenc::AutoencoderConfig& a, bool& seeded) {
  s.get_size("k", a.k);
  s.get_size("n", a.n);
  std::size_t hidden = 0;
  if (s.get_size("hidden", hidden)) a.encoder_hidden = a.decoder_hidden = hidden;
  s.get("train_ebno_db", a.train_ebno_db);
  s.get_size("epochs", a.epochs);
  s.get_size("steps_per_epoch", a.steps_per_epoch);
  s.get_size("batch_size", a.batch_size);
  s.get("learning_rate", a.learning_rate);
  seeded = s.get_seed("seed", a.seed);
  s.finish();
}

json autoencoder_json(const autoenc::AutoencoderConfig& a) {
  return {{"k", a.k},
          {"n", a.n},
          {"hidden", a.encoder_hidden},
          {"train_ebno_db", a.train_ebno_db},
          {"epochs", a.epochs},
          {"steps_per_epoch", a.steps_per_epoch},
          {"batch_size", a.batch_size},
          {"learning_rate", a.learning_rate},
          {"seed", a.seed}};
}

json random_search_json(const RandomSearchConfig& rs) {
  return {{"queries", rs.queries}, {"explore_fraction", rs.explore_fraction}, {"refine_step", rs.refine_step}};
}

json universal_json(const autoenc::UniversalConfig& u) {
  return {{"power_ratio", u.power_ratio},
          {"steps", u.steps},
          {"step_fraction", u.step_fraction},
          {"objective", objective_name(u.objective)}};
}

std::string augmentation_name(modclass::Augmentation a) {
  switch (a) {
    case modclass::Augmentation::none: return "none";
    case modclass::Augmentation::gaussian: return "gaussian";
    case modclass::Augmentation::adversarial: return "adversarial";
  }
  return "?";
}

void check_ratio(double r, const std::string& what) {
  if (!std::isfinite(r) || r < 0.0) throw ConfigError(what + " must be a finite non-negative power ratio");
}

void check_random_search(const RandomSearchConfig& rs, const std::string& what) {
  if (!(rs.explore_fraction >= 0.0 && rs.explore_fraction <= 1.0))
    throw ConfigError(what + ".explore_fraction must lie in [0, 1]");
  if (!(rs.refine_step > 0.0 && std::isfinite(rs.refine_step))) throw ConfigError(what + ".refine_step must be > 0");
}

}  // namespace

std::string_view case_study_name(CaseStudy c) noexcept {
  switch (c) {
    case CaseStudy::modclass: return "modclass";
    case CaseStudy::autoencoder: return "autoencoder";
    case CaseStudy::drl: return "drl";
  }
  return "?";
}

CaseStudy case_study_from_name(std::string_view name) {
  for (auto c : {CaseStudy::modclass, CaseStudy::autoencoder, CaseStudy::drl})
    if (case_study_name(c) == name) return c;
  throw ConfigError("case_study must be modclass, autoencoder or drl, got '" + std::string(name) + "'");
}

std::vector<std::string> attack_names(CaseStudy c) {
  if (c == CaseStudy::modclass) return {"cw", "fgsm", "random-search", "noise"};
  return {"universal", "random-search", "jam"};
}

std::string_view attack_family(std::string_view attack) {
  if (attack == "cw" || attack == "fgsm" || attack == "universal") return kGradientBased;
  if (attack == "random-search") return kGradientFree;
  if (attack == "noise" || attack == "jam") return kRandomNoise;
  throw ConfigError("unknown attack '" + std::string(attack) + "'");
}

void ExperimentConfig::validate() const {
  if (!threat_model) throw ConfigError(std::string(kThreatModelGuideline));
  try {
    threat_model->validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string(e.what()) + " (" + std::string(kThreatModelGuideline) + ")");
  }
  const auto names = attack_names(case_study);
  for (const auto& [name, reason] : skip) {
    if (std::find(names.begin(), names.end(), name) == names.end())
      throw ConfigError("skip." + name + ": not an attack of case study " + std::string(case_study_name(case_study)));
    if (reason.empty()) throw ConfigError("skip." + name + ": a reason is required");
  }
  if (transfer.models == 1) throw ConfigError("transfer.models must be 0 (skip) or at least 2");

  switch (case_study) {
    case CaseStudy::modclass: {
      if (dataset.frames_per_cell == 0) throw ConfigError("dataset.frames_per_cell must be positive");
      if (!(dataset.train_fraction > 0.0 && dataset.train_fraction < 1.0))
        throw ConfigError("dataset.train_fraction must lie in (0, 1)");
      if (dataset.snrs.empty() || dataset.schemes.empty()) throw ConfigError("dataset needs SNRs and schemes");
      for (int s : dataset.snrs)
        if (!wireless::on_snr_grid(s)) throw ConfigError("dataset.snrs: " + std::to_string(s) + " is off the 2 dB grid");
      classifier.validate();
      check_ratio(modclass_attack.power_ratio, "attack.power_ratio");
      auto cw = modclass_attack.cw;
      cw.max_power_ratio = modclass_attack.power_ratio;
      cw.validate();
      check_random_search(modclass_attack.random_search, "attack.random_search");
      if (modclass_attack.frames_per_snr == 0) throw ConfigError("attack.frames_per_snr must be positive");
      if (ood.enabled) {
        for (int s : ood.unseen_snrs)
          if (wireless::on_snr_grid(s)) throw ConfigError("ood.unseen_snrs: " + std::to_string(s) + " is a trained SNR");
        if (ood.holdout_scheme &&
            std::find(dataset.schemes.begin(), dataset.schemes.end(), *ood.holdout_scheme) == dataset.schemes.end())
          throw ConfigError("ood.holdout_scheme is not part of dataset.schemes");
      }
      break;
    }
    case CaseStudy::autoencoder: {
      autoencoder.validate();
      autoencoder_attack.universal.validate();
      if (autoencoder_attack.ebno_grid_db.empty()) throw ConfigError("autoencoder_attack.ebno_grid_db is empty");
      if (autoencoder_attack.trials == 0 || autoencoder_attack.report_trials == 0 || autoencoder_attack.search_batch == 0)
        throw ConfigError("autoencoder_attack trial counts must be positive");
      check_random_search(autoencoder_attack.random_search, "autoencoder_attack.random_search");
      break;
    }
    case CaseStudy::drl: {
      drl.system.validate();
      drl.surrogate.validate();
      if (drl.surrogate.k != drl.system.base.k || drl.surrogate.n != drl.system.base.n)
        throw ConfigError("drl.surrogate must use the same (n, k) as drl.system");
      drl.source.crafting.validate();
      if (drl.pool_size == 0) throw ConfigError("drl.pool_size must be positive");
      if (drl.source.candidates < drl.pool_size)
        throw ConfigError("drl.source.candidates must be at least drl.pool_size");
      if (drl.replicates == 0 || drl.eval_rounds == 0 || drl.search_batch == 0)
        throw ConfigError("drl.replicates, drl.eval_rounds and drl.search_batch must be positive");
      drl::AttackSchedule probe;
      probe.window_start = drl.window_start;
      probe.window_end = drl.window_end;
      probe.pool.resize(1);
      probe.pool[0].delta.assign(drl.system.base.n, 0.0);
      probe.validate(drl.system.time_steps);
      check_random_search(drl.random_search, "drl.random_search");
      break;
    }
  }
}

ExperimentConfig parse_config(std::string_view yaml_text, std::optional<std::uint64_t> seed_override) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(yaml_text));
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config is not valid YAML: ") + e.what());
  }
  if (!root.IsMap()) throw ConfigError("config must be a mapping at the top level");

  ExperimentConfig c;
  Section top(root, "");
  std::string name;
  if (!top.get("case_study", name)) throw ConfigError("case_study is required");
  c.case_study = case_study_from_name(name);
  top.get_seed("seed", c.seed);
  if (seed_override) c.seed = *seed_override;

  if (top.has("threat_model")) {
    auto s = top.sub("threat_model");
    ThreatModel tm;
    std::string knowledge;
    if (s.get("knowledge", knowledge)) tm.knowledge = knowledge_from_name(knowledge);
    s.get("attack_phase", tm.attack_phase);
    s.get("goal", tm.goal);
    s.get("success_metric", tm.success_metric);
    s.get("assumptions", tm.assumptions);
    s.get("adversary", tm.adversary);
    s.finish();
    c.threat_model = tm;
  }
  if (top.has("skip")) top.get("skip", c.skip);

  bool seeded[12] = {};

  {
    auto s = top.sub("dataset");
    s.get_size("frames_per_cell", c.dataset.frames_per_cell);
    s.get("train_fraction", c.dataset.train_fraction);
    seeded[0] = s.get_seed("seed", c.dataset.seed);
    s.get("snrs", c.dataset.snrs);
    std::vector<std::string> schemes;
    if (s.get("schemes", schemes)) {
      c.dataset.schemes.clear();
      for (const auto& n : schemes) c.dataset.schemes.push_back(wireless::scheme_from_name(n));
    }
    s.get("random_phase_offset", c.dataset.channel.random_phase_offset);
    s.finish();
  }
  {
    auto s = top.sub("classifier");
    s.get_size("epochs", c.classifier.epochs);
    s.get_size("batch_size", c.classifier.batch_size);
    s.get("learning_rate", c.classifier.learning_rate);
    seeded[1] = s.get_seed("seed", c.classifier.seed);
    std::string aug;
    if (s.get("augmentation", aug)) {
      if (aug == "none") c.classifier.augmentation = modclass::Augmentation::none;
      else if (aug == "gaussian") c.classifier.augmentation = modclass::Augmentation::gaussian;
      else if (aug == "adversarial") c.classifier.augmentation = modclass::Augmentation::adversarial;
      else throw ConfigError("classifier.augmentation must be none, gaussian or adversarial");
    }
    s.get("augmentation_ratio", c.classifier.augmentation_ratio);
    s.finish();
  }
  {
    auto s = top.sub("attack");
    auto& a = c.modclass_attack;
    s.get("power_ratio", a.power_ratio);
    s.get_size("frames_per_snr", a.frames_per_snr);
    {
      auto cw = s.sub("cw");
      cw.get("confidence", a.cw.confidence);
      cw.get_size("steps", a.cw.steps);
      cw.get("learning_rate", a.cw.learning_rate);
      cw.get("c_min", a.cw.c_min);
      cw.get("c_max", a.cw.c_max);
      cw.get_size("search_steps", a.cw.search_steps);
      cw.get("early_abort", a.cw.early_abort);
      cw.finish();
    }
    read_random_search(s.sub("random_search"), a.random_search);
    s.finish();
  }
  c.modclass_attack.cw.max_power_ratio = c.modclass_attack.power_ratio;

  read_autoencoder(top.sub("autoencoder"), c.autoencoder, seeded[2]);
  {
    auto s = top.sub("autoencoder_attack");
    auto& a = c.autoencoder_attack;
    read_universal(s, a.universal);
    s.get("ebno_grid_db", a.ebno_grid_db);
    s.get_size("trials", a.trials);
    s.get("report_ebno_db", a.report_ebno_db);
    s.get_size("report_trials", a.report_trials);
    s.get_size("search_batch", a.search_batch);
    read_random_search(s.sub("random_search"), a.random_search);
    s.finish();
  }
  {
    auto s = top.sub("drl");
    auto& d = c.drl;
    s.get("ebno_db", d.system.ebno_db);
    s.get("sigma_pi", d.system.sigma_pi);
    s.get("sigma_f", d.system.sigma_f);
    s.get_size("batch_size", d.system.batch_size);
    s.get_size("receiver_epochs", d.system.receiver_epochs);
    s.get("receiver_learning_rate", d.system.receiver_learning_rate);
    s.get("transmitter_learning_rate", d.system.transmitter_learning_rate);
    s.get_size("time_steps", d.system.time_steps);
    seeded[3] = s.get_seed("seed", d.system.seed);
    std::size_t k = d.system.base.k, n = d.system.base.n, hidden = d.system.base.encoder_hidden;
    s.get_size("k", k);
    s.get_size("n", n);
    s.get_size("hidden", hidden);
    d.system.base.k = k;
    d.system.base.n = n;
    d.system.base.encoder_hidden = d.system.base.decoder_hidden = hidden;
    d.surrogate.k = k;
    d.surrogate.n = n;
    d.surrogate.encoder_hidden = d.surrogate.decoder_hidden = hidden;
    s.get_size("replicates", d.replicates);
    s.get_size("window_start", d.window_start);
    s.get_size("window_end", d.window_end);
    s.get_size("pool_size", d.pool_size);
    std::string policy;
    if (s.get("policy", policy)) {
      if (policy == "uniform") d.policy = drl::PoolPolicy::uniform;
      else if (policy == "round_robin") d.policy = drl::PoolPolicy::round_robin;
      else throw ConfigError("drl.policy must be uniform or round_robin");
    }
    std::string mode;
    if (s.get("surrogate_mode", mode)) {
      if (mode == "independent") d.surrogate_mode = SurrogateMode::independent;
      else if (mode == "same_weights") d.surrogate_mode = SurrogateMode::same_weights;
      else throw ConfigError("drl.surrogate_mode must be independent or same_weights");
    }
    s.get_size("eval_rounds", d.eval_rounds);
    s.get_size("search_batch", d.search_batch);
    read_random_search(s.sub("random_search"), d.random_search);
    read_autoencoder(s.sub("surrogate"), d.surrogate, seeded[4]);
    {
      auto src = s.sub("source");
      read_universal(src, d.source.crafting);
      src.get_size("candidates", d.source.candidates);
      src.get("eval_ebno_db", d.source.eval_ebno_db);
      src.get_size("trials", d.source.trials);
      seeded[5] = src.get_seed("seed", d.source.seed);
      src.finish();
    }
    s.finish();
  }
  {
    auto s = top.sub("transfer");
    s.get_size("models", c.transfer.models);
    s.get_size("frames", c.transfer.frames);
    s.get_size("candidates", c.transfer.candidates);
    seeded[6] = s.get_seed("seed", c.transfer_seed);
    s.finish();
  }
  {
    auto s = top.sub("ood");
    s.get("enabled", c.ood.enabled);
    s.get("unseen_snrs", c.ood.unseen_snrs);
    s.get_size("frames_per_cell", c.ood.frames_per_cell);
    s.get_size("noise_frames", c.ood.noise_frames);
    std::string holdout;
    if (s.get("holdout_scheme", holdout))
      c.ood.holdout_scheme = holdout == "none" ? std::nullopt : std::optional(wireless::scheme_from_name(holdout));
    seeded[7] = s.get_seed("seed", c.ood_seed);
    s.finish();
  }
  seeded[8] = top.get_seed("attack_seed", c.attack_seed);
  top.finish();

  // Module seeds not written in the file come from the top-level seed.
  const std::uint64_t base = c.seed;
  if (!seeded[0]) c.dataset.seed = derive_seed(base, {1});
  if (!seeded[1]) c.classifier.seed = derive_seed(base, {2});
  if (!seeded[2]) c.autoencoder.seed = derive_seed(base, {3});
  if (!seeded[3]) c.drl.system.seed = derive_seed(base, {4});
  if (!seeded[4]) c.drl.surrogate.seed = derive_seed(base, {5});
  if (!seeded[5]) c.drl.source.seed = derive_seed(base, {6});
  if (!seeded[6]) c.transfer_seed = derive_seed(base, {7});
  if (!seeded[7]) c.ood_seed = derive_seed(base, {8});
  if (!seeded[8]) c.attack_seed = derive_seed(base, {9});

  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path, std::optional<std::uint64_t> seed_override) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), seed_override);
}

std::string config_json(const ExperimentConfig& c) {
  json j;
  j["case_study"] = case_study_name(c.case_study);
  j["seed"] = c.seed;
  if (c.threat_model) {
    const auto& tm = *c.threat_model;
    j["threat_model"] = {{"knowledge", knowledge_name(tm.knowledge)}, {"attack_phase", tm.attack_phase},
                         {"goal", tm.goal},       {"success_metric", tm.success_metric},
                         {"assumptions", tm.assumptions}, {"adversary", tm.adversary}};
  }
  j["skip"] = c.skip;
  j["seeds"] = {{"top", c.seed},
                {"attack", c.attack_seed},
                {"transfer", c.transfer_seed},
                {"ood", c.ood_seed}};
  switch (c.case_study) {
    case CaseStudy::modclass: {
      json schemes = json::array();
      for (auto s : c.dataset.schemes) schemes.push_back(wireless::scheme_name(s));
      j["dataset"] = {{"frames_per_cell", c.dataset.frames_per_cell}, {"train_fraction", c.dataset.train_fraction},
                      {"seed", c.dataset.seed},   {"snrs", c.dataset.snrs},
                      {"schemes", schemes},       {"random_phase_offset", c.dataset.channel.random_phase_offset}};
      j["classifier"] = {{"epochs", c.classifier.epochs},
                         {"batch_size", c.classifier.batch_size},
                         {"learning_rate", c.classifier.learning_rate},
                         {"seed", c.classifier.seed},
                         {"augmentation", augmentation_name(c.classifier.augmentation)},
                         {"augmentation_ratio", c.classifier.augmentation_ratio}};
      const auto& a = c.modclass_attack;
      j["attack"] = {{"power_ratio", a.power_ratio},
                     {"frames_per_snr", a.frames_per_snr},
                     {"cw",
                      {{"confidence", a.cw.confidence},
                       {"steps", a.cw.steps},
                       {"learning_rate", a.cw.learning_rate},
                       {"c_min", a.cw.c_min},
                       {"c_max", a.cw.c_max},
                       {"search_steps", a.cw.search_steps},
                       {"early_abort", a.cw.early_abort}}},
                     {"random_search", random_search_json(a.random_search)}};
      j["ood"] = {{"enabled", c.ood.enabled},
                  {"unseen_snrs", c.ood.unseen_snrs},
                  {"frames_per_cell", c.ood.frames_per_cell},
                  {"noise_frames", c.ood.noise_frames},
                  {"holdout_scheme", c.ood.holdout_scheme ? std::string(wireless::scheme_name(*c.ood.holdout_scheme))
                                                          : std::string("none")}};
      j["seeds"]["dataset"] = c.dataset.seed;
      j["seeds"]["classifier"] = c.classifier.seed;
      break;
    }
    case CaseStudy::autoencoder: {
      j["autoencoder"] = autoencoder_json(c.autoencoder);
      const auto& a = c.autoencoder_attack;
      j["autoencoder_attack"] = universal_json(a.universal);
      j["autoencoder_attack"]["ebno_grid_db"] = a.ebno_grid_db;
      j["autoencoder_attack"]["trials"] = a.trials;
      j["autoencoder_attack"]["report_ebno_db"] = a.report_ebno_db;
      j["autoencoder_attack"]["report_trials"] = a.report_trials;
      j["autoencoder_attack"]["search_batch"] = a.search_batch;
      j["autoencoder_attack"]["random_search"] = random_search_json(a.random_search);
      j["seeds"]["autoencoder"] = c.autoencoder.seed;
      break;
    }
    case CaseStudy::drl: {
      const auto& d = c.drl;
      j["drl"] = {{"ebno_db", d.system.ebno_db},
                  {"sigma_pi", d.system.sigma_pi},
                  {"sigma_f", d.system.sigma_f},
                  {"batch_size", d.system.batch_size},
                  {"receiver_epochs", d.system.receiver_epochs},
                  {"receiver_learning_rate", d.system.receiver_learning_rate},
                  {"transmitter_learning_rate", d.system.transmitter_learning_rate},
                  {"time_steps", d.system.time_steps},
                  {"seed", d.system.seed},
                  {"k", d.system.base.k},
                  {"n", d.system.base.n},
                  {"hidden", d.system.base.encoder_hidden},
                  {"replicates", d.replicates},
                  {"window_start", d.window_start},
                  {"window_end", d.window_end},
                  {"pool_size", d.pool_size},
                  {"policy", d.policy == drl::PoolPolicy::uniform ? "uniform" : "round_robin"},
                  {"eval_rounds", d.eval_rounds},
                  {"search_batch", d.search_batch},
                  {"random_search", random_search_json(d.random_search)},
                  {"surrogate", autoencoder_json(d.surrogate)},
                  {"surrogate_mode", d.surrogate_mode == SurrogateMode::independent ? "independent" : "same_weights"}};
      j["drl"]["source"] = universal_json(d.source.crafting);
      j["drl"]["source"]["candidates"] = d.source.candidates;
      j["drl"]["source"]["eval_ebno_db"] = d.source.eval_ebno_db;
      j["drl"]["source"]["trials"] = d.source.trials;
      j["drl"]["source"]["seed"] = d.source.seed;
      j["seeds"]["drl"] = d.system.seed;
      j["seeds"]["surrogate"] = d.surrogate.seed;
      j["seeds"]["source"] = d.source.seed;
      break;
    }
  }
  j["transfer"] = {{"models", c.transfer.models}, {"frames", c.transfer.frames}, {"candidates", c.transfer.candidates}};
  return j.dump(2) + "\n";
}

}  // namespace phyadv::harness
