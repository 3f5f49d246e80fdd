#include "phyadv/harness/experiment.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <sstream>

#include <fmt/format.h>

#include "phyadv/autoenc/autoencoder.hpp"
#include "phyadv/autoenc/universal.hpp"
#include "phyadv/binary_io.hpp"
#include "phyadv/drl/feedback.hpp"
#include "phyadv/drl/transfer.hpp"
#include "phyadv/errors.hpp"
#include "phyadv/harness/ood.hpp"
#include "phyadv/harness/random_search.hpp"
#include "phyadv/harness/report.hpp"
#include "phyadv/modclass/attacks.hpp"
#include "phyadv/modclass/classifier.hpp"
#include "phyadv/nn/weights_io.hpp"
#include "phyadv/wireless/channel.hpp"
#include "phyadv/wireless/metrics.hpp"

namespace phyadv::harness {

namespace fs = std::filesystem;
using kernels::Exec;
using nlohmann::json;

namespace {

constexpr std::size_t kDecodeChunk = 2048;

/// Comma-separated text; numbers use the shortest round-trip representation.
class Csv {
 public:
  explicit Csv(std::string_view header) { text_ = std::string(header) + "\n"; }
  template <typename... Ts>
  void row(const Ts&... values) {
    std::string line;
    ((line += (line.empty() ? "" : ",") + fmt::format("{}", values)), ...);
    text_ += line + "\n";
  }
  void save(const fs::path& path) const { io::write_text(path, text_); }

 private:
  std::string text_;
};

fs::path require(const fs::path& path, Stage producer) {
  if (!fs::exists(path))
    throw ConfigError("missing artifact " + path.string() + "; run the " + std::string(stage_name(producer)) +
                      " stage first");
  return path;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double power_ratio_of(std::span<const double> delta, std::span<const double> x) {
  const double e = nn::squared_norm(x);
  return e > 0.0 ? nn::squared_norm(delta) / e : 0.0;
}

wireless::MetricSummary summarize(std::span<const int> predicted, std::span<const int> truth, std::size_t classes) {
  return wireless::summarize(wireless::ConfusionMatrix::from(predicted, truth, classes));
}

/// Accuracy per SNR level present, ascending. Unlike modclass::accuracy_vs_snr
/// this does not warn about grid levels the configuration left out.
std::map<int, double> accuracy_by_snr(std::span<const int> predicted, std::span<const int> truth,
                                      std::span<const int> snr) {
  std::map<int, std::pair<std::size_t, std::size_t>> counts;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    auto& [hit, total] = counts[snr[i]];
    hit += predicted[i] == truth[i];
    ++total;
  }
  std::map<int, double> acc;
  for (const auto& [level, c] : counts) acc[level] = static_cast<double>(c.first) / static_cast<double>(c.second);
  return acc;
}

/// Fraction of inputs classified correctly before and wrongly after the attack.
double flip_rate(std::span<const int> clean, std::span<const int> attacked, std::span<const int> truth) {
  std::size_t correct = 0, flipped = 0;
  for (std::size_t i = 0; i < truth.size(); ++i)
    if (clean[i] == truth[i]) {
      ++correct;
      flipped += attacked[i] != truth[i];
    }
  return correct ? static_cast<double>(flipped) / static_cast<double>(correct) : 0.0;
}

AttackResult skipped(const ExperimentConfig& c, const std::string& name) {
  AttackResult a;
  a.name = name;
  a.family = std::string(attack_family(name));
  a.performed = false;
  a.skip_reason = c.skip.at(name);
  return a;
}

// ---------------------------------------------------------------- autoencoders

struct Decoded {
  std::vector<int> truth;
  std::vector<int> predicted;
};

/// Uniform messages through encoder, AWGN, an additive modifier and decoder.
/// Messages and noise depend only on (seed, chunk), so calls with equal seeds
/// are paired across modifiers.
Decoded decode_blocks(const nn::ModelState& encoder, const nn::ModelState& decoder, double ebno_db, std::size_t count,
                      const autoenc::ChannelModifier& mod, std::uint64_t seed, Exec exec) {
  const auto book = autoenc::codebook(encoder);
  const std::size_t m = book.dim(0), n = book.dim(1);
  const double sd = autoenc::noise_stddev(ebno_db, std::log2(static_cast<double>(m)) / static_cast<double>(n));
  Decoded d;
  d.truth.resize(count);
  d.predicted.resize(count);
  const std::size_t chunks = (count + kDecodeChunk - 1) / kDecodeChunk;
  kernels::for_each_index(chunks, exec, [&](std::size_t c) {
    const std::size_t begin = c * kDecodeChunk;
    const std::size_t rows = std::min(kDecodeChunk, count - begin);
    auto rng = make_rng(seed, {c});
    auto jam_rng = make_rng(seed, {c, 1});
    std::uniform_int_distribution<int> pick(0, static_cast<int>(m) - 1);
    nn::Tensor rx({rows, n});
    for (std::size_t r = 0; r < rows; ++r) {
      const int msg = pick(rng);
      d.truth[begin + r] = msg;
      auto row = rx.row(r);
      const auto cw = book.row(static_cast<std::size_t>(msg));
      std::copy(cw.begin(), cw.end(), row.begin());
      wireless::add_gaussian(row, sd, rng);
      if (mod.kind == autoenc::ChannelModifier::Kind::jam) wireless::add_jamming(row, mod.jam_energy, jam_rng);
      if (mod.kind == autoenc::ChannelModifier::Kind::adversarial) nn::axpy(1.0, mod.delta, row);
    }
    const auto probs = nn::forward(decoder, rx);
    for (std::size_t r = 0; r < rows; ++r) d.predicted[begin + r] = static_cast<int>(nn::argmax(probs.row(r)));
  });
  return d;
}

/// `count` uniformly random messages through the encoder and AWGN.
std::pair<nn::Tensor, std::vector<int>> received_batch(const nn::ModelState& encoder, double ebno_db, std::size_t count,
                                                       std::uint64_t seed) {
  const auto book = autoenc::codebook(encoder);
  const std::size_t m = book.dim(0), n = book.dim(1);
  const double sd = autoenc::noise_stddev(ebno_db, std::log2(static_cast<double>(m)) / static_cast<double>(n));
  auto rng = make_rng(seed);
  std::uniform_int_distribution<int> pick(0, static_cast<int>(m) - 1);
  nn::Tensor rx({count, n});
  std::vector<int> msgs(count);
  for (std::size_t r = 0; r < count; ++r) {
    msgs[r] = pick(rng);
    const auto cw = book.row(static_cast<std::size_t>(msgs[r]));
    std::copy(cw.begin(), cw.end(), rx.row(r).begin());
    wireless::add_gaussian(rx.row(r), sd, rng);
  }
  return {std::move(rx), std::move(msgs)};
}

autoenc::Autoencoder load_autoencoder(const fs::path& dir, const std::string& prefix) {
  autoenc::Autoencoder ae;
  ae.encoder = nn::load_weights(require(dir / (prefix + "encoder.bin"), Stage::train));
  ae.decoder = nn::load_weights(require(dir / (prefix + "decoder.bin"), Stage::train));
  return ae;
}

void save_autoencoder(const autoenc::Autoencoder& ae, const fs::path& dir, const std::string& prefix) {
  nn::save_weights(ae.encoder, dir / (prefix + "encoder.bin"));
  nn::save_weights(ae.decoder, dir / (prefix + "decoder.bin"));
}

void save_ae_history(const autoenc::Autoencoder& ae, const fs::path& path) {
  Csv csv("epoch,loss,accuracy");
  for (const auto& h : ae.history) csv.row(h.epoch, h.loss, h.accuracy);
  csv.save(path);
}

/// Universal perturbations crafted on each model, scored on every model by
/// paired BLER at `ebno_db`; a candidate transfers when it raises the target's BLER.
TransferMatrix autoencoder_transfer(const std::vector<autoenc::Autoencoder>& models,
                                    const autoenc::UniversalConfig& crafting, double ebno_db, std::size_t trials,
                                    std::size_t candidates, std::uint64_t seed, std::vector<std::uint64_t> seeds,
                                    Exec exec) {
  TransferMatrix t;
  t.performed = true;
  t.seeds = std::move(seeds);
  const std::size_t k = models.size();
  const double grid[] = {ebno_db};
  std::vector<double> clean(k);
  for (std::size_t j = 0; j < k; ++j)
    clean[j] = autoenc::bler_curve(models[j].encoder, models[j].decoder, grid, trials,
                                   autoenc::ChannelModifier::none(), derive_seed(seed, {1000, j}), exec)[0]
                   .bler;
  t.success_rate.assign(k, std::vector<double>(k, 0.0));
  for (std::size_t i = 0; i < k; ++i) {
    std::vector<autoenc::UniversalPerturbation> perts(candidates);
    kernels::for_each_index(candidates, exec, [&](std::size_t c) {
      perts[c] = autoenc::craft_universal_perturbation(models[i].decoder, crafting, derive_seed(seed, {i, c}));
    });
    for (std::size_t j = 0; j < k; ++j) {
      std::size_t wins = 0;
      for (const auto& p : perts) {
        const double adv = autoenc::bler_curve(models[j].encoder, models[j].decoder, grid, trials,
                                               autoenc::ChannelModifier::adversarial(p.delta),
                                               derive_seed(seed, {1000, j}), exec)[0]
                               .bler;
        wins += adv > clean[j];
      }
      t.success_rate[i][j] = static_cast<double>(wins) / static_cast<double>(candidates);
    }
  }
  return t;
}

std::string grid_prefix(std::size_t t) { return t == 0 ? "" : fmt::format("grid{}_", t); }

// ---------------------------------------------------------------- modclass

void modclass_generate(const ExperimentConfig& c, const fs::path& out, Exec exec) {
  const auto ds = wireless::synthesize_dataset(c.dataset, exec);
  wireless::save_dataset(ds, out / "dataset.bin");
  spdlog::info("dataset: {} frames, hash {}", ds.size(), wireless::dataset_hash(ds).substr(0, 16));
}

std::uint64_t grid_seed(const ExperimentConfig& c, std::size_t t, std::uint64_t base_seed) {
  return t == 0 ? base_seed : derive_seed(c.transfer_seed, {t});
}

void save_classifier_history(const modclass::TrainedClassifier& tc, const fs::path& path) {
  Csv csv("epoch,train_loss,train_accuracy,test_loss,test_accuracy");
  for (const auto& h : tc.history) csv.row(h.epoch, h.train_loss, h.train_accuracy, h.test_loss, h.test_accuracy);
  csv.save(path);
}

void modclass_train(const ExperimentConfig& c, const fs::path& out, Exec exec) {
  const auto ds = wireless::load_dataset(require(out / "dataset.bin", Stage::generate_data), c.dataset.train_fraction);
  const std::size_t grid = std::max<std::size_t>(c.transfer.models, 1);
  for (std::size_t t = 0; t < grid; ++t) {
    auto cc = c.classifier;
    cc.seed = grid_seed(c, t, c.classifier.seed);
    const auto tc = modclass::train_classifier(ds, cc, exec);
    nn::save_weights(tc.model, out / (grid_prefix(t) + "classifier.bin"));
    save_classifier_history(tc, out / (grid_prefix(t) + "training.csv"));
    spdlog::info("classifier {}: test accuracy {:.4f}", t, tc.history.back().test_accuracy);
  }
  if (c.ood.enabled && c.ood.holdout_scheme) {
    auto cc = c.classifier;
    cc.holdout_scheme = c.ood.holdout_scheme;
    const auto tc = modclass::train_classifier(ds, cc, exec);
    nn::save_weights(tc.model, out / "holdout_classifier.bin");
    save_classifier_history(tc, out / "holdout_training.csv");
  }
}

/// Test frames per SNR level, shuffled per level with the attack seed.
std::vector<std::size_t> attack_frames(const ExperimentConfig& c, const wireless::Dataset& ds) {
  std::vector<std::size_t> chosen;
  const auto test = ds.indices(wireless::Split::test);
  for (int snr : c.dataset.snrs) {
    std::vector<std::size_t> level;
    for (auto i : test)
      if (ds.frames[i].snr_db == snr) level.push_back(i);
    auto rng = make_rng(c.attack_seed, {0, static_cast<std::uint64_t>(snr + 128)});
    std::shuffle(level.begin(), level.end(), rng);
    level.resize(std::min(level.size(), c.modclass_attack.frames_per_snr));
    chosen.insert(chosen.end(), level.begin(), level.end());
  }
  if (chosen.empty()) throw ConfigError("the test split has no frames to attack");
  return chosen;
}

struct FrameAttack {
  std::string name;
  nn::Tensor deltas;
  std::vector<bool> success;
  std::vector<std::size_t> iterations;
  std::vector<int> predicted;
};

void save_records(const FrameAttack& a, const nn::Tensor& frames, std::span<const std::size_t> ids, const fs::path& path) {
  Csv csv("frame_id,success,l2,power_ratio,iters");
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto d = a.deltas.row(i);
    csv.row(ids[i], a.success[i] ? 1 : 0, nn::l2_norm(d), power_ratio_of(d, frames.row(i)), a.iterations[i]);
  }
  csv.save(path);
}

AttackResult frame_attack_result(const FrameAttack& a, const nn::Tensor& frames, std::span<const int> truth,
                                 std::span<const int> clean, double budget) {
  AttackResult r;
  r.name = a.name;
  r.family = std::string(attack_family(a.name));
  r.budget_power_ratio = budget;
  double sum = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double pr = power_ratio_of(a.deltas.row(i), frames.row(i));
    r.max_power_ratio = std::max(r.max_power_ratio, pr);
    sum += pr;
  }
  r.mean_power_ratio = sum / static_cast<double>(truth.size());
  r.metrics = summarize(a.predicted, truth, modclass::kNumClasses);
  r.success_rate = flip_rate(clean, a.predicted, truth);
  return r;
}

TransferMatrix modclass_transfer(const ExperimentConfig& c, const fs::path& out, const nn::Tensor& frames,
                                 std::span<const int> truth, std::span<const int> snr, Exec exec) {
  TransferMatrix t;
  if (c.transfer.models < 2) {
    t.skip_reason = "transfer.models is 0";
    return t;
  }
  // High-SNR frames first: that is where the clean models are accurate.
  std::vector<std::size_t> pick;
  for (std::size_t i = 0; i < truth.size(); ++i)
    if (snr[i] >= 10) pick.push_back(i);
  for (std::size_t i = 0; i < truth.size() && pick.size() < c.transfer.frames; ++i)
    if (snr[i] < 10) pick.push_back(i);
  pick.resize(std::min(pick.size(), c.transfer.frames));
  if (pick.empty()) {
    t.skip_reason = "no frames to transfer";
    return t;
  }
  nn::Tensor x({pick.size(), 2, wireless::kFrameLength});
  std::vector<int> y;
  for (std::size_t r = 0; r < pick.size(); ++r) {
    const auto src = frames.row(pick[r]);
    std::copy(src.begin(), src.end(), x.row(r).begin());
    y.push_back(truth[pick[r]]);
  }

  std::vector<nn::ModelState> models;
  for (std::size_t m = 0; m < c.transfer.models; ++m) {
    models.push_back(nn::load_weights(require(out / (grid_prefix(m) + "classifier.bin"), Stage::train)));
    t.seeds.push_back(grid_seed(c, m, c.classifier.seed));
  }
  std::vector<std::vector<int>> clean;
  for (const auto& m : models) clean.push_back(kernels::predict_classes(m, x, exec));

  auto cw = c.modclass_attack.cw;
  cw.max_power_ratio = c.modclass_attack.power_ratio;
  t.success_rate.assign(models.size(), std::vector<double>(models.size(), 0.0));
  for (std::size_t i = 0; i < models.size(); ++i) {
    const auto res = modclass::cw_l2_attack(models[i], x, y, cw, exec);
    const auto adv = modclass::perturbed(x, modclass::stack_deltas(res));
    for (std::size_t j = 0; j < models.size(); ++j) {
      const auto pred = kernels::predict_classes(models[j], adv, exec);
      std::size_t used = 0, fooled = 0;
      for (std::size_t r = 0; r < y.size(); ++r) {
        if (!res[r].record.success || res[r].record.iterations == 0 || clean[j][r] != y[r]) continue;
        ++used;
        fooled += pred[r] != y[r];
      }
      t.success_rate[i][j] = used ? static_cast<double>(fooled) / static_cast<double>(used) : 0.0;
    }
  }
  t.performed = true;
  return t;
}

void modclass_ood(const ExperimentConfig& c, const fs::path& out, const wireless::Dataset& ds,
                  const nn::ModelState& model, AttackSummary& s, Exec exec) {
  if (!c.ood.enabled) {
    s.ood_skip_reason = "ood.enabled is false";
    return;
  }
  const auto train = ds.indices(wireless::Split::train);
  const auto test = ds.indices(wireless::Split::test);
  const auto hashes = frame_hashes(ds, train);
  const auto suite = build_ood_suite(c.dataset, c.ood, c.ood_seed);
  const auto test_labels = wireless::frame_labels(ds, test);
  const auto test_eval = modclass::evaluate_classifier(model, wireless::frames_tensor(ds, test), test_labels, exec);
  const auto per_snr = accuracy_by_snr(test_eval.predicted, test_labels, modclass::frame_snrs(ds, test));
  auto snr_accuracy = [&](int snr) -> std::optional<double> {
    const auto it = per_snr.find(snr);
    return it == per_snr.end() ? std::nullopt : std::optional(it->second);
  };
  s.in_distribution_accuracy = test_eval.accuracy;

  OutOfDistributionSuite main_suite, holdout_suite;
  for (const auto& p : suite.probes)
    (p.name.rfind("held-out-scheme", 0) == 0 ? holdout_suite : main_suite).probes.push_back(p);
  auto results = ood_probe(model, main_suite, hashes, exec);
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& probe = main_suite.probes[i];
    if (probe.name == "pure-noise") {
      results[i].reference_accuracy = 1.0 / static_cast<double>(modclass::kNumClasses);
    } else {
      const auto lo = snr_accuracy(probe.snr_db - 1), hi = snr_accuracy(probe.snr_db + 1);
      const int have = lo.has_value() + hi.has_value();
      results[i].reference_accuracy = have ? (lo.value_or(0.0) + hi.value_or(0.0)) / have : 0.0;
    }
  }
  if (!holdout_suite.probes.empty()) {
    const auto holdout = nn::load_weights(require(out / "holdout_classifier.bin", Stage::train));
    auto cc = c.classifier;
    cc.holdout_scheme = c.ood.holdout_scheme;
    const auto usable = modclass::usable_indices(ds, wireless::Split::test, cc);
    const double in_dist = modclass::evaluate_classifier(holdout, wireless::frames_tensor(ds, usable),
                                                         wireless::frame_labels(ds, usable), exec)
                               .accuracy;
    auto held = ood_probe(holdout, holdout_suite, hashes, exec);
    for (auto& r : held) {
      r.reference_accuracy = in_dist;
      results.push_back(r);
    }
  }
  s.ood = std::move(results);
  s.ood_performed = true;
}

void modclass_attack(const ExperimentConfig& c, const fs::path& out, Exec exec) {
  const auto ds = wireless::load_dataset(require(out / "dataset.bin", Stage::generate_data), c.dataset.train_fraction);
  const auto model = nn::load_weights(require(out / "classifier.bin", Stage::train));
  const double budget = c.modclass_attack.power_ratio;
  const auto ids = attack_frames(c, ds);
  const auto x = wireless::frames_tensor(ds, ids);
  const auto y = wireless::frame_labels(ds, ids);
  const auto snr = modclass::frame_snrs(ds, ids);
  const std::size_t n = ids.size();
  const nn::Shape frame_shape{2, wireless::kFrameLength};
  const auto clean = kernels::predict_classes(model, x, exec);
  spdlog::info("attacking {} test frames at power ratio {}", n, budget);

  AttackSummary s;
  s.case_study = "modclass";
  s.budget_power_ratio = budget;
  s.evaluated = n;
  s.evaluation_set = fmt::format("test frames, up to {} per SNR level over {} levels", c.modclass_attack.frames_per_snr,
                                 c.dataset.snrs.size());
  s.clean = summarize(clean, y, modclass::kNumClasses);

  auto finish = [&](FrameAttack& a) {
    a.predicted = kernels::predict_classes(model, modclass::perturbed(x, a.deltas), exec);
    if (a.success.empty())
      for (std::size_t i = 0; i < n; ++i) a.success.push_back(a.predicted[i] != y[i]);
    save_records(a, x, ids, out / ("attack_" + a.name + ".csv"));
    s.attacks.push_back(frame_attack_result(a, x, y, clean, budget));
    spdlog::info("{}: accuracy {:.4f}", a.name, s.attacks.back().metrics.accuracy);
  };

  // Gradient-based: C&W (minimal norm inside the budget) and FGSM (at the budget).
  std::vector<modclass::CwResult> cw_results;
  std::optional<std::vector<int>> cw_pred, fgsm_pred;
  if (c.skip.count("cw")) {
    s.attacks.push_back(skipped(c, "cw"));
  } else {
    auto cfg = c.modclass_attack.cw;
    cfg.max_power_ratio = budget;
    cw_results = modclass::cw_l2_attack(model, x, y, cfg, exec);
    FrameAttack a{"cw", modclass::stack_deltas(cw_results), {}, {}, {}};
    for (const auto& r : cw_results) {
      a.success.push_back(r.record.success);
      a.iterations.push_back(r.record.iterations);
    }
    finish(a);
    cw_pred = a.predicted;
  }
  if (c.skip.count("fgsm")) {
    s.attacks.push_back(skipped(c, "fgsm"));
  } else {
    std::vector<double> eps(n);
    for (std::size_t i = 0; i < n; ++i) eps[i] = modclass::fgsm_epsilon_for_ratio(x.row(i), budget);
    FrameAttack a{"fgsm", modclass::fgsm_attack(model, x, y, eps, exec), {}, std::vector<std::size_t>(n, 1), {}};
    finish(a);
    fgsm_pred = a.predicted;
  }
  // Gradient-free: random search through a prediction oracle.
  if (c.skip.count("random-search")) {
    s.attacks.push_back(skipped(c, "random-search"));
  } else {
    const auto shared = std::make_shared<const nn::ModelState>(model);
    std::vector<RandomSearchResult> rs(n);
    kernels::for_each_index(n, exec, [&](std::size_t i) {
      ModelOracle oracle(shared);
      rs[i] = random_search_attack(oracle, x.row(i), y[i], budget, c.modclass_attack.random_search,
                                   derive_seed(c.attack_seed, {1, i}));
    });
    FrameAttack a{"random-search", nn::Tensor(x.shape()), {}, {}, {}};
    std::size_t queries = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!rs[i].delta.empty()) std::copy(rs[i].delta.begin(), rs[i].delta.end(), a.deltas.row(i).begin());
      a.success.push_back(rs[i].success);
      a.iterations.push_back(rs[i].queries);
      queries += rs[i].queries;
    }
    finish(a);
    s.attacks.back().notes = fmt::format("{} oracle queries in total", queries);
  }
  // Random noise at the budget.
  if (c.skip.count("noise")) {
    s.attacks.push_back(skipped(c, "noise"));
  } else {
    FrameAttack a{"noise", nn::Tensor(x.shape()), {}, std::vector<std::size_t>(n, 0), {}};
    for (std::size_t i = 0; i < n; ++i) {
      const auto d = modclass::gaussian_perturbation(frame_shape, std::sqrt(budget * nn::squared_norm(x.row(i))),
                                                     derive_seed(c.attack_seed, {2, i}));
      std::copy(d.data().begin(), d.data().end(), a.deltas.row(i).begin());
    }
    finish(a);
  }

  // Accuracy versus SNR; the noise column is matched to each frame's C&W norm.
  // Columns of attacks that were skipped are NaN.
  std::optional<std::vector<int>> jam_pred;
  if (!cw_results.empty()) {
    nn::Tensor jam(x.shape());
    for (std::size_t i = 0; i < n; ++i) {
      const auto d = modclass::gaussian_perturbation(frame_shape, cw_results[i].record.l2,
                                                     derive_seed(c.attack_seed, {3, i}));
      std::copy(d.data().begin(), d.data().end(), jam.row(i).begin());
    }
    jam_pred = kernels::predict_classes(model, modclass::perturbed(x, jam), exec);
  }
  {
    Csv csv("snr_db,clean_acc,cw_acc,fgsm_acc,jam_acc,frames");
    std::map<int, std::size_t> frames;
    for (int v : snr) ++frames[v];
    const auto clean_c = accuracy_by_snr(clean, y, snr);
    auto column = [&](const std::optional<std::vector<int>>& pred) {
      return pred ? accuracy_by_snr(*pred, y, snr) : std::map<int, double>{};
    };
    const auto cw_c = column(cw_pred), fgsm_c = column(fgsm_pred), jam_c = column(jam_pred);
    auto at = [](const std::map<int, double>& m, int level) {
      const auto it = m.find(level);
      return it == m.end() ? std::nan("") : it->second;
    };
    for (const auto& [level, acc] : clean_c)
      csv.row(level, acc, at(cw_c, level), at(fgsm_c, level), at(jam_c, level), frames[level]);
    csv.save(out / "accuracy_vs_snr.csv");
  }

  s.transfer = modclass_transfer(c, out, x, y, snr, exec);
  modclass_ood(c, out, ds, model, s, exec);
  io::write_text(out / "summary.json", summary_to_json(s));
}

// ---------------------------------------------------------------- autoencoder

void autoencoder_train(const ExperimentConfig& c, const fs::path& out, Exec) {
  const std::size_t grid = std::max<std::size_t>(c.transfer.models, 1);
  for (std::size_t t = 0; t < grid; ++t) {
    auto cfg = c.autoencoder;
    cfg.seed = grid_seed(c, t, c.autoencoder.seed);
    const auto ae = autoenc::train_autoencoder(cfg);
    save_autoencoder(ae, out, grid_prefix(t));
    save_ae_history(ae, out / (grid_prefix(t) + "training.csv"));
  }
}

AttackResult decoded_result(const std::string& name, const Decoded& clean, const Decoded& attacked, std::size_t m,
                            double budget, double realized) {
  AttackResult r;
  r.name = name;
  r.family = std::string(attack_family(name));
  r.budget_power_ratio = budget;
  r.max_power_ratio = realized;
  r.mean_power_ratio = realized;
  r.metrics = summarize(attacked.predicted, attacked.truth, m);
  r.success_rate = flip_rate(clean.predicted, attacked.predicted, clean.truth);
  return r;
}

void autoencoder_attack(const ExperimentConfig& c, const fs::path& out, Exec exec) {
  const auto ae = load_autoencoder(out, "");
  const auto& ac = c.autoencoder_attack;
  const std::size_t n = ae.n(), m = ae.messages();
  const double budget = ac.universal.power_ratio;
  const double energy = budget * static_cast<double>(n);

  AttackSummary s;
  s.case_study = "autoencoder";
  s.budget_power_ratio = budget;
  s.evaluated = ac.report_trials;
  s.evaluation_set = fmt::format("{} uniformly random messages at Eb/N0 {} dB (paired across attacks)",
                                 ac.report_trials, ac.report_ebno_db);
  const auto metric_seed = derive_seed(c.attack_seed, {4});
  const auto clean = decode_blocks(ae.encoder, ae.decoder, ac.report_ebno_db, ac.report_trials,
                                   autoenc::ChannelModifier::none(), metric_seed, exec);
  s.clean = summarize(clean.predicted, clean.truth, m);

  std::vector<double> universal_delta, search_delta;
  if (c.skip.count("universal")) {
    s.attacks.push_back(skipped(c, "universal"));
  } else {
    const auto up = autoenc::craft_universal_perturbation(ae.decoder, ac.universal, derive_seed(c.attack_seed, {0}));
    autoenc::save_perturbations(std::span(&up, 1), out / "perturbation.bin");
    universal_delta = up.delta;
    const auto d = decode_blocks(ae.encoder, ae.decoder, ac.report_ebno_db, ac.report_trials,
                                 autoenc::ChannelModifier::adversarial(up.delta), metric_seed, exec);
    s.attacks.push_back(decoded_result("universal", clean, d, m, budget, up.realized_ratio()));
  }
  if (c.skip.count("random-search")) {
    s.attacks.push_back(skipped(c, "random-search"));
  } else {
    // The search scores candidates on its own received batch, never on the metric set.
    const auto [rx, msgs] = received_batch(ae.encoder, ac.report_ebno_db, ac.search_batch, derive_seed(c.attack_seed, {1}));
    ModelOracle oracle(ae.decoder);
    const auto res =
        random_search_universal(oracle, rx, msgs, energy, ac.random_search, derive_seed(c.attack_seed, {2}));
    search_delta = res.delta;
    const auto d = decode_blocks(ae.encoder, ae.decoder, ac.report_ebno_db, ac.report_trials,
                                 autoenc::ChannelModifier::adversarial(res.delta), metric_seed, exec);
    s.attacks.push_back(
        decoded_result("random-search", clean, d, m, budget, nn::squared_norm(res.delta) / static_cast<double>(n)));
    s.attacks.back().notes = fmt::format("{} oracle calls of {} received vectors", res.queries, ac.search_batch);
  }
  if (c.skip.count("jam")) {
    s.attacks.push_back(skipped(c, "jam"));
  } else {
    const auto d = decode_blocks(ae.encoder, ae.decoder, ac.report_ebno_db, ac.report_trials,
                                 autoenc::ChannelModifier::jam(energy), metric_seed, exec);
    s.attacks.push_back(decoded_result("jam", clean, d, m, budget, budget));
  }

  // BLER curves; every modifier shares the message and noise streams.
  {
    const auto seed = derive_seed(c.attack_seed, {3});
    auto curve = [&](const autoenc::ChannelModifier& mod) {
      return autoenc::bler_curve(ae.encoder, ae.decoder, ac.ebno_grid_db, ac.trials, mod, seed, exec);
    };
    const auto clean_c = curve(autoenc::ChannelModifier::none());
    const auto jam_c = curve(autoenc::ChannelModifier::jam(energy));
    const auto adv_c = universal_delta.empty() ? clean_c : curve(autoenc::ChannelModifier::adversarial(universal_delta));
    const auto rs_c = search_delta.empty() ? clean_c : curve(autoenc::ChannelModifier::adversarial(search_delta));
    Csv csv("ebno_db,bler_clean,bler_jam,bler_adv,trials,bler_random_search");
    for (std::size_t k = 0; k < clean_c.size(); ++k)
      csv.row(clean_c[k].ebno_db, clean_c[k].bler, jam_c[k].bler, adv_c[k].bler, clean_c[k].trials, rs_c[k].bler);
    csv.save(out / "bler.csv");
  }

  if (c.transfer.models >= 2) {
    std::vector<autoenc::Autoencoder> models;
    std::vector<std::uint64_t> seeds;
    for (std::size_t t = 0; t < c.transfer.models; ++t) {
      models.push_back(load_autoencoder(out, grid_prefix(t)));
      seeds.push_back(grid_seed(c, t, c.autoencoder.seed));
    }
    s.transfer = autoencoder_transfer(models, ac.universal, ac.report_ebno_db, ac.report_trials, c.transfer.candidates,
                                      c.transfer_seed, seeds, exec);
  } else {
    s.transfer.skip_reason = "transfer.models is 0";
  }
  s.ood_skip_reason = "no out-of-distribution suite is defined for message-level autoencoders";
  io::write_text(out / "summary.json", summary_to_json(s));
}

// ---------------------------------------------------------------- drl

void drl_train(const ExperimentConfig& c, const fs::path& out, Exec) {
  const std::size_t grid = std::max<std::size_t>(c.transfer.models, 1);
  for (std::size_t t = 0; t < grid; ++t) {
    auto cfg = c.drl.surrogate;
    cfg.seed = grid_seed(c, t, c.drl.surrogate.seed);
    const auto ae = autoenc::train_autoencoder(cfg);
    save_autoencoder(ae, out, grid_prefix(t) + "surrogate_");
    save_ae_history(ae, out / (grid_prefix(t) + "surrogate_training.csv"));
  }
}

void drl_attack(const ExperimentConfig& c, const fs::path& out, Exec exec) {
  const auto& d = c.drl;
  autoenc::Autoencoder surrogate;
  if (d.surrogate_mode == SurrogateMode::same_weights) {
    const auto snap = drl::run_simulation(drl::replicate_config(d.system, 0), nullptr, d.window_start);
    surrogate.encoder = snap.encoder;
    surrogate.decoder = snap.decoder;
    spdlog::info("crafting on a copy of the live system at step {}", d.window_start);
  } else {
    surrogate = load_autoencoder(out, "surrogate_");
  }
  const std::size_t n = surrogate.n();
  const double budget = d.source.crafting.power_ratio;
  const double energy = budget * static_cast<double>(n);

  // Gradient-based pool: activation-maximizing perturbations that succeed on the surrogate.
  if (!c.skip.count("universal")) {
    const auto source = drl::craft_source_run(surrogate, d.source, exec);
    Csv csv("candidate,seed,surrogate_bler,clean_bler,success");
    for (std::size_t i = 0; i < source.candidates.size(); ++i) {
      const auto& cand = source.candidates[i];
      csv.row(i, cand.perturbation.seed, cand.surrogate_bler, cand.clean_bler, cand.success() ? 1 : 0);
    }
    csv.save(out / "candidates.csv");
    spdlog::info("source run: {}/{} candidates succeed on the surrogate", source.successes(), source.candidates.size());
    const auto pool = drl::pool_of(drl::transfer_perturbations(source, d.pool_size));
    autoenc::save_perturbations(pool, out / "pool_universal.bin");
  }
  // Gradient-free pool: oracle-only random search against the surrogate decoder.
  if (!c.skip.count("random-search")) {
    const auto shared = std::make_shared<const nn::ModelState>(surrogate.decoder);
    std::vector<autoenc::UniversalPerturbation> pool(d.pool_size);
    kernels::for_each_index(d.pool_size, exec, [&](std::size_t p) {
      const auto [rx, msgs] =
          received_batch(surrogate.encoder, d.system.ebno_db, d.search_batch, derive_seed(c.attack_seed, {1, p}));
      ModelOracle oracle(shared);
      const auto seed = derive_seed(c.attack_seed, {2, p});
      const auto res = random_search_universal(oracle, rx, msgs, energy, d.random_search, seed);
      pool[p].delta = res.delta;
      pool[p].power_ratio = budget;
      pool[p].seed = seed;
    });
    autoenc::save_perturbations(pool, out / "pool_random_search.bin");
  }
  // Random-noise pool: Gaussian directions at the same energy.
  if (!c.skip.count("jam")) {
    std::vector<autoenc::UniversalPerturbation> pool(d.pool_size);
    for (std::size_t p = 0; p < d.pool_size; ++p) {
      const auto seed = derive_seed(c.attack_seed, {3, p});
      const auto g = modclass::gaussian_perturbation({n}, std::sqrt(energy), seed);
      pool[p].delta.assign(g.data().begin(), g.data().end());
      pool[p].power_ratio = budget;
      pool[p].seed = seed;
    }
    autoenc::save_perturbations(pool, out / "pool_jam.bin");
  }
}

void save_aggregate(std::span<const drl::AccuracyTrace> traces, const fs::path& path) {
  Csv csv("time_step,mean,std,n");
  for (const auto& p : drl::aggregate_traces(traces)) csv.row(p.time_step, p.mean, p.std, p.n);
  csv.save(path);
}

void drl_simulate(const ExperimentConfig& c, const fs::path& out, Exec exec) {
  const auto& d = c.drl;
  const std::size_t m = d.system.base.messages();
  const double budget = d.source.crafting.power_ratio;

  const auto clean_traces = drl::run_replicates(d.system, nullptr, d.replicates, exec);
  save_aggregate(clean_traces, out / "drl_aggregate_clean.csv");
  auto window_stats = [&](std::span<const drl::AccuracyTrace> traces) {
    double plateau = 0.0, window = 0.0, after = 0.0;
    const auto w = d.window_end - d.window_start;
    const auto plateau_begin = d.window_start - std::min<std::size_t>(d.window_start, 50);
    for (const auto& t : traces) {
      plateau += drl::window_mean(t, plateau_begin, d.window_start);
      window += drl::window_mean(t, d.window_start, d.window_end);
      after += drl::window_mean(t, d.system.time_steps - std::min(w, d.system.time_steps - d.window_end),
                                d.system.time_steps);
    }
    const double k = static_cast<double>(traces.size());
    return fmt::format("replicate means: plateau {:.4f}, window {:.4f}, end {:.4f}", plateau / k, window / k, after / k);
  };

  // Frozen snapshot of the target at the window start for the paired metric table.
  const auto snap = drl::run_simulation(drl::replicate_config(d.system, 0), nullptr, d.window_start);
  const std::size_t per_member = d.eval_rounds * d.system.batch_size;

  AttackSummary s;
  s.case_study = "drl";
  s.budget_power_ratio = budget;
  s.evaluated = d.pool_size * per_member;
  s.evaluation_set = fmt::format(
      "live system snapshot at step {} (replicate 0), {} paired rounds of {} messages per pool member; Eb/N0 {} dB",
      d.window_start, d.eval_rounds, d.system.batch_size, d.system.ebno_db);
  Decoded clean_all;
  for (std::size_t p = 0; p < d.pool_size; ++p) {
    const auto dec = decode_blocks(snap.encoder, snap.decoder, d.system.ebno_db, per_member,
                                   autoenc::ChannelModifier::none(), derive_seed(c.attack_seed, {20, p}), exec);
    clean_all.truth.insert(clean_all.truth.end(), dec.truth.begin(), dec.truth.end());
    clean_all.predicted.insert(clean_all.predicted.end(), dec.predicted.begin(), dec.predicted.end());
  }
  s.clean = summarize(clean_all.predicted, clean_all.truth, m);

  const std::pair<std::string, std::string> families[] = {
      {"universal", "pool_universal.bin"}, {"random-search", "pool_random_search.bin"}, {"jam", "pool_jam.bin"}};
  for (std::size_t f = 0; f < 3; ++f) {
    const auto& [name, file] = families[f];
    if (c.skip.count(name)) {
      s.attacks.push_back(skipped(c, name));
      continue;
    }
    drl::AttackSchedule sched;
    sched.window_start = d.window_start;
    sched.window_end = d.window_end;
    sched.policy = d.policy;
    sched.seed = derive_seed(c.attack_seed, {10, f});
    sched.pool = autoenc::load_perturbations(require(out / file, Stage::attack));
    const auto traces = drl::run_replicates(d.system, &sched, d.replicates, exec);
    save_aggregate(traces, out / ("drl_aggregate_" + name + ".csv"));
    if (name == "universal") {
      Csv csv("time_step,accuracy,attacked_flag");
      for (std::size_t t = 0; t < traces[0].accuracy.size(); ++t)
        csv.row(t, traces[0].accuracy[t], traces[0].attacked[t] ? 1 : 0);
      csv.save(out / "drl_trace.csv");
      save_aggregate(traces, out / "drl_aggregate.csv");
    }
    Decoded all;
    double max_ratio = 0.0, sum_ratio = 0.0;
    for (std::size_t p = 0; p < sched.pool.size(); ++p) {
      const auto& pert = sched.pool[p];
      const double ratio = pert.realized_ratio();
      max_ratio = std::max(max_ratio, ratio);
      sum_ratio += ratio;
      const auto dec = decode_blocks(snap.encoder, snap.decoder, d.system.ebno_db, per_member,
                                     autoenc::ChannelModifier::adversarial(pert.delta),
                                     derive_seed(c.attack_seed, {20, p}), exec);
      all.truth.insert(all.truth.end(), dec.truth.begin(), dec.truth.end());
      all.predicted.insert(all.predicted.end(), dec.predicted.begin(), dec.predicted.end());
    }
    auto r = decoded_result(name, clean_all, all, m, budget, max_ratio);
    r.mean_power_ratio = sum_ratio / static_cast<double>(sched.pool.size());
    r.notes = window_stats(traces) + "; clean " + window_stats(clean_traces);
    s.attacks.push_back(r);
    spdlog::info("{}: {}", name, r.notes);
  }

  if (c.transfer.models >= 2) {
    std::vector<autoenc::Autoencoder> models;
    std::vector<std::uint64_t> seeds;
    for (std::size_t t = 0; t < c.transfer.models; ++t) {
      models.push_back(load_autoencoder(out, grid_prefix(t) + "surrogate_"));
      seeds.push_back(grid_seed(c, t, d.surrogate.seed));
    }
    s.transfer = autoencoder_transfer(models, d.source.crafting, d.system.ebno_db, d.source.trials,
                                      c.transfer.candidates, c.transfer_seed, seeds, exec);
  } else {
    s.transfer.skip_reason = "transfer.models is 0";
  }
  s.ood_skip_reason = "no out-of-distribution suite is defined for message-level autoencoders";
  io::write_text(out / "summary.json", summary_to_json(s));
}

// ---------------------------------------------------------------- report

void write_report(const fs::path& out) {
  const auto report = generate_report(out);
  io::write_text(out / "report.json", report_json(report));
  io::write_text(out / "report.txt", report_text(report));
}

/// config.json must match the configuration of the stages already run.
void check_config(const ExperimentConfig& c, const fs::path& out, Stage stage) {
  const auto text = config_json(c);
  const auto path = out / "config.json";
  const bool first = stages_for(c.case_study).front() == stage;
  if (fs::exists(path) && !first && read_text(path) != text)
    throw ConfigError("output directory " + out.string() +
                      " holds artifacts of a different configuration; rerun from the first stage");
  io::write_text(path, text);
}

}  // namespace

std::string_view stage_name(Stage s) noexcept {
  switch (s) {
    case Stage::generate_data: return "generate-data";
    case Stage::train: return "train";
    case Stage::attack: return "attack";
    case Stage::simulate: return "simulate";
    case Stage::report: return "report";
  }
  return "?";
}

Stage stage_from_name(std::string_view name) {
  for (auto s : {Stage::generate_data, Stage::train, Stage::attack, Stage::simulate, Stage::report})
    if (stage_name(s) == name) return s;
  throw ConfigError("unknown stage '" + std::string(name) + "'");
}

std::vector<Stage> stages_for(CaseStudy c) {
  switch (c) {
    case CaseStudy::modclass: return {Stage::generate_data, Stage::train, Stage::attack, Stage::report};
    case CaseStudy::autoencoder: return {Stage::train, Stage::attack, Stage::report};
    case CaseStudy::drl: return {Stage::train, Stage::attack, Stage::simulate, Stage::report};
  }
  return {};
}

void run_stage(Stage stage, const ExperimentConfig& config, const fs::path& out, Exec exec) {
  config.validate();
  const auto stages = stages_for(config.case_study);
  if (std::find(stages.begin(), stages.end(), stage) == stages.end())
    throw ConfigError("stage " + std::string(stage_name(stage)) + " does not apply to case study " +
                      std::string(case_study_name(config.case_study)));
  fs::create_directories(out);
  check_config(config, out, stage);
  spdlog::info("{}: {}", case_study_name(config.case_study), stage_name(stage));

  switch (config.case_study) {
    case CaseStudy::modclass:
      if (stage == Stage::generate_data) modclass_generate(config, out, exec);
      if (stage == Stage::train) modclass_train(config, out, exec);
      if (stage == Stage::attack) modclass_attack(config, out, exec);
      break;
    case CaseStudy::autoencoder:
      if (stage == Stage::train) autoencoder_train(config, out, exec);
      if (stage == Stage::attack) autoencoder_attack(config, out, exec);
      break;
    case CaseStudy::drl:
      if (stage == Stage::train) drl_train(config, out, exec);
      if (stage == Stage::attack) drl_attack(config, out, exec);
      if (stage == Stage::simulate) drl_simulate(config, out, exec);
      break;
  }
  if (stage == Stage::report) write_report(out);
  write_manifest(out);
}

void run_experiment(const ExperimentConfig& config, const fs::path& out, Exec exec) {
  config.validate();
  for (auto stage : stages_for(config.case_study)) run_stage(stage, config, out, exec);
}

std::map<std::string, std::string> hash_tree(const fs::path& dir) {
  std::map<std::string, std::string> hashes;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), dir).generic_string();
    if (rel == kManifestFile) continue;
    hashes[rel] = io::sha256_file(entry.path());
  }
  return hashes;
}

std::map<std::string, std::string> write_manifest(const fs::path& dir) {
  const auto hashes = hash_tree(dir);
  json j;
  j["schema"] = "phyadv-manifest/1";
  j["files"] = hashes;
  io::write_text(dir / kManifestFile, j.dump(2) + "\n");
  return hashes;
}

std::map<std::string, std::string> read_manifest(const fs::path& dir) {
  const auto path = dir / kManifestFile;
  if (!fs::exists(path)) throw ConfigError("no manifest in " + dir.string());
  try {
    return json::parse(read_text(path)).at("files").get<std::map<std::string, std::string>>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed manifest: ") + e.what());
  }
}

}  // namespace phyadv::harness
