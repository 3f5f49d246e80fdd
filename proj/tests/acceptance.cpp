// End-to-end acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance [--out DIR] [--only N,...] [--known-failure N,...] [--reuse]
//
// Criteria 3-6 run the full-scale experiment configs under configs/ through the
// harness and read their artifacts; criterion 7 uses the smoke configs. The
// exit status is 0 when every criterion passed or failed only as a declared
// known failure, 1 otherwise (including any unexpected exception).

#include <fmt/core.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "phyadv/autoenc/universal.hpp"
#include "phyadv/drl/feedback.hpp"
#include "phyadv/drl/transfer.hpp"
#include "phyadv/harness/config.hpp"
#include "phyadv/harness/experiment.hpp"
#include "phyadv/harness/report.hpp"
#include "phyadv/modclass/classifier.hpp"
#include "phyadv/nn/weights_io.hpp"
#include "phyadv/wireless/channel.hpp"
#include "phyadv/wireless/dataset.hpp"
#include "support/nn_gradcheck.hpp"

using namespace phyadv;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string read_text(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Column name -> values of a numeric CSV written by the harness.
std::map<std::string, std::vector<double>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::string line;
  std::getline(in, line);
  std::vector<std::string> names;
  std::stringstream header(line);
  for (std::string cell; std::getline(header, cell, ',');) names.push_back(cell);
  std::map<std::string, std::vector<double>> cols;
  while (std::getline(in, line)) {
    std::stringstream row(line);
    std::size_t k = 0;
    for (std::string cell; std::getline(row, cell, ',') && k < names.size(); ++k)
      cols[names[k]].push_back(cell == "nan" ? std::nan("") : std::stod(cell));
  }
  return cols;
}

fs::path source_config(const std::string& name) { return fs::path(PHYADV_SOURCE_DIR) / "configs" / name; }

bool g_reuse = false;

/// Runs the experiment. With --reuse, a complete earlier run of the same
/// configuration is kept (it may predate code changes).
fs::path experiment(const std::string& config_file, const fs::path& root) {
  const auto cfg = harness::load_config(source_config(config_file));
  const auto dir = root / fs::path(config_file).stem();
  static std::set<fs::path> done;  // criteria sharing a config share the run
  if (done.count(dir)) return dir;
  done.insert(dir);
  const bool cached = g_reuse && fs::exists(dir / "report.json") && fs::exists(dir / "config.json") &&
                      read_text(dir / "config.json") == harness::config_json(cfg) &&
                      harness::read_manifest(dir) == harness::hash_tree(dir);
  if (!cached) {
    fs::remove_all(dir);
    harness::run_experiment(cfg, dir);
  } else {
    spdlog::info("reusing {}", dir.string());
  }
  return dir;
}

// ---------------------------------------------------------------- criteria

Verdict gradient_engine(const fs::path&) {
  double worst = 0.0;
  std::size_t checks = 0;
  for (const auto& c : testing::gradient_cases())
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      const auto r = testing::check_model_gradients(c.spec, seed);
      worst = std::max({worst, r.input_error, r.param_error});
      ++checks;
    }
  return {worst < 1e-4, fmt::format("{} layer kinds x 10 seeds, worst relative error {:.2e} (< 1e-4)",
                                    checks / 10, worst)};
}

Verdict channel_calibration(const fs::path&) {
  bool ok = true;
  std::string detail;
  for (double ebno : {0.0, 2.0, 4.0, 6.0, 8.0}) {
    const auto est = wireless::simulate_bpsk_ber(ebno, 100000, 1);
    const double theory = wireless::bpsk_ber_theory(ebno);
    const double z = std::abs(est.ber() - theory) / est.standard_error();
    ok = ok && z < 3.0;
    detail += fmt::format("{}dB {:.3e} vs {:.3e} ({:.2f} SE); ", ebno, est.ber(), theory, z);
  }
  return {ok, detail + "10^5 bits per point, bound 3 SE"};
}

Verdict modclass_case(const fs::path& root) {
  const auto dir = experiment("modclass.yaml", root);
  const auto cfg = harness::load_config(source_config("modclass.yaml"));

  // clean accuracy on every test frame at SNR >= 10 dB
  const auto ds = wireless::load_dataset(dir / "dataset.bin", cfg.dataset.train_fraction);
  const auto model = nn::load_weights(dir / "classifier.bin");
  std::vector<std::size_t> high;
  for (auto i : modclass::usable_indices(ds, wireless::Split::test, cfg.classifier))
    if (ds.frames[i].snr_db >= 10) high.push_back(i);
  const double clean_all =
      modclass::evaluate_classifier(model, wireless::frames_tensor(ds, high), wireless::frame_labels(ds, high))
          .accuracy;

  // attacked subset (frames_per_snr per level), frame-weighted over SNR >= 10 dB
  const auto csv = read_csv(dir / "accuracy_vs_snr.csv");
  double n = 0, clean = 0, cw = 0, jam = 0;
  for (std::size_t k = 0; k < csv.at("snr_db").size(); ++k) {
    if (csv.at("snr_db")[k] < 10) continue;
    const double f = csv.at("frames")[k];
    n += f;
    clean += f * csv.at("clean_acc")[k];
    cw += f * csv.at("cw_acc")[k];
    jam += f * csv.at("jam_acc")[k];
  }
  clean /= n, cw /= n, jam /= n;

  const auto summary = harness::summary_from_json(read_text(dir / "summary.json"));
  double cw_ratio = 0.0;
  for (const auto& a : summary.attacks)
    if (a.name == "cw") cw_ratio = a.max_power_ratio;

  const bool ok = clean_all >= 0.60 && cw_ratio <= 0.1 * (1 + 1e-6) && clean - cw >= 0.30 && clean - jam <= 0.10;
  return {ok, fmt::format("SNR>=10dB: clean {:.3f} on {} test frames (>= 0.60); attacked subset of {} frames: "
                          "clean {:.3f}, C&W {:.3f} (drop {:.1f} pts >= 30, max power ratio {:.4f} <= 0.1), "
                          "matched-norm noise {:.3f} (drop {:.1f} pts <= 10)",
                          clean_all, high.size(), n, clean, cw, 100 * (clean - cw), cw_ratio, jam,
                          100 * (clean - jam))};
}

Verdict autoencoder_case(const fs::path& root) {
  const auto dir = experiment("autoencoder.yaml", root);
  const auto csv = read_csv(dir / "bler.csv");
  const auto& ebno = csv.at("ebno_db");
  std::size_t wins = 0;
  double clean8 = std::nan(""), adv8 = std::nan("");
  for (std::size_t k = 0; k < ebno.size(); ++k) {
    wins += csv.at("bler_adv")[k] >= csv.at("bler_jam")[k];
    if (ebno[k] == 8.0) {
      clean8 = csv.at("bler_clean")[k];
      adv8 = csv.at("bler_adv")[k];
    }
  }
  const auto trials = static_cast<std::size_t>(csv.at("trials").front());
  const bool ok = clean8 <= 1e-2 && wins * 5 >= ebno.size() * 4 && adv8 >= 5 * clean8 && trials >= 100000;
  return {ok, fmt::format("{} blocks per point; clean BLER at 8 dB {:.2e} (<= 1e-2); adversarial >= jamming at "
                          "{}/{} grid points (>= 80%); adversarial BLER at 8 dB {:.2e} = {:.1f}x clean (>= 5x)",
                          trials, clean8, wins, ebno.size(), adv8, adv8 / clean8)};
}

Verdict drl_case(const fs::path& root) {
  const auto dir = experiment("drl.yaml", root);
  const auto cfg = harness::load_config(source_config("drl.yaml"));
  const auto agg = read_csv(dir / "drl_aggregate_universal.csv");
  const auto& mean = agg.at("mean");
  auto avg = [&](std::size_t b, std::size_t e) {
    double s = 0;
    for (std::size_t t = b; t < e; ++t) s += mean[t];
    return s / static_cast<double>(e - b);
  };
  const std::size_t steps = mean.size();
  const double plateau = avg(150, 200), window = avg(200, 400), end = avg(steps - 50, steps);
  const bool ok = steps == 600 && plateau >= 0.90 && plateau - window >= 0.10 && plateau - end <= 0.05;
  return {ok, fmt::format("{} replicates, {} steps: plateau (150-200) {:.3f} (>= 0.90); window (200-400) {:.3f} "
                          "(drop {:.1f} pts, needs >= 10); steps {}-{} {:.3f} (within {:.1f} pts of plateau, needs <= 5)",
                          static_cast<std::size_t>(agg.at("n").front()), steps, plateau, window,
                          100 * (plateau - window), steps - 50, steps, end, 100 * (plateau - end))};
}

Verdict transferability(const fs::path& root) {
  const auto dir = experiment("drl.yaml", root);
  const auto cfg = harness::load_config(source_config("drl.yaml"));
  const auto& d = cfg.drl;
  const auto pool = autoenc::load_perturbations(dir / "pool_universal.bin");
  // target: the live system (seeded independently of the surrogate) at the window start
  const auto snap = drl::run_simulation(drl::replicate_config(d.system, 0), nullptr, d.window_start);
  const auto out = drl::evaluate_transfer(snap.encoder, snap.decoder, pool, d.system.ebno_db, d.system.batch_size,
                                          d.eval_rounds, derive_seed(cfg.attack_seed, {30}));
  double clean = 0, attacked = 0;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    clean += out.clean_accuracy[i];
    attacked += out.attacked_accuracy[i];
  }
  const double k = static_cast<double>(pool.size());
  return {out.success_rate >= 0.5,
          fmt::format("{} surrogate-successful perturbations; {:.1f}% degrade the target's per-round accuracy "
                      "(>= 50%); mean accuracy {:.3f} clean vs {:.3f} attacked",
                      pool.size(), 100 * out.success_rate, clean / k, attacked / k)};
}

Verdict harness_case(const fs::path& root) {
  bool ok = true;
  std::string detail;
  for (const std::string name : {"smoke_modclass.yaml", "smoke_autoencoder.yaml", "smoke_drl.yaml"}) {
    const auto cfg = harness::load_config(source_config(name));
    const auto a = root / "repeat" / (fs::path(name).stem().string() + "_a");
    const auto b = root / "repeat" / (fs::path(name).stem().string() + "_b");
    fs::remove_all(a);
    fs::remove_all(b);
    harness::run_experiment(cfg, a);
    harness::run_experiment(cfg, b);
    const auto ma = harness::read_manifest(a);
    const bool same = ma == harness::read_manifest(b) && ma == harness::hash_tree(b);

    // budget mismatch: one family re-declared at a different budget
    auto summary = harness::summary_from_json(read_text(a / "summary.json"));
    const auto config = read_text(a / "config.json");
    auto tampered = summary;
    for (auto& at : tampered.attacks)
      if (at.performed && at.family == harness::kRandomNoise) at.budget_power_ratio *= 2;
    bool refused = false;
    try {
      harness::build_report(config, tampered);
    } catch (const harness::ReportRefused&) {
      refused = true;
    }

    const auto report = nlohmann::json::parse(read_text(a / "report.json"));
    std::size_t families = 0;
    for (const auto f : {harness::kGradientBased, harness::kGradientFree, harness::kRandomNoise})
      families += report["attack_families"].contains(std::string(f)) &&
                  !report["attack_families"][std::string(f)].empty();
    ok = ok && same && refused && families == 3;
    detail += fmt::format("{}: {} files, manifests {}, mismatched budget {}, {}/3 families; ",
                          fs::path(name).stem().string(), ma.size(), same ? "identical" : "DIFFER",
                          refused ? "refused" : "ACCEPTED", families);
  }
  return {ok, detail};
}

std::set<int> parse_list(const std::string& s) {
  std::set<int> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.insert(std::stoi(item));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance run"};
  std::string out = "acceptance_artifacts";
  std::string only, known;
  app.add_option("--out", out, "artifact directory");
  app.add_option("--only", only, "comma-separated criteria to run");
  app.add_option("--known-failure", known, "criteria whose failure does not fail the run");
  app.add_flag("--reuse", g_reuse, "keep earlier experiment runs of the same configuration");
  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::warn);

  const std::vector<std::pair<std::string, std::function<Verdict(const fs::path&)>>> criteria = {
      {"gradient engine", gradient_engine},     {"channel calibration", channel_calibration},
      {"modulation classifier", modclass_case}, {"channel autoencoder", autoencoder_case},
      {"DRL feedback system", drl_case},        {"transferability", transferability},
      {"harness", harness_case},
  };
  const auto selected = parse_list(only);
  const auto known_failures = parse_list(known);
  const fs::path root(out);
  fs::create_directories(root);

  // ctest hides the output of passing tests, so the lines are kept in a file as well
  std::ofstream results(root / "acceptance.txt");
  int rc = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!selected.empty() && !selected.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i].second(root);
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
      rc = 1;
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool excused = !v.pass && known_failures.count(id);
    if (!v.pass && !excused) rc = 1;
    const auto line = fmt::format("criterion {} ({}): {}{} [{:.1f} s] {}\n", id, criteria[i].first,
                                  v.pass ? "PASS" : "FAIL", excused ? " (known failure)" : "", secs, v.detail);
    fmt::print("{}", line);
    std::fflush(stdout);
    results << line << std::flush;
  }
  return rc;
}
