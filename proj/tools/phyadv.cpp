// phyadv: command-line driver for the experiment harness.
//
//   phyadv generate-data|train|attack|simulate|report|run --config <file> --out <dir> [--seed N]
//
// Exit codes: 0 success, 2 configuration error, 3 numeric failure, 1 anything else.

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <cstdint>
#include <exception>
#include <optional>
#include <string>

#include "phyadv/errors.hpp"
#include "phyadv/harness/config.hpp"
#include "phyadv/harness/experiment.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

}  // namespace

int main(int argc, char** argv) {
  using namespace phyadv;

  CLI::App app{"Adversarial evaluation testbed for physical-layer ML models"};
  app.require_subcommand(1);
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  bool serial = false;
  std::string log_level = "info";

  const char* stages[] = {"generate-data", "train", "attack", "simulate", "report", "run"};
  const char* help[] = {"synthesize the I/Q dataset (modclass)",
                        "train the models of the case study",
                        "run the attack families and record results",
                        "run the live DRL simulation under attack (drl)",
                        "build the robustness report from the artifacts",
                        "every applicable stage in order"};
  for (std::size_t i = 0; i < std::size(stages); ++i) {
    auto* sub = app.add_subcommand(stages[i], help[i]);
    sub->add_option("--config", config_path, "experiment YAML file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "artifact directory")->required();
    sub->add_option("--seed", seed, "top-level seed (replaces `seed` in the file)");
    sub->add_flag("--serial", serial, "use the serial reference kernels");
    sub->add_option("--log-level", log_level, "trace|debug|info|warn|error|off");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }
  spdlog::set_default_logger(spdlog::stderr_color_mt("phyadv"));
  spdlog::set_level(spdlog::level::from_str(log_level));

  const auto exec = serial ? kernels::Exec::serial : kernels::Exec::parallel;
  try {
    const auto config = harness::load_config(config_path, seed);
    const std::string name = app.get_subcommands().front()->get_name();
    if (name == "run") harness::run_experiment(config, out_dir, exec);
    else harness::run_stage(harness::stage_from_name(name), config, out_dir, exec);
    return 0;
  } catch (const ConfigError& e) {
    spdlog::error("configuration error: {}", e.what());
    return kExitConfig;
  } catch (const FormatError& e) {
    spdlog::error("bad input file: {}", e.what());
    return kExitConfig;
  } catch (const NumericError& e) {
    spdlog::error("numeric failure: {}", e.what());
    return kExitNumeric;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
}
