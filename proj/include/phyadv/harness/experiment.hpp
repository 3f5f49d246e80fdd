#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "phyadv/harness/config.hpp"
#include "phyadv/kernels/parallel.hpp"

namespace phyadv::harness {

enum class Stage { generate_data, train, attack, simulate, report };
std::string_view stage_name(Stage s) noexcept;
Stage stage_from_name(std::string_view name);

/// Stages that apply to a case study, in execution order.
std::vector<Stage> stages_for(CaseStudy c);

/// Runs one stage into `out`, reading the artifacts earlier stages left there
/// (a missing artifact is a ConfigError naming the stage to run first), then
/// rewrites the manifest. A stage that does not apply to the case study is a
/// ConfigError.
void run_stage(Stage stage, const ExperimentConfig& config, const std::filesystem::path& out,
               kernels::Exec exec = kernels::Exec::parallel);

/// Every applicable stage in order. Output is a pure function of the config.
void run_experiment(const ExperimentConfig& config, const std::filesystem::path& out,
                    kernels::Exec exec = kernels::Exec::parallel);

/// Relative path -> SHA-256 of every regular file under `dir` except the
/// manifest itself.
std::map<std::string, std::string> hash_tree(const std::filesystem::path& dir);
/// Writes manifest.json; returns the hashes written.
std::map<std::string, std::string> write_manifest(const std::filesystem::path& dir);
std::map<std::string, std::string> read_manifest(const std::filesystem::path& dir);

inline constexpr std::string_view kManifestFile = "manifest.json";

}  // namespace phyadv::harness
