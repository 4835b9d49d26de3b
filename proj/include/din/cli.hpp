#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "din/trainer.hpp"

namespace din::cli {

enum class Task { image, sampler, ggx, sdf };

/// One training run. Optional fields fall back to the task defaults.
struct RunConfig {
  Task task = Task::image;
  std::filesystem::path input;  // image / sampler source (.ppm, .pgm or .json stack)
  std::string shape = "sphere";  // sdf
  std::optional<double> compression;
  std::optional<std::uint64_t> budget_bytes;
  std::optional<double> rho;
  std::optional<int> cascaded_dims;  // image
  std::optional<int> epochs;
  bool quantize = false;  // save and evaluate the u8 model
  TrainConfig train;
  std::filesystem::path out = "run";
  std::uint64_t seed = 1;

  // task extras
  std::vector<double> footprints = {0.0, 0.25, 0.5, 1.0};  // sampler report
  bool ignore_footprint = false;                         // sampler ablation
  bool density_weighting = true;                         // ggx
  std::optional<double> target_cap = 2.0;                // ggx
  std::optional<std::size_t> near_samples;               // sdf
  bool resample = true;                                  // sdf: fresh samples per epoch
  std::size_t test_points = 100000;                      // ggx holdout, sdf test set
};

Task parse_task(const std::string& name);
std::string to_string(Task task);

/// Reads a JSON object; unknown keys and wrongly typed values throw ConfigError.
RunConfig parse_run_config(const std::string& json_text, RunConfig base = {});
RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = {});

/// Parses argv, runs one subcommand and returns the process exit code:
/// 0 ok, 2 config error, 3 infeasible layout, 4 I/O or format error, 1 other.
/// Results go to `out`; failures go to `err` as a single JSON object.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace din::cli
