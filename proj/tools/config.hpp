#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "cmr/evaluation.hpp"
#include "cmr/phantom.hpp"
#include "cmr/postprocess.hpp"

namespace cmr::cli {

struct Paths {
  std::filesystem::path output_dir = "out";
  std::filesystem::path study_manifest;
  std::filesystem::path features;
  /// Empty means the built-in 125-feature manifest.
  std::filesystem::path feature_manifest;
  std::filesystem::path model;
  std::filesystem::path predicted_manifest;
  std::filesystem::path truth_manifest;
};

struct PhantomConfig {
  int per_class = 20;
  Dims dims{64, 64, 10};
  Spacing spacing{2.0, 2.0, 8.0};
  /// Written as a second, perturbed study set when any noise is requested.
  PerturbParams perturb;
};

struct CvConfig {
  int k = 8;
  int repeats = 8;
};

struct Config {
  std::uint64_t seed = 42;
  Paths paths;
  std::vector<std::string> class_names;
  bool postprocess = false;
  Connectivity connectivity = Connectivity::k26;
  PhantomConfig phantom;
  PipelineParams pipeline;
  CvConfig cv;
  std::vector<GridPoint> grid;
};

/// Defaults, with class names taken from the phantom classes.
Config default_config();

/// Unknown keys and wrongly typed values raise UsageError naming the key.
/// Relative paths are resolved against `base_dir`.
Config parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
Config load_config(const std::filesystem::path& path);

/// Effective configuration with every default filled in.
nlohmann::json config_to_json(const Config& config);

}  // namespace cmr::cli
