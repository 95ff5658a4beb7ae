#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"

#include "quill/augment.hpp"
#include "quill/model.hpp"
#include "quill/trainer.hpp"

namespace quill::cli {

struct PathsConfig {
  std::string data;         // clean corpus or pair file, depending on the command
  std::string checkpoints;  // directory for model files
  std::string lm;           // n-gram model used by the robust loss
  std::string outputs;      // directory for reports
};

// Settings specific to the experiment command.
struct ExperimentSettings {
  double noise_rate = 0.25;
  int lm_order = 2;
  double lm_k = 1.0;
  int bins = 10;
  double reject_at = 0.25;  // rejection fraction reported in the summary
  bool grid_temperature = false;
};

// One JSON document with optional sections "paths", "model", "train",
// "augment", "experiment" and a top-level "seed". Every key is optional;
// absent keys keep their defaults.
struct CliConfig {
  PathsConfig paths;
  ModelConfig model;
  TrainConfig train;
  AugmentConfig augment = AugmentConfig::defaults();
  std::string confusion_table_path;  // empty: bundled table
  ExperimentSettings experiment;
  std::optional<std::uint64_t> seed;
};

// Unknown keys are rejected so typos do not silently fall back to defaults.
CliConfig parse_config(const nlohmann::json& doc);
CliConfig load_config(const std::filesystem::path& path);

// The resolved configuration, for recording next to the outputs. Paths are
// left out so that runs in different directories serialize identically.
nlohmann::json config_to_json(const CliConfig& config);

}  // namespace quill::cli
