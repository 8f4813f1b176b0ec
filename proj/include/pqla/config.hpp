#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"
#include "pqla/experiments.hpp"

namespace pqla {

struct OutputConfig {
  std::string dir = "out";
  bool svg = true;
};

/// Run configuration with sections model, grid, estimators, experiment, output.
struct CliConfig {
  ExperimentConfig experiment;
  OutputConfig output;
};

/// Parses and validates a configuration document.  Unknown keys, wrong types
/// and invalid values raise ConfigError; syntax errors report
/// "<source>:<line>:<column>".
CliConfig parse_config(const std::string& text, const std::string& source = "<config>");
CliConfig load_config(const std::filesystem::path& path);

/// The fully resolved configuration (all defaults applied).
nlohmann::json to_json(const CliConfig& config);

}  // namespace pqla
