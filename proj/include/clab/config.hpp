#pragma once

/**
 * Experiment configuration as INI-style sections whose names mirror the
 * library modules. Keys are addressed as "section.key" both in the file and
 * on the command line; later assignments win, and command-line overrides are
 * applied after the file. Serialization emits every key in a fixed order, so
 * parse(serialize(cfg)) reproduces the same structure.
 */

#include <stdexcept>
#include <string>
#include <vector>

#include "clab/pipeline.hpp"

namespace clab {

// Configuration problems (bad file, unknown key, malformed value, missing
// referenced file) as opposed to runtime failures.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Applies one "section.key=value" assignment.
void apply_override(ExperimentConfig& cfg, const std::string& assignment);

ExperimentConfig parse_config_text(const std::string& text);

// File + overrides, then checks that referenced corpus/detector files exist.
ExperimentConfig load_config(const std::string& path,
                             const std::vector<std::string>& overrides);

std::string serialize_config(const ExperimentConfig& cfg);

}  // namespace clab
