#pragma once

#include <string>
#include <vector>

#include "qci/engine.hpp"

namespace qci::config {

// Parses the experiment description from an INI-style file: one [table]
// per subsystem, key = value lines, '#' comments. Unknown tables or keys
// are errors that name the offender. See the README for the schema.
engine::ExperimentConfig load_file(const std::string& path);

// Applies one "table.key=value" override on top of a parsed config
// (command-line flags win over the file).
void apply_override(engine::ExperimentConfig& cfg, const std::string& assignment);

// The resolved configuration, serialized back in file syntax (used for the
// run manifest echo).
std::string to_ini(const engine::ExperimentConfig& cfg);

}  // namespace qci::config
