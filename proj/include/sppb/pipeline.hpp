#pragma once

#include <string>

#include "sppb/config.hpp"

namespace sppb {

/// Runs one pipeline subcommand against a validated configuration. Known
/// names: synth, build, train, sweep, explain, simplify, replicate. Every
/// artifact lands under config.output.directory next to a manifest naming
/// the inputs read, the config hash, and the tool version. A stage whose
/// upstream artifact is missing materializes it first, so each subcommand
/// is runnable on its own and `replicate` equals the staged composition.
/// Unknown names raise ConfigError; stage failures propagate as
/// ConfigError, DataError, or FitError.
void run_subcommand(const std::string& name, const RunConfig& config,
                    bool verbose = false);

}  // namespace sppb
