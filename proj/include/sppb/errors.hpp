#pragma once

#include <stdexcept>
#include <string>

namespace sppb {

/// Invalid or inconsistent run configuration (CLI exit code 2).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Bad input data: unreadable files, invalid measurements, out-of-range
/// scores, empty datasets (CLI exit code 3).
struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Failures while fitting or evaluating models (CLI exit code 4).
struct FitError : std::runtime_error {
  explicit FitError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace sppb
