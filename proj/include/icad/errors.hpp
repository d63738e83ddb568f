#pragma once

#include <stdexcept>
#include <string>

namespace icad {

// Thrown for malformed configuration (CLI exit code 2).
struct config_error : std::runtime_error {
  explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

// Thrown for unreadable or malformed data files and directories (CLI exit
// code 3).
struct data_error : std::runtime_error {
  explicit data_error(const std::string& what) : std::runtime_error(what) {}
};

// Thrown when a requested metric is mathematically undefined for the given
// labels (e.g. a ROC curve over a single class).
struct undefined_metric_error : std::runtime_error {
  explicit undefined_metric_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace icad
