#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace supplyrl {

/// Invalid task names, presets, hyperparameters or flags.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// API misuse, e.g. stepping a finished episode or mismatched shapes.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Numerical failure during optimisation. `diagnostic` carries a dump of the
/// offending minibatch statistics.
class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, std::string diagnostic)
      : std::runtime_error(what), diagnostic_(std::move(diagnostic)) {}
  const std::string& diagnostic() const noexcept { return diagnostic_; }

 private:
  std::string diagnostic_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Corrupt checkpoint or format-version mismatch.
class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace supplyrl
