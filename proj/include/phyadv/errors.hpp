#pragma once

#include <stdexcept>
#include <string>

namespace phyadv {

/// Invalid configuration, shapes, labels or arguments. Maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operation invoked in the wrong state (e.g. backward without a recorded forward).
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Malformed, truncated or version-mismatched file.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values reached a place that requires finite ones. Maps to exit code 3.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training diverged; carries the epoch (or time step) at which the loss went non-finite.
class TrainingError : public NumericError {
 public:
  TrainingError(const std::string& what, int epoch)
      : NumericError(what + " (epoch " + std::to_string(epoch) + ")"), epoch_(epoch) {}

  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

}  // namespace phyadv
