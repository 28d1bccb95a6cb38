#pragma once

#include <stdexcept>
#include <string>

namespace cadence {

// Error taxonomy shared by the library and the CLI. The CLI maps these to
// exit codes: ConfigError -> 1, DataError (and subclasses) -> 2,
// TrainingDiverged -> 3.

// Bad usage, bad configuration, inconsistent arguments.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Broken or inconsistent data: malformed files, failed validation.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed container files (feature files, checkpoints).
class FormatError : public DataError {
 public:
  explicit FormatError(const std::string& msg) : DataError(msg) {}
};

// Checkpoint-specific load/save failures (version mismatch, corruption).
class CheckpointError : public DataError {
 public:
  explicit CheckpointError(const std::string& msg) : DataError(msg) {}
};

// Evaluation protocol violations (speaker overlap, wrong conditioning mode).
class ProtocolError : public DataError {
 public:
  explicit ProtocolError(const std::string& msg) : DataError(msg) {}
};

// Non-finite gradients or losses during training. Carries the name of the
// offending parameter when known.
class TrainingDiverged : public std::runtime_error {
 public:
  explicit TrainingDiverged(const std::string& msg, std::string parameter = "")
      : std::runtime_error(msg), parameter_(std::move(parameter)) {}
  const std::string& parameter() const { return parameter_; }

 private:
  std::string parameter_;
};

// A gradient check was asked to verify a forward pass that is not
// deterministic; the report would be meaningless.
class CheckInvalid : public std::runtime_error {
 public:
  explicit CheckInvalid(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace cadence
