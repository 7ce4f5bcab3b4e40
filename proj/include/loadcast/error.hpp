#pragma once

#include <stdexcept>
#include <string>

namespace loadcast {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input files (bad row, bad timestamp, wrong column count).
struct ParseError : Error {
  using Error::Error;
};

// Data that violates a structural contract: non-monotone timestamps,
// all-missing channels, series too short for the requested operation.
struct DataError : Error {
  using Error::Error;
};

// Tensor/array dimension mismatches.
struct ShapeError : Error {
  using Error::Error;
};

// Values outside an operation's mathematical domain (e.g. nonpositive load).
struct DomainError : Error {
  using Error::Error;
};

// Bad run configuration: unknown keys, unsatisfiable day budgets, fold counts.
struct ConfigError : Error {
  using Error::Error;
};

// Kernel bandwidth could not be chosen automatically.
struct BandwidthError : Error {
  using Error::Error;
};

// Training diverged; carries the epoch at which the loss became non-finite.
struct TrainingError : Error {
  TrainingError(const std::string& msg, int epoch_index)
      : Error(msg), epoch(epoch_index) {}
  int epoch;
};

struct IoError : Error {
  using Error::Error;
};

}  // namespace loadcast
