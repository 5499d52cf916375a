#pragma once

#include <stdexcept>
#include <string>

namespace gadst {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input records (trace lines, config lines, serialized artifacts).
struct ParseError : Error {
  using Error::Error;
};

// Input with the wrong overall structure (missing columns, bad headers).
struct SchemaError : ParseError {
  using ParseError::ParseError;
};

// Structurally valid input that violates a semantic constraint
// (coordinates out of range, non power-of-two grids, bad date ranges).
struct ValidationError : Error {
  using Error::Error;
};

// Tensor / raster shape mismatches.
struct ShapeError : Error {
  using Error::Error;
};

// Gap filling asked for a day class with no observed donor days.
struct ImputationError : Error {
  using Error::Error;
};

// Not enough days / windows for the requested operation.
struct InsufficientDataError : Error {
  using Error::Error;
};

// Bad or missing configuration keys.
struct ConfigError : Error {
  using Error::Error;
};

// Checkpoint corruption or parameter-manifest mismatch.
struct IntegrityError : Error {
  using Error::Error;
};

// Missing files or directories, failed reads/writes.
struct IoError : Error {
  using Error::Error;
};

// Non-finite loss during optimization.
struct DivergenceError : Error {
  using Error::Error;
};

}  // namespace gadst
