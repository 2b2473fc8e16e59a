#pragma once

#include <stdexcept>

namespace tailfuse {

// Invalid configuration (file, CLI flag, or programmatic value).
class ConfigError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input data: files, tables, sequences.
class DataError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dimension mismatch between tensors, vectors or tables.
class ShapeError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numeric failure that invalidates a run (non-finite gradients etc.).
class NumericError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace tailfuse
