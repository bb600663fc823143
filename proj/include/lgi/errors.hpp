#pragma once

#include <stdexcept>

namespace lgi {

/// Base class for every error thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Mismatched vector/matrix dimensions.
struct DimensionError : Error {
  using Error::Error;
};

/// A point violates the membership constraints of its space.
struct DomainError : Error {
  using Error::Error;
};

/// Curvature sign inconsistent with the requested space.
struct CurvatureSignError : Error {
  using Error::Error;
};

/// Malformed signature string, model name, or input file.
struct ParseError : Error {
  using Error::Error;
};

/// Inconsistent or invalid configuration.
struct ConfigError : Error {
  using Error::Error;
};

/// Semantically invalid dataset contents.
struct DataError : Error {
  using Error::Error;
};

/// Edge sampling cannot satisfy its preconditions.
struct SamplingError : Error {
  using Error::Error;
};

/// Invalid node reference on an autodiff tape.
struct GraphError : Error {
  using Error::Error;
};

/// Tensor shape unsuitable for the requested operation.
struct ShapeError : Error {
  using Error::Error;
};

/// Non-finite value produced during evaluation.
struct EvaluationError : Error {
  using Error::Error;
};

/// Optimization failure (divergence, invalid state).
struct TrainingError : Error {
  using Error::Error;
};

/// Split construction failed its stratification guarantees.
struct SplitError : Error {
  using Error::Error;
};

}  // namespace lgi
