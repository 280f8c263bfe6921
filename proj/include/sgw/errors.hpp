#pragma once

#include <stdexcept>
#include <string>

namespace sgw {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent configuration (bad keys, missing seed, ...).
class ConfigError : public Error {
public:
  using Error::Error;
};

/// Rejected input data: missing columns, missing cells, non-binary
/// treatment, constant covariates.
class IngestionError : public Error {
public:
  using Error::Error;
};

/// Complete or quasi-complete separation in a logistic fit, detected by a
/// coefficient exceeding the separation cap.
class SeparationError : public Error {
public:
  using Error::Error;
};

/// Rank-deficient design matrix.
class RankError : public Error {
public:
  using Error::Error;
};

/// An iterative solver failed to reach its tolerance.
class ConvergenceError : public Error {
public:
  using Error::Error;
};

/// A subgroup cell with an empty treatment arm where an estimate or SE was
/// requested directly.
class DegenerateCellError : public Error {
public:
  using Error::Error;
};

/// Cross-validation could not produce folds with both treatment classes.
class CvFoldError : public Error {
public:
  using Error::Error;
};

} // namespace sgw
