#pragma once

#include <stdexcept>
#include <string>

namespace funaft {

// Input files or user-supplied values violate a documented precondition.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Cross-file reference failures while reading a dataset.
class LoadError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

// Impossible basis sizes, bad grid sizes and similar setup mistakes.
class ConfigError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

// Numerical failure that the caller may be able to work around.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Operation requested on the wrong model type (e.g. a curve from an additive fit).
class ModelTypeError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

}  // namespace funaft
