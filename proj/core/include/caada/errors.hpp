#pragma once

#include <stdexcept>
#include <string>

namespace caada {

// Error taxonomy. The CLI maps these onto process exit codes:
// config/usage -> 1, data -> 2, divergence -> 3, verification -> 4.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Incompatible matrix or layer shapes. Messages name both shapes.
class DimensionError : public Error {
public:
    using Error::Error;
};

// A non-finite value (NaN/Inf) was produced where one may not be stored.
class NumericError : public Error {
public:
    using Error::Error;
};

// An operation was called out of order (e.g. backward before forward).
class StateError : public Error {
public:
    using Error::Error;
};

// Invalid configuration value or flag combination.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Bad input data: parse failures, schema violations, empty datasets.
class DataError : public Error {
public:
    using Error::Error;
};

// A batch or bucket too small for the covariance estimator (N < 2).
class DegenerateBatchError : public DataError {
public:
    using DataError::DataError;
};

// Training produced non-finite losses for several consecutive steps.
class DivergenceError : public Error {
public:
    using Error::Error;
};

}  // namespace caada
