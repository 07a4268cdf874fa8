#pragma once

#include <stdexcept>
#include <string>

namespace innoguard {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Matrix/vector dimensions are mutually inconsistent.
struct DimensionMismatch : Error {
    using Error::Error;
};

/// A covariance matrix fails its (semi)definiteness requirement.
struct NotPsd : Error {
    using Error::Error;
};

/// Innovation covariance lost positive definiteness (Cholesky failure).
struct SingularS : Error {
    using Error::Error;
};

/// Scalar argument outside the mathematical domain of an operation.
struct DomainError : Error {
    using Error::Error;
};

/// Window too short for the requested number of portmanteau lags.
struct WindowTooShort : Error {
    using Error::Error;
};

/// FIR order exceeds the design horizon.
struct OrderExceedsHorizon : Error {
    using Error::Error;
};

/// Attack budgets admit no nonzero feasible plan (scaling collapsed to zero).
struct InfeasibleBudgets : Error {
    using Error::Error;
};

/// Configuration file could not be parsed.
struct ConfigParse : Error {
    using Error::Error;
};

/// Input file does not match the expected schema.
struct SchemaError : Error {
    using Error::Error;
};

/// I/O failure while reading or writing artifacts.
struct IoError : Error {
    using Error::Error;
};

}  // namespace innoguard
