// Copyright (c) 2026, the mergelab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace mergelab {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shape or architecture mismatch between operands.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Non-finite values, failed convergence, divergence during optimization.
class NumericError : public Error {
public:
    NumericError(const std::string& what, double residual = 0.0)
        : Error(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// Misuse of an autodiff graph (unbound inputs, non-scalar loss, ...).
class GraphError : public Error {
public:
    using Error::Error;
};

/// A task vector was used against a different shared initialization.
class ProvenanceError : public Error {
public:
    using Error::Error;
};

/// Malformed, truncated or wrong-version files.
class FormatError : public Error {
public:
    using Error::Error;
};

/// A structurally valid file whose contents violate an invariant
/// (e.g. a tensor whose shape and value count disagree).
class ValidationError : public FormatError {
public:
    using FormatError::FormatError;
};

/// Bad configuration: unknown method or experiment, invalid hyperparameters,
/// infeasible suite.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// An expert failed to reach its accuracy gate.
class TrainingError : public Error {
public:
    using Error::Error;
};

} // namespace mergelab
