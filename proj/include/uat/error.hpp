#pragma once

#include <stdexcept>
#include <string>

namespace uat {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand shapes are incompatible with the requested operation.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A value lies outside the domain of an operation (log of a non-positive
/// number, zero-norm normalization, non-PD correlation, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Invalid user configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Non-finite loss or gradient during training.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// A file could not be read or written, or its contents are malformed.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace uat
