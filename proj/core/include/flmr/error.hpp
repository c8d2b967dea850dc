#pragma once

#include <stdexcept>
#include <string>

namespace flmr {

/// Base class of every error thrown by this library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Tensor/batch dimensions do not line up.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A file is missing a required column or has the wrong layout.
class SchemaError : public Error {
public:
    using Error::Error;
};

/// A parsed value violates its documented range.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A cell or token could not be parsed at all.
class ParseError : public Error {
public:
    using Error::Error;
};

/// An operation was called outside its preconditions.
class UsageError : public Error {
public:
    using Error::Error;
};

/// A configuration value or combination is invalid.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Training produced a non-finite value.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Client updates could not be aggregated.
class AggregationError : public Error {
public:
    using Error::Error;
};

/// Reading or writing a file failed.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace flmr
