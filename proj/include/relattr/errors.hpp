#pragma once

#include <stdexcept>
#include <string>

namespace relattr {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed file content (bad syntax, wrong column count, ...).
struct ParseError : Error {
    using Error::Error;
};

/// Structurally invalid model or domain object.
struct ValidationError : Error {
    using Error::Error;
};

/// Tensor/layer shape disagreement at call time.
struct ShapeError : Error {
    using Error::Error;
};

/// Invalid configuration value.
struct ConfigError : Error {
    using Error::Error;
};

/// Filesystem-level failure.
struct IoError : Error {
    using Error::Error;
};

/// R-peak detection found nothing usable; distinct from an empty result.
struct NoPeaksError : Error {
    using Error::Error;
};

struct ComputeError : Error {
    using Error::Error;
};

}  // namespace relattr
