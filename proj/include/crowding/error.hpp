#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace crowding {

/// Invalid configuration or argument domain. Maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Missing, unreadable or malformed input data. Maps to CLI exit code 3.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// On-disk format violations (bad magic, truncation, CRC, header mismatch).
class FormatError : public DataError {
public:
    using DataError::DataError;
};

/// Non-finite loss or gradients. Maps to CLI exit code 4.
class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Stimulus geometry that does not fit on the canvas.
class PlacementError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

/// Tensor shapes that do not chain.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

}  // namespace crowding
