#pragma once

#include <stdexcept>
#include <string>

namespace onebit {

/// Operand shapes disagree (rows/cols of matrices that must match).
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A binary matrix file is malformed or has the wrong element type.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An input file does not exist or cannot be opened.
class MissingFile : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Configuration text could not be parsed or holds an invalid value.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Spectral search found nothing above zero (e.g. all-zero residual data).
class NoSpectralPeak : public std::runtime_error {
public:
    NoSpectralPeak() : std::runtime_error("no spectral peak") {}
};

/// The recovered noise precision collapsed to zero, so the echo amplitude
/// cannot be converted back to signal units.
class ScaleUnidentifiable : public std::runtime_error {
public:
    ScaleUnidentifiable() : std::runtime_error("scale unidentifiable: lambda == 0") {}
};

namespace detail {

inline void require(bool cond, const std::string& msg)
{
    if (!cond) throw std::invalid_argument(msg);
}

inline void require_shape(bool cond, const std::string& msg)
{
    if (!cond) throw DimensionError(msg);
}

} // namespace detail
} // namespace onebit
