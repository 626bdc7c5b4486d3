#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rolab {

/// Base for every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shapes or lengths that must agree do not.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Input is degenerate for the requested operation (zero radius, constant
/// channel, empty random graph, too few samples...).
class DegenerateInput : public Error {
public:
    using Error::Error;
};

/// A linear system that had to be solved was numerically singular.
class IllConditioned : public Error {
public:
    using Error::Error;
};

/// A time integration or reservoir drive produced a non-finite value.
class Divergence : public Error {
public:
    Divergence(const std::string& what, std::size_t step)
        : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}

    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

/// Configuration values outside their documented domain.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace rolab
