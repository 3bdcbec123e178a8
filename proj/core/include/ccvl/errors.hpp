#pragma once

#include <stdexcept>
#include <string>

namespace ccvl {

/// Invalid or inconsistent configuration / construction input.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// An iterative solver failed to reach its tolerance within max_iters.
struct ConvergenceError : std::runtime_error {
    ConvergenceError(const std::string& what, double residual_, int iterations_)
        : std::runtime_error(what), residual(residual_), iterations(iterations_) {}
    double residual;
    int iterations;
};

/// Dimension mismatch between tables, models and environments.
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace ccvl
