#pragma once

#include <stdexcept>
#include <string>

namespace ppide {

// Bad user input: malformed paths, out-of-range times, configs that violate
// the standing assumptions on the coefficients.
struct InputError : std::invalid_argument {
    explicit InputError(const std::string& what) : std::invalid_argument(what) {}
};

// Numerical failure inside a solver (rank-deficient regression, Picard
// divergence, non-positive change-of-measure weight, ...).
struct SolverError : std::runtime_error {
    explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

// A requested approximation quality could not be certified (e.g. polynomial
// degree too small for the requested sup-error).
struct ApproximationError : std::runtime_error {
    explicit ApproximationError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace ppide
