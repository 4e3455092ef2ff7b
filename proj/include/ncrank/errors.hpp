#pragma once

#include <stdexcept>
#include <string>

namespace ncrank {

/// Base class for all errors thrown by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Invalid input: malformed files, dimension mismatches, violated preconditions.
struct ValidationError : Error {
    using Error::Error;
};

/// Numerical breakdown: non-finite iterates, unreachable bounds, infeasible parameters.
struct NumericalError : Error {
    using Error::Error;
};

/// Fixed-point solve did not converge within the iteration budget.
struct SolverFailure : Error {
    using Error::Error;
};

}  // namespace ncrank
