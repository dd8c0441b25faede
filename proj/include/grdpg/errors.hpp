#pragma once

#include <stdexcept>
#include <string>

namespace grdpg {

// Bad input or parameters outside the model's domain. The CLI maps this to exit code 1.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Numerical failure on valid input (non-convergence, degenerate spectrum). Exit code 2.
class ComputeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool ok, const std::string& what) {
    if (!ok) throw ValidationError(what);
}

}  // namespace grdpg
