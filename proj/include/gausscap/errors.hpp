#pragma once

#include <stdexcept>
#include <string>

namespace gausscap {

// Structured input rejected (bad probabilities, constraint violations, ...).
// The message names the violated invariant.
class ValidationError : public std::invalid_argument {
public:
    explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

// A numeric procedure failed to converge (quadrature refinement, optimizer,
// bracket search). Carries whatever diagnostic string the caller attached,
// e.g. the last two quadrature estimates or the solver trace.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace gausscap
