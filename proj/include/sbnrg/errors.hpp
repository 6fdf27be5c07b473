#pragma once

#include <stdexcept>
#include <string>

namespace sbnrg {

// Rejected inputs: violated preconditions, malformed configs.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A numerical kernel could not meet its contract (non-convergence,
// orthogonality loss, degenerate fit, ...).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& what) {
    if (!cond) throw InvalidArgument(what);
}

} // namespace sbnrg
