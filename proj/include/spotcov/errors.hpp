#pragma once

#include <stdexcept>
#include <string>

namespace spotcov {

// Input violates a documented precondition. Alias kept so call sites read
// the same as the invalid-state case below.
using invalid_argument = std::invalid_argument;

/// Computation reached a state with no meaningful answer (degenerate design,
/// zero variance denominator, no positive kernel weights).
class invalid_state : public std::runtime_error {
public:
    explicit invalid_state(const std::string& what) : std::runtime_error(what) {}
};

/// Reading or writing a file failed.
class io_error : public std::runtime_error {
public:
    explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace spotcov
