#pragma once

#include <stdexcept>
#include <string>

namespace spmpc {

/// Invalid problem data or violated precondition (rates out of bounds,
/// failed standing assumptions, malformed instance files).
class DomainError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A numerical procedure failed to converge or produced unusable values.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Optimizer-level failure. Carries the path of a program dump when one
/// was written.
class SolverError : public std::runtime_error {
public:
    explicit SolverError(const std::string& what, std::string dump = {})
        : std::runtime_error(what), dump_path(std::move(dump)) {}
    std::string dump_path;
};

} // namespace spmpc
