#pragma once

#include <stdexcept>
#include <string>

namespace granular {

/// Invalid physical or numerical argument (restitution out of range, negative
/// moment seed, non-half-integer grid index, ...).
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A quadrature failed to reach the requested tolerance. Carries the error
/// estimate actually achieved so callers can decide whether to proceed.
class QuadratureError : public std::runtime_error {
public:
    QuadratureError(const std::string &what, double achieved)
        : std::runtime_error(what), achieved_(achieved) {}
    double achieved_error() const { return achieved_; }

private:
    double achieved_;
};

/// A moment-grid operation needed an index that is not stored.
class MissingMomentError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Interval narrowing produced a lower endpoint above the upper endpoint by
/// more than rounding slack; the constraint set is inconsistent.
class InfeasibleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent experiment configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace granular
