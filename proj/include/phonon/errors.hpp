#pragma once

#include <stdexcept>
#include <string>

namespace phonon {

// Base of every error raised by the library. Each subclass matches one failure
// class of the public operations so callers (and the CLI exit-code mapping)
// can dispatch on it.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an evaluator (t < 0, Re λ <= 0, w outside the band).
class DomainError : public Error {
public:
    using Error::Error;
};

// Invalid numerical parameter (step size, grid size, list ordering, ...).
class ParameterError : public Error {
public:
    using Error::Error;
};

// Wavenumber too close to a point where the group velocity vanishes.
class SingularZoneError : public Error {
public:
    using Error::Error;
};

// Evaluation requested beyond a precomputed horizon.
class RangeError : public Error {
public:
    using Error::Error;
};

// Branch that is deliberately not implemented (e.g. the mild route at T > 0).
class UnsupportedBranchError : public Error {
public:
    using Error::Error;
};

// A simulation run whose diagnostics show it cannot be trusted.
class InvalidRunError : public Error {
public:
    using Error::Error;
};

// A constructed object failed one of its invariants.
class InvariantError : public Error {
public:
    using Error::Error;
};

// Harness configuration rejected before any compute started.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace phonon
