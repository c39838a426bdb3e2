#pragma once

#include <stdexcept>
#include <string>

namespace quantlab {

// Error taxonomy. The CLI maps each family onto an exit code:
//   DomainError    -> 1 (bad arguments / preconditions)
//   FormatError    -> 2 (malformed files)
//   DataError      -> 2 (bad tensor contents)
//   NumericalError -> 3 (convergence / construction failures)

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class FormatError : public Error {
public:
    using Error::Error;
};

class DataError : public Error {
public:
    using Error::Error;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

// A code construction could not produce a valid code (infeasible seed,
// unbracketed shooting residual, ...).
class ConstructionError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

// A stationarity step asked for a quantile inside the atom at +1.
class EscapedSupport : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class Cancelled : public Error {
public:
    Cancelled() : Error("operation cancelled") {}
};

}  // namespace quantlab
