#pragma once

#include <stdexcept>
#include <string>

namespace pdmp {

/// Base class for every failure raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Adaptive quadrature could not meet its tolerance within the subdivision budget.
class QuadratureFailure : public Error {
public:
    using Error::Error;
};

/// A flow never reaches the boundary and no positive jump-rate floor is declared,
/// so no finite truncation horizon exists.
class UnboundedHorizon : public Error {
public:
    using Error::Error;
};

/// The simplex method hit a pivot too small to trust.
class NumericalBreakdown : public Error {
public:
    using Error::Error;
};

/// sum_k G_phi^k does not converge (spectral radius too close to one).
class SeriesDivergence : public Error {
public:
    using Error::Error;
};

/// The capacity-expansion investment grid cannot represent a post-jump state.
class GridTooCoarse : public Error {
public:
    using Error::Error;
};

/// Malformed input file.
class ParseError : public Error {
public:
    using Error::Error;
};

/// A policy, instance and model do not describe the same state/action sets.
class Incompatible : public Error {
public:
    using Error::Error;
};

}  // namespace pdmp
