#pragma once

#include <stdexcept>
#include <string>

namespace fvdecay {

/// Base class for all toolkit errors.
struct Error : std::runtime_error {
    explicit Error(const std::string &msg) : std::runtime_error(msg) {}
};

struct QuadratureNonConvergent : Error {
    using Error::Error;
};

struct BarrierNotFound : Error {
    using Error::Error;
};

struct GridTooNarrow : Error {
    using Error::Error;
};

struct LinearSolveFailure : Error {
    using Error::Error;
};

struct StabilityViolation : Error {
    using Error::Error;
};

struct TruncationInsufficient : Error {
    using Error::Error;
};

struct BracketingFailure : Error {
    using Error::Error;
};

struct ToleranceUnreachable : Error {
    using Error::Error;
};

struct NoTurningPoint : Error {
    using Error::Error;
};

struct NoInteriorMinimum : Error {
    using Error::Error;
};

struct NewtonDivergence : Error {
    using Error::Error;
};

struct SingularOperator : Error {
    using Error::Error;
};

struct ParseError : Error {
    using Error::Error;
};

struct ValidationError : Error {
    using Error::Error;
};

} // namespace fvdecay
