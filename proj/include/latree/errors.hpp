#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace latree {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

class UnknownNode : public Error {
public:
    using Error::Error;
};

/// A tree violates a structural invariant (connectivity, latent degree, lengths).
class InvalidTree : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(const std::string& message, std::size_t line, std::size_t column)
        : Error(message + " at line " + std::to_string(line) + ", column " + std::to_string(column)),
          line_(line), column_(column) {}

    std::size_t line() const { return line_; }
    std::size_t column() const { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

class NotATreeMetric : public Error {
public:
    using Error::Error;
};

/// Observed branching exceeds the maximum degree supplied to recovery.
class InvalidDelta : public Error {
public:
    using Error::Error;
};

/// Zero correlation (or zero tau) maps to an infinite distance.
class InfiniteDistance : public Error {
public:
    using Error::Error;
};

class InvalidCorrelation : public Error {
public:
    using Error::Error;
};

class SingularMarginal : public Error {
public:
    using Error::Error;
};

class NotPositiveDefinite : public Error {
public:
    using Error::Error;
};

/// Noisy threshold tests produced inconsistent decisions.
class NoiseTooLarge : public Error {
public:
    using Error::Error;
};

class RoundBudgetExceeded : public Error {
public:
    using Error::Error;
};

class EstimateDegenerate : public Error {
public:
    using Error::Error;
};

} // namespace latree
