#pragma once

#include <stdexcept>
#include <string>

namespace spatconf {

// Invalid argument values: out-of-domain inputs, malformed specs, bad designs.
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Requested Bessel order outside the implemented set.
class UnsupportedOrderError : public DomainError {
public:
    using DomainError::DomainError;
};

// Factorization failures, singular designs, degenerate calibration.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SingularDesignError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

// Malformed input files or unreadable/unwritable paths.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public IoError {
public:
    ParseError(const std::string& what, std::size_t line)
        : IoError("line " + std::to_string(line) + ": " + what), line_(line) {}

    [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

} // namespace spatconf
