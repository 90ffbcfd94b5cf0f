#pragma once

#include <stdexcept>
#include <string>

namespace iupf {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A parameter is outside its admissible range.
class InvalidParameter : public Error {
public:
    using Error::Error;
};

/// Non-finite input, failed factorization, and similar numerical faults.
class NumericError : public Error {
public:
    using Error::Error;
};

/// A planar point lies outside the field domain and its clamp band.
class DomainError : public Error {
public:
    using Error::Error;
};

/// An iterative linear solve hit its iteration cap.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double residual, int iterations)
        : Error(what), residual_(residual), iterations_(iterations) {}

    double residual() const noexcept { return residual_; }
    int iterations() const noexcept { return iterations_; }

private:
    double residual_;
    int iterations_;
};

/// Cahn-Hilliard stepping blew up; retry with a smaller artificial time step.
class InstabilityError : public Error {
public:
    using Error::Error;
};

/// Scenario or configuration failed validation.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Malformed scenario file.
class ParseError : public ValidationError {
public:
    ParseError(const std::string& what, int line)
        : ValidationError("line " + std::to_string(line) + ": " + what), line_(line) {}

    int line() const noexcept { return line_; }

private:
    int line_;
};

/// Filesystem failure, with the offending path in the message.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace iupf
