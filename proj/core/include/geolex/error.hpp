#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace geolex {

/// Broad failure classes. Each maps to one CLI exit code.
enum class ErrorKind {
    validation,  // bad configuration or arguments (exit 1)
    data,        // malformed, missing or insufficient input data (exit 2)
    numerical,   // non-finite values, non-convergence (exit 3)
};

int exit_code(ErrorKind kind);
const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& what) : Error(ErrorKind::validation, what) {}
};

class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

/// Out-of-domain argument to a numeric routine (bad coordinates, unnormalized
/// probability vectors, ...).
class DomainError : public DataError {
public:
    using DataError::DataError;
};

class IoError : public DataError {
public:
    using DataError::DataError;
};

class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what) : Error(ErrorKind::numerical, what) {}
};

/// An iterative solver ran out of iterations. Carries the objective trace.
class ConvergenceError : public NumericalError {
public:
    ConvergenceError(const std::string& what, std::vector<double> trace)
        : NumericalError(what), trace_(std::move(trace)) {}

    const std::vector<double>& trace() const noexcept { return trace_; }

private:
    std::vector<double> trace_;
};

}  // namespace geolex
