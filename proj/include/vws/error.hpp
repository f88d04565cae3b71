#pragma once

#include <stdexcept>
#include <string>

namespace vws {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input data or configuration violates a declared schema or invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Missing or inconsistent configuration (site parameters, knowledge file).
class ConfigError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Schema violation located in a CSV file.
class CsvError : public ValidationError {
public:
    CsvError(std::string file, std::size_t line, std::size_t column, const std::string& what)
        : ValidationError(file + ":" + std::to_string(line) + ":" + std::to_string(column) + ": " + what),
          file_(std::move(file)), line_(line), column_(column) {}

    const std::string& file() const noexcept { return file_; }
    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::string file_;
    std::size_t line_;
    std::size_t column_;
};

/// An iterative solver stopped before meeting its tolerance.
class SolverError : public Error {
public:
    using Error::Error;
};

/// The pipeline cannot continue until a t_K* selection is committed.
class AwaitingSelection : public Error {
public:
    using Error::Error;
};

} // namespace vws
