#pragma once

#include <stdexcept>
#include <string>

namespace ccc {

// Root of every error raised by the library. The CLI maps the two families
// below onto exit codes 2 (data/config) and 3 (numeric).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DataError : public Error {
public:
    using Error::Error;
};

class DimensionError : public DataError {
public:
    using DataError::DataError;
};

class BoundsError : public DataError {
public:
    using DataError::DataError;
};

class ConfigError : public DataError {
public:
    using DataError::DataError;
};

class LoadError : public DataError {
public:
    LoadError(const std::string& file, std::size_t line, const std::string& what)
        : DataError(file + ":" + std::to_string(line) + ": " + what), file_(file), line_(line) {}
    LoadError(const std::string& file, const std::string& what)
        : DataError(file + ": " + what), file_(file), line_(0) {}

    const std::string& file() const noexcept { return file_; }
    // 1-based; 0 when the problem is not tied to a single line.
    std::size_t line() const noexcept { return line_; }

private:
    std::string file_;
    std::size_t line_;
};

class NumericError : public Error {
public:
    using Error::Error;
};

class SingularityError : public NumericError {
public:
    using NumericError::NumericError;
};

class DivergenceError : public NumericError {
public:
    using NumericError::NumericError;
};

} // namespace ccc
