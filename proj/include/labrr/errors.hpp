#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace labrr {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

/// Raised when an LU pivot falls below the scale-aware singularity threshold.
class SingularSystem : public Error {
public:
    using Error::Error;
};

class InsufficientData : public Error {
public:
    using Error::Error;
};

class DegenerateLabels : public Error {
public:
    using Error::Error;
};

class UnknownFunction : public Error {
public:
    using Error::Error;
};

class EmptyDataset : public Error {
public:
    using Error::Error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// CSV parse failure at a 1-based (row, col) position in the source file.
class ParseError : public Error {
public:
    ParseError(std::size_t row, std::size_t col, const std::string &what)
        : Error("parse error at row " + std::to_string(row) + ", col " + std::to_string(col) + ": " + what),
          row_(row),
          col_(col) {}

    [[nodiscard]] std::size_t row() const noexcept { return row_; }
    [[nodiscard]] std::size_t col() const noexcept { return col_; }

private:
    std::size_t row_;
    std::size_t col_;
};

}  // namespace labrr
