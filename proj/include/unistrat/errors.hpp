#pragma once

#include <stdexcept>
#include <string>

namespace unistrat {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

// Thrown when a daily factor x >= 1 + alpha would wipe out a short position.
class MarginBreach : public Error {
public:
    MarginBreach(const std::string& msg, long day = -1) : Error(msg), day(day) {}
    long day;
};

class InsufficientHistory : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(const std::string& msg, long row = -1, long col = -1)
        : Error(msg), row(row), col(col) {}
    long row;
    long col;
};

class NonPositivePrice : public Error {
public:
    NonPositivePrice(const std::string& msg, long row = -1, long col = -1)
        : Error(msg), row(row), col(col) {}
    long row;
    long col;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class DataError : public Error {
public:
    using Error::Error;
};

class PartitionError : public Error {
public:
    using Error::Error;
};

class LengthMismatch : public Error {
public:
    using Error::Error;
};

class GridTooLarge : public Error {
public:
    using Error::Error;
};

class BudgetTooSmall : public Error {
public:
    using Error::Error;
};

} // namespace unistrat
