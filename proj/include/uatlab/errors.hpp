#pragma once

#include <stdexcept>
#include <string>

namespace uatlab {

// Base class for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Tensor shape disagreement (e.g. matmul inner dimensions).
class DimensionError : public Error {
public:
    using Error::Error;
};

// Non-finite values or other numerical breakdown.
class NumericError : public Error {
public:
    using Error::Error;
};

// Invalid user-supplied configuration value.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Violated API precondition (caller bug, not user input).
class ContractError : public Error {
public:
    using Error::Error;
};

// Out-of-range index (token ids, class targets).
class IndexError : public Error {
public:
    using Error::Error;
};

// Malformed or oversized model/corpus input.
class InputError : public Error {
public:
    using Error::Error;
};

// Filesystem problems.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace uatlab
