#pragma once

#include <stdexcept>
#include <string>

namespace kge {

/// Bad arguments: out-of-range ids, invalid configuration values.
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed or missing dataset / checkpoint files.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite values escaping the numeric kernels.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace kge
