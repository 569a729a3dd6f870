#pragma once

#include <stdexcept>
#include <string>

namespace shiftkit {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input: shape mismatch, out-of-range value, unreadable file.
class DataError : public Error {
public:
    using Error::Error;
};

/// Input is well-formed but the estimator is undefined on it
/// (single-class validation set, tpr == fpr, empty partition, ...).
class DegenerateError : public Error {
public:
    using Error::Error;
};

namespace detail {

inline void require(bool ok, const std::string& what) {
    if (!ok) throw DataError(what);
}

}  // namespace detail
}  // namespace shiftkit
