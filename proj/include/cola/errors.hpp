#pragma once

#include <stdexcept>
#include <string>

namespace cola {

// Base class for all library errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor shape / dimension mismatch.
struct ShapeError : Error {
    explicit ShapeError(const std::string& msg) : Error(msg) {}
};

// NaN/Inf produced by an op, or other numeric failure.
struct NumericError : Error {
    explicit NumericError(const std::string& msg) : Error(msg) {}
};

// Misuse of the tape (double backward, foreign value id, non-scalar loss).
struct TapeError : Error {
    explicit TapeError(const std::string& msg) : Error(msg) {}
};

// Merge requested for an adapter that is not a linear map of its input,
// or merge/unmerge called out of order.
struct NotMergeableError : Error {
    explicit NotMergeableError(const std::string& msg) : Error(msg) {}
};

// Bad magic, bad version, truncated file.
struct FormatError : Error {
    explicit FormatError(const std::string& msg) : Error(msg) {}
};

// Invalid run configuration (CLI exit code 2).
struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// Offload worker did not answer within the flush timeout.
struct TimeoutError : Error {
    explicit TimeoutError(const std::string& msg) : Error(msg) {}
};

} // namespace cola
