#pragma once

#include <stdexcept>
#include <string>

namespace wmrb {

// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid configuration: bad option values, unknown keys, inconsistent shapes
// requested by the caller. CLI exit code 1.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// Problems with input data: missing files, malformed rows, ids out of the
// declared bounds, corrupt model files. CLI exit code 2.
class DataError : public Error {
public:
    explicit DataError(const std::string& msg) : Error(msg) {}
};

// Model file cannot be decoded (bad magic, truncation, header/payload
// mismatch). A DataError with a dedicated type for targeted handling.
class ModelFormatError : public DataError {
public:
    explicit ModelFormatError(const std::string& msg) : DataError(msg) {}
};

// Training produced non-finite parameters. CLI exit code 3.
class DivergedError : public Error {
public:
    DivergedError(const std::string& msg, uint32_t epoch)
        : Error(msg), epoch_(epoch) {}
    uint32_t epoch() const { return epoch_; }

private:
    uint32_t epoch_;
};

}  // namespace wmrb
