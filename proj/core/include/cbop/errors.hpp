#pragma once

#include <stdexcept>
#include <string>

namespace cbop {

/// Error classes surfaced to the command line. The integer value of each
/// class is the process exit code used by the `cbop` binary.
enum class ErrorClass : int {
    config = 2,
    io = 3,
    divergence = 4,
    shape = 5,
};

class Error : public std::runtime_error {
public:
    Error(ErrorClass cls, std::string tag, const std::string& message)
        : std::runtime_error(message), class_(cls), tag_(std::move(tag)) {}

    ErrorClass error_class() const noexcept { return class_; }
    int exit_code() const noexcept { return static_cast<int>(class_); }
    // Short machine-parsable identifier, e.g. "magic-mismatch".
    const std::string& tag() const noexcept { return tag_; }

private:
    ErrorClass class_;
    std::string tag_;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& msg, std::string tag = "config")
        : Error(ErrorClass::config, std::move(tag), msg) {}
};

struct IoError : Error {
    explicit IoError(const std::string& msg, std::string tag = "io")
        : Error(ErrorClass::io, std::move(tag), msg) {}
};

struct MagicMismatchError : IoError {
    explicit MagicMismatchError(const std::string& msg) : IoError(msg, "magic-mismatch") {}
};

struct VersionError : IoError {
    explicit VersionError(const std::string& msg) : IoError(msg, "unsupported-version") {}
};

struct TruncationError : IoError {
    TruncationError(const std::string& msg, std::size_t missing)
        : IoError(msg, "truncated"), missing_bytes(missing) {}
    std::size_t missing_bytes;
};

struct ShapeError : Error {
    explicit ShapeError(const std::string& msg, std::string tag = "shape-mismatch")
        : Error(ErrorClass::shape, std::move(tag), msg) {}
};

struct InvalidMemberError : ShapeError {
    explicit InvalidMemberError(const std::string& msg) : ShapeError(msg, "invalid-member") {}
};

struct NonFiniteError : Error {
    explicit NonFiniteError(const std::string& msg)
        : Error(ErrorClass::divergence, "non-finite", msg) {}
};

struct DivergenceError : Error {
    explicit DivergenceError(const std::string& msg)
        : Error(ErrorClass::divergence, "divergence", msg) {}
};

struct EmptyInputError : ConfigError {
    explicit EmptyInputError(const std::string& msg) : ConfigError(msg, "empty-input") {}
};

struct InsufficientDataError : ConfigError {
    explicit InsufficientDataError(const std::string& msg) : ConfigError(msg, "insufficient-data") {}
};

struct UnsupportedEnvError : ConfigError {
    explicit UnsupportedEnvError(const std::string& msg) : ConfigError(msg, "unsupported-env") {}
};

}  // namespace cbop
