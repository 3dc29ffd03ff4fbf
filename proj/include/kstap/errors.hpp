#pragma once

#include <stdexcept>
#include <string>

namespace kstap {

/// Bad call arguments: dimension mismatches, out-of-range indices, invalid ranks.
class ArgumentError : public std::invalid_argument {
public:
    explicit ArgumentError(const std::string& msg) : std::invalid_argument(msg) {}
};

/// Requested result would exceed the configured size limits.
class SizingError : public ArgumentError {
public:
    explicit SizingError(const std::string& msg) : ArgumentError(msg) {}
};

/// Input violates a mathematical contract (non-Hermitian, non-psd, ...).
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Input is structurally valid but degenerate for the operation (all zero, ...).
class DegenerateInputError : public std::runtime_error {
public:
    explicit DegenerateInputError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed on-disk data (bad magic, wrong version, truncated payload).
class FormatError : public std::runtime_error {
public:
    explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid or incomplete configuration.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Filesystem failure (unreadable input, unwritable output path).
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace kstap
