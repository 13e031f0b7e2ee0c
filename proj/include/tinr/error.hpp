#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tinr {

// Base of every error raised by the library. `kind()` is a stable
// machine-readable identifier used by the CLI and the service.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

// Input was structurally invalid (bad arguments, schema violation, ...).
class ValidationError : public Error {
public:
    using Error::Error;
};

// Filesystem or stream failure.
class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error("IoError", what) {}
};

class ParseError : public ValidationError {
public:
    ParseError(std::size_t offset, std::string reason)
        : ValidationError("ParseError", "parse error at byte " + std::to_string(offset) + ": " + reason),
          offset_(offset),
          reason_(std::move(reason)) {}

    std::size_t offset() const noexcept { return offset_; }
    const std::string& reason() const noexcept { return reason_; }

private:
    std::size_t offset_;
    std::string reason_;
};

}  // namespace tinr
