#pragma once

#include <stdexcept>
#include <string>

namespace conncrack {

/// Error categories surfaced by the core. The C API maps each kind onto a
/// status code; the CLI maps them onto exit codes.
enum class ErrorKind {
    Configuration,
    Dimension,
    Format,
    Io,
    Divergence,
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& m) : Error(ErrorKind::Configuration, m) {}
};

class DimensionError : public Error {
public:
    explicit DimensionError(const std::string& m) : Error(ErrorKind::Dimension, m) {}
};

/// Malformed file content. `offset` is the byte position where decoding gave
/// up, or -1 when it is not meaningful.
class FormatError : public Error {
public:
    FormatError(const std::string& m, long long offset = -1)
        : Error(ErrorKind::Format,
                offset >= 0 ? m + " (at byte " + std::to_string(offset) + ")" : m),
          offset_(offset) {}

    long long offset() const noexcept { return offset_; }

private:
    long long offset_;
};

class IoError : public Error {
public:
    explicit IoError(const std::string& m) : Error(ErrorKind::Io, m) {}
};

class DivergenceError : public Error {
public:
    DivergenceError(const std::string& m, long long iteration)
        : Error(ErrorKind::Divergence, m + " at iteration " + std::to_string(iteration)),
          iteration_(iteration) {}

    long long iteration() const noexcept { return iteration_; }

private:
    long long iteration_;
};

} // namespace conncrack
