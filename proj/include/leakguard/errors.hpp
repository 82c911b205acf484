#pragma once

#include <stdexcept>
#include <string>

namespace leakguard {

/// Base of every error raised by the library. Each subclass maps to one CLI
/// exit code (see commands.hpp).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or contradictory input data (schema, CSV, missing columns).
class DataError : public Error {
public:
    using Error::Error;
};

/// Invalid experiment configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A requested configuration that is deliberately not implemented.
class UnsupportedError : public Error {
public:
    using Error::Error;
};

/// A resampling plan violated a structural guard (full-analysis split,
/// missing ordering, overlapping custom split, ...).
class GuardError : public Error {
public:
    using Error::Error;
};

/// Recipe or expression rejected by the static audit.
class AuditError : public Error {
public:
    using Error::Error;
};

/// An optimizer failed to reach its stated convergence criterion.
class FitError : public Error {
public:
    using Error::Error;
};

/// DSL syntax error; `position` is a 0-based byte offset into the source.
class ParseError : public Error {
public:
    ParseError(const std::string& message, std::size_t position)
        : Error(message + " at position " + std::to_string(position)), position_(position) {}

    std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

}  // namespace leakguard
