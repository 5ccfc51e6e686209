#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mti {

/// Bad user input: malformed records, precondition violations, bad flags.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A record line that could not be parsed. Carries the 1-based line number.
class ParseError : public ValidationError {
public:
    ParseError(std::size_t line, const std::string& what)
        : ValidationError("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Failure talking to or interpreting a completion backend.
class BackendError : public std::runtime_error {
public:
    explicit BackendError(const std::string& what, int status = 0)
        : std::runtime_error(what), status_(status) {}

    /// HTTP status of the last response, 0 when no response was received.
    int status() const noexcept { return status_; }

private:
    int status_;
};

class TimeoutError : public BackendError {
public:
    using BackendError::BackendError;
};

/// The backend answered but no label could be extracted from the answer.
class VerdictParseError : public BackendError {
public:
    VerdictParseError(const std::string& what, std::string raw)
        : BackendError(what), raw_(std::move(raw)) {}

    const std::string& raw_response() const noexcept { return raw_; }

private:
    std::string raw_;
};

/// Internal invariant broken (e.g. a stats key that the build should have produced).
class ConsistencyError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Snapshot file problems: bad magic, version, checksum, truncation.
class SnapshotError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

} // namespace mti
