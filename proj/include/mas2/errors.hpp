#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mas2 {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad user input: unparsable composition expression, invalid language code,
/// inconsistent configuration. The CLI maps this to exit code 1.
class UsageError : public Error {
public:
    using Error::Error;
};

/// A composition expression that does not match the grammar.
class ParseError : public UsageError {
public:
    ParseError(std::string message, std::size_t position)
        : UsageError(std::move(message)), position_(position) {}

    /// Byte offset into the expression where parsing failed.
    std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

/// A record file or in-memory dataset violating the schema or an invariant.
class DataError : public Error {
public:
    explicit DataError(std::string message, std::size_t line = 0)
        : Error(line == 0 ? message : "line " + std::to_string(line) + ": " + message),
          line_(line) {}

    /// 1-based line number of the offending record, 0 when not tied to a line.
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Failure of a translation backend. `index` is the position of the failing
/// text inside the request when the backend can attribute it.
class TranslationError : public Error {
public:
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    explicit TranslationError(std::string message, std::size_t index = npos)
        : Error(std::move(message)), index_(index) {}

    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

enum class RemoteErrorKind {
    transport,          // connection refused, timeout, reset
    status,             // non-200 HTTP status
    malformed_response, // body is not the documented JSON shape
    count_mismatch,     // fewer or more results than inputs
    score_out_of_range, // scorer returned a value outside [0, 1]
};

const char* to_string(RemoteErrorKind kind) noexcept;

/// Protocol-level failure talking to an HTTP service (MT or scorer).
class RemoteError : public Error {
public:
    RemoteError(RemoteErrorKind kind, const std::string& message, int status = 0)
        : Error(std::string(to_string(kind)) + ": " + message), kind_(kind), status_(status) {}

    RemoteErrorKind kind() const noexcept { return kind_; }
    int status() const noexcept { return status_; }

private:
    RemoteErrorKind kind_;
    int status_;
};

/// Scorer contract violations that are not transport related.
class ScorerError : public Error {
public:
    using Error::Error;
};

} // namespace mas2
