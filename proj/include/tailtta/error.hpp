#pragma once

#include <stdexcept>
#include <string>

namespace tailtta {

enum class ErrorKind {
    ZeroVector,
    DimensionMismatch,
    NonFiniteInput,
    UnknownClass,
    NotInactive,
    InsufficientClasses,
    EmptyActiveSet,
    NoViews,
    ShapeMismatch,
    ViewCountMismatch,
    ParseError,
    UnknownKey,
    RangeViolation,
    RejectionFailure,
    IoError,
};

const char* to_string(ErrorKind kind) noexcept;

/// Every failure surfaced by the library. `what()` carries the kind name
/// followed by a message naming the offending key, line, or dimension.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind), message_(message) {}

    ErrorKind kind() const noexcept { return kind_; }
    /// The message without the kind prefix.
    const std::string& message() const noexcept { return message_; }

private:
    ErrorKind kind_;
    std::string message_;
};

}  // namespace tailtta
