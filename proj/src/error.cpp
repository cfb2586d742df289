#include "tailtta/error.hpp"

namespace tailtta {

const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::ZeroVector: return "ZeroVector";
        case ErrorKind::DimensionMismatch: return "DimensionMismatch";
        case ErrorKind::NonFiniteInput: return "NonFiniteInput";
        case ErrorKind::UnknownClass: return "UnknownClass";
        case ErrorKind::NotInactive: return "NotInactive";
        case ErrorKind::InsufficientClasses: return "InsufficientClasses";
        case ErrorKind::EmptyActiveSet: return "EmptyActiveSet";
        case ErrorKind::NoViews: return "NoViews";
        case ErrorKind::ShapeMismatch: return "ShapeMismatch";
        case ErrorKind::ViewCountMismatch: return "ViewCountMismatch";
        case ErrorKind::ParseError: return "ParseError";
        case ErrorKind::UnknownKey: return "UnknownKey";
        case ErrorKind::RangeViolation: return "RangeViolation";
        case ErrorKind::RejectionFailure: return "RejectionFailure";
        case ErrorKind::IoError: return "IoError";
    }
    return "Unknown";
}

}  // namespace tailtta
