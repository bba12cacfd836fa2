#pragma once

#include <stdexcept>
#include <string>

namespace useq {

// Every failure the library can signal. The CLI maps these onto its exit-code
// contract: model/usage problems -> 1, numeric failures -> 2, I/O or parse -> 3.
enum class ErrorKind {
    DimensionMismatch,
    NonConvergence,
    DegenerateSpectrum,
    NotHermitian,
    NotPositiveDefinite,
    NotCompletelyPositive,
    InvalidModel,
    ZeroProbabilityPrefix,
    OrthogonalBoundary,
    TooLarge,
    NegativeConditional,
    ParseError,
    IoError,
};

inline const char* error_kind_name(ErrorKind k) {
    switch (k) {
        case ErrorKind::DimensionMismatch:     return "DimensionMismatch";
        case ErrorKind::NonConvergence:        return "NonConvergence";
        case ErrorKind::DegenerateSpectrum:    return "DegenerateSpectrum";
        case ErrorKind::NotHermitian:          return "NotHermitian";
        case ErrorKind::NotPositiveDefinite:   return "NotPositiveDefinite";
        case ErrorKind::NotCompletelyPositive: return "NotCompletelyPositive";
        case ErrorKind::InvalidModel:          return "InvalidModel";
        case ErrorKind::ZeroProbabilityPrefix: return "ZeroProbabilityPrefix";
        case ErrorKind::OrthogonalBoundary:    return "OrthogonalBoundary";
        case ErrorKind::TooLarge:              return "TooLarge";
        case ErrorKind::NegativeConditional:   return "NegativeConditional";
        case ErrorKind::ParseError:            return "ParseError";
        case ErrorKind::IoError:               return "IoError";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(error_kind_name(kind)) + ": " + message),
          kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace useq
