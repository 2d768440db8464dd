#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace landcover {

enum class ErrorCode {
    BadMagic,
    HeaderMismatch,
    UnsupportedDtype,
    Io,
    InvalidArgument,
    EmptyResult,
    OverlapConflict,
    InsufficientSamples,
    DegenerateStats,
    ShapeMismatch,
    EvalBeforeStats,
    NonFiniteLogits,
    NonFinite,
    DivergedLoss,
    EmptySampleSet,
    ArchMismatch,
    ResolutionMismatch,
    GridMismatch,
    Config,
};

constexpr std::string_view to_string(ErrorCode c) noexcept {
    switch (c) {
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::HeaderMismatch: return "HeaderMismatch";
    case ErrorCode::UnsupportedDtype: return "UnsupportedDtype";
    case ErrorCode::Io: return "Io";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::EmptyResult: return "EmptyResult";
    case ErrorCode::OverlapConflict: return "OverlapConflict";
    case ErrorCode::InsufficientSamples: return "InsufficientSamples";
    case ErrorCode::DegenerateStats: return "DegenerateStats";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::EvalBeforeStats: return "EvalBeforeStats";
    case ErrorCode::NonFiniteLogits: return "NonFiniteLogits";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::DivergedLoss: return "DivergedLoss";
    case ErrorCode::EmptySampleSet: return "EmptySampleSet";
    case ErrorCode::ArchMismatch: return "ArchMismatch";
    case ErrorCode::ResolutionMismatch: return "ResolutionMismatch";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::Config: return "Config";
    }
    return "Unknown";
}

/// Every domain failure in the library is reported as an Error carrying a code,
/// so callers (and tests) can branch on the kind without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

} // namespace landcover
