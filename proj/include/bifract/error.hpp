#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace bifract {

enum class ErrorCode {
    NonIncreasingKnots,
    ScalingOutOfRange,
    TooFewKnots,
    SizeMismatch,
    NonFinite,
    InvalidChain,
    IndexOutOfRange,
    PointOutsideDomain,
    EndpointMismatch,
    ScalingNotContractive,
    NotContractive,
    StripTooSmall,
    NonUniformKnots,
    DepthTooLarge,
    HypothesisViolated,
    TooFewResolutions,
    ParseError,
    IoError,
};

inline std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::NonIncreasingKnots: return "NonIncreasingKnots";
    case ErrorCode::ScalingOutOfRange: return "ScalingOutOfRange";
    case ErrorCode::TooFewKnots: return "TooFewKnots";
    case ErrorCode::SizeMismatch: return "SizeMismatch";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::InvalidChain: return "InvalidChain";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::PointOutsideDomain: return "PointOutsideDomain";
    case ErrorCode::EndpointMismatch: return "EndpointMismatch";
    case ErrorCode::ScalingNotContractive: return "ScalingNotContractive";
    case ErrorCode::NotContractive: return "NotContractive";
    case ErrorCode::StripTooSmall: return "StripTooSmall";
    case ErrorCode::NonUniformKnots: return "NonUniformKnots";
    case ErrorCode::DepthTooLarge: return "DepthTooLarge";
    case ErrorCode::HypothesisViolated: return "HypothesisViolated";
    case ErrorCode::TooFewResolutions: return "TooFewResolutions";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// One violated invariant; `index` is the offending entry (knot, row, ...) when meaningful.
struct Violation {
    ErrorCode code;
    std::size_t index = 0;
    std::string message;
};

class ValidationError : public Error {
public:
    explicit ValidationError(std::vector<Violation> violations)
        : Error(violations.empty() ? ErrorCode::SizeMismatch : violations.front().code,
                summarize(violations)),
          violations_(std::move(violations)) {}

    const std::vector<Violation>& violations() const noexcept { return violations_; }

    bool only(ErrorCode code) const {
        for (const auto& v : violations_)
            if (v.code != code) return false;
        return !violations_.empty();
    }

private:
    static std::string summarize(const std::vector<Violation>& vs) {
        std::string out;
        for (const auto& v : vs) {
            if (!out.empty()) out += "; ";
            out += v.message;
        }
        return out;
    }

    std::vector<Violation> violations_;
};

} // namespace bifract
