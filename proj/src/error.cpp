#include "skynav/error.hpp"

namespace skynav {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NearSingular: return "NearSingular";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::BehindCamera: return "BehindCamera";
    case ErrorCode::OutsideValidCircle: return "OutsideValidCircle";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EvenKernel: return "EvenKernel";
    case ErrorCode::EmptyHistogram: return "EmptyHistogram";
    case ErrorCode::NonPositiveElevation: return "NonPositiveElevation";
    case ErrorCode::MixedEpochs: return "MixedEpochs";
    case ErrorCode::Underdetermined: return "Underdetermined";
    case ErrorCode::Diverged: return "Diverged";
    case ErrorCode::SingularGeometry: return "SingularGeometry";
    case ErrorCode::Unobservable: return "Unobservable";
    case ErrorCode::Parse: return "Parse";
    case ErrorCode::TimestampMismatch: return "TimestampMismatch";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace skynav
