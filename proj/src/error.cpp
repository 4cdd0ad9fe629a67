#include "mzq/error.hpp"

namespace mzq {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::EmptyCascade: return "EmptyCascade";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::DegenerateScatterer: return "DegenerateScatterer";
    case ErrorCode::DegenerateFlux: return "DegenerateFlux";
    case ErrorCode::QuasiStaticLimit: return "QuasiStaticLimit";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::BadInitialization: return "BadInitialization";
    case ErrorCode::NoFeature: return "NoFeature";
    case ErrorCode::IllPosed: return "IllPosed";
    case ErrorCode::Parse: return "Parse";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace mzq
