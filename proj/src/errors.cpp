#include "nfloc/errors.hpp"

namespace nfloc {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Domain: return "domain error";
    case ErrorCode::DegenerateObservation: return "degenerate observation";
    case ErrorCode::InsufficientAperture: return "insufficient aperture";
    case ErrorCode::RangeUnidentifiable: return "range unidentifiable";
    case ErrorCode::InfeasibleMeasurement: return "infeasible measurement";
    case ErrorCode::InconsistentMeasurement: return "inconsistent measurement";
    case ErrorCode::InfeasibleParameter: return "infeasible parameter";
    case ErrorCode::InfeasibleStart: return "infeasible start";
    case ErrorCode::UnboundedInformation: return "unbounded information";
    case ErrorCode::DegenerateGeometry: return "degenerate geometry";
    case ErrorCode::Config: return "config error";
  }
  return "unknown error";
}

}  // namespace nfloc
