#ifndef NFLOC_ERRORS_HPP
#define NFLOC_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace nfloc {

enum class ErrorCode {
  Domain,                  // argument outside its mathematical domain
  DegenerateObservation,   // zero-magnitude pilot observation
  InsufficientAperture,    // N = 0, no baselines
  RangeUnidentifiable,     // closed-form denominator vanishes (far field)
  InfeasibleMeasurement,   // negative radicand from measured sums
  InconsistentMeasurement, // closed-form range came out non-positive
  InfeasibleParameter,     // (A, B, C) outside A > 0, A >= B^2 + C^2
  InfeasibleStart,         // LS start could not be projected to feasibility
  UnboundedInformation,    // noise-free Fisher information
  DegenerateGeometry,      // singular / ill-conditioned Fisher matrix
  Config,                  // malformed scenario or CLI input
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace nfloc

#endif  // NFLOC_ERRORS_HPP
