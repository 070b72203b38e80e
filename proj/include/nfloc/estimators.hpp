#ifndef NFLOC_ESTIMATORS_HPP
#define NFLOC_ESTIMATORS_HPP

#include <Eigen/Dense>

#include <optional>

#include "nfloc/channel.hpp"
#include "nfloc/geometry.hpp"
#include "nfloc/phase.hpp"

namespace nfloc {

/// Center-line distance differences (meters) used by the closed-form estimator:
///   delta_v1 from the vertical sum (0,0) -> (0,N),
///   delta_v2 from the vertical sum (0,-N) -> (0,0),
///   delta_h  from the horizontal sum (-N,0) -> (N,0).
struct CenterLineSums {
  double delta_v1 = 0.0;
  double delta_v2 = 0.0;
  double delta_h = 0.0;
};

/// Levenberg-Marquardt controls.
struct LsSettings {
  int max_iterations = 100;
  double step_tolerance = 1e-12;  // relative to the parameter norm
  double initial_damping = 1e-3;
  double damping_up = 10.0;
  double damping_down = 0.1;

  void validate() const;
};

struct EstimateFlags {
  bool clamped_y = false;
  bool clamped_arccos = false;
  bool azimuth_degenerate = false;
  bool near_degenerate_denominator = false;
  bool fallback_init = false;
  bool ls_converged = false;
};

struct EstimateReport {
  AbcEstimate abc;
  SphericalPosition spherical;
  CartesianPosition cartesian = CartesianPosition::Zero();
  EstimateFlags flags;
  int iterations = 0;
  double final_objective = 0.0;
};

struct PipelineReport {
  // Present when the closed form succeeded.
  std::optional<EstimateReport> closed_form;
  std::optional<ErrorCode> closed_form_error;
  EstimateReport refined;
};

CenterLineSums extract_center_sums(const PhaseSumSet& sums);

/// Relative guard on the closed-form denominator |delta_v1 - delta_v2|.
double closed_form_denominator_threshold(const CenterLineSums& cs, const UpaConfig& cfg);

AbcEstimate closed_form_estimate(const CenterLineSums& cs, const UpaConfig& cfg);

/// Deterministic far-field start used when the closed form is unavailable:
/// direction cosines from the center-line slopes, range at ten apertures.
AbcEstimate fallback_initialization(const CenterLineSums& cs, const UpaConfig& cfg);

/// Residuals measured - model over every horizontal (m, L < M) then every
/// vertical (n, L < M) baseline; 2Q entries.
Eigen::VectorXd ls_residuals(const AbcEstimate& e, const PhaseSumSet& sums);

/// d(residual)/d(A, B, C), one row per residual in `ls_residuals` order.
Eigen::MatrixX3d ls_jacobian(const AbcEstimate& e, const PhaseSumSet& sums);

double ls_objective(const AbcEstimate& e, const PhaseSumSet& sums);

/// Constrained LM on A > 0, A >= B^2 + C^2. Steps that leave the feasible set
/// are rejected and the damping raised. Non-convergence is reported through
/// `flags.ls_converged`, not thrown.
EstimateReport least_squares_estimate(const PhaseSumSet& sums, const AbcEstimate& init,
                                      const LsSettings& settings = {});

/// Converts an (A, B, C) estimate into the report form with recovery flags.
EstimateReport make_report(const AbcEstimate& abc);

/// diffs -> sums -> closed form -> LS.
PipelineReport estimate_pipeline(const PilotField& field, const LsSettings& settings = {});

}  // namespace nfloc

#endif  // NFLOC_ESTIMATORS_HPP
