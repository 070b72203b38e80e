#include "nfloc/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace nfloc {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
// Relative size below which a change of the LS cost is lost in rounding.
constexpr double kCostNoise = 1e-10;

// Distances from the parameterized user to every element; false if any
// radicand is non-positive.
bool element_distances(const AbcEstimate& e, const UpaConfig& cfg, Eigen::MatrixXd& rho) {
  const int N = cfg.half_size;
  rho.resize(cfg.side(), cfg.side());
  for (int m = -N; m <= N; ++m)
    for (int n = -N; n <= N; ++n) {
      const double rad = detail::element_radicand(e, n, m, cfg.spacing);
      if (!(rad > 0.0)) return false;
      rho(n + N, m + N) = std::sqrt(rad);
    }
  return true;
}

// Visits every baseline in residual order with (residual, d residual / d(A,B,C)).
template <typename Visitor>
bool visit_residuals(const AbcEstimate& e, const PhaseSumSet& sums, bool with_gradient,
                     Visitor&& visit) {
  const UpaConfig& cfg = sums.config();
  const int N = cfg.half_size;
  const double d = cfg.spacing;
  const double k = kTwoPi / cfg.wavelength;
  Eigen::MatrixXd rho;
  if (!element_distances(e, cfg, rho)) return false;
  const Eigen::MatrixXd& hp = sums.h_prefix();
  const Eigen::MatrixXd& vp = sums.v_prefix();
  Eigen::Vector3d grad = Eigen::Vector3d::Zero();

  // Horizontal: endpoints (L, m) and (M, m), linear term in B.
  for (int m = -N; m <= N; ++m) {
    const int col = m + N;
    for (int lo = -N; lo <= N; ++lo)
      for (int hi = lo + 1; hi <= N; ++hi) {
        const double rho_l = rho(lo + N, col);
        const double rho_u = rho(hi + N, col);
        const double delta = d * d * double(hi * hi - lo * lo) - 2.0 * e.B * d * double(hi - lo);
        const double model = -k * delta / (rho_u + rho_l);
        const double measured = hp(hi + N, col) - hp(lo + N, col);
        if (with_gradient) {
          const double inv_l = 1.0 / rho_l;
          const double inv_u = 1.0 / rho_u;
          // Residual gradient is minus the model gradient.
          grad(0) = 0.5 * k * (inv_u - inv_l);
          grad(1) = -k * d * (hi * inv_u - lo * inv_l);
          grad(2) = -k * d * m * (inv_u - inv_l);
        }
        visit(measured - model, grad);
      }
  }
  // Vertical: endpoints (n, L) and (n, M), linear term in C.
  for (int n = -N; n <= N; ++n) {
    const int row = n + N;
    for (int lo = -N; lo <= N; ++lo)
      for (int hi = lo + 1; hi <= N; ++hi) {
        const double rho_l = rho(row, lo + N);
        const double rho_u = rho(row, hi + N);
        const double delta = d * d * double(hi * hi - lo * lo) - 2.0 * e.C * d * double(hi - lo);
        const double model = -k * delta / (rho_u + rho_l);
        const double measured = vp(row, hi + N) - vp(row, lo + N);
        if (with_gradient) {
          const double inv_l = 1.0 / rho_l;
          const double inv_u = 1.0 / rho_u;
          grad(0) = 0.5 * k * (inv_u - inv_l);
          grad(1) = -k * d * n * (inv_u - inv_l);
          grad(2) = -k * d * (hi * inv_u - lo * inv_l);
        }
        visit(measured - model, grad);
      }
  }
  return true;
}

struct NormalEquations {
  Eigen::Matrix3d hessian = Eigen::Matrix3d::Zero();  // J^T J
  Eigen::Vector3d gradient = Eigen::Vector3d::Zero();  // J^T r
  double cost = 0.0;
};

bool normal_equations(const AbcEstimate& e, const PhaseSumSet& sums, NormalEquations& out) {
  out = NormalEquations{};
  const bool ok = visit_residuals(e, sums, true, [&out](double r, const Eigen::Vector3d& g) {
    out.hessian.noalias() += g * g.transpose();
    out.gradient += r * g;
    out.cost += r * r;
  });
  return ok;
}

bool objective(const AbcEstimate& e, const PhaseSumSet& sums, double& cost) {
  cost = 0.0;
  return visit_residuals(e, sums, false, [&cost](double r, const Eigen::Vector3d&) { cost += r * r; });
}

// LM iterates in (s, u, w) = (1 / r, x / r, z / r). The objective and the
// feasible set are those of (A, B, C); the (A, B, C) gradient is carried over
// by the chain rule. Far-field range enters the phases almost linearly through
// 1/r, which keeps the valley of the objective straight.
struct Direction {
  Eigen::Vector3d v;  // (s, u, w)

  bool feasible() const { return v(0) > 0.0 && v(1) * v(1) + v(2) * v(2) <= 1.0; }
  AbcEstimate abc() const { return {1.0 / (v(0) * v(0)), v(1) / v(0), v(2) / v(0)}; }

  // d(A, B, C) / d(s, u, w)
  Eigen::Matrix3d tangent() const {
    const double s = v(0), inv = 1.0 / s, inv2 = inv * inv;
    Eigen::Matrix3d t = Eigen::Matrix3d::Zero();
    t(0, 0) = -2.0 * inv2 * inv;
    t(1, 0) = -v(1) * inv2;
    t(1, 1) = inv;
    t(2, 0) = -v(2) * inv2;
    t(2, 2) = inv;
    return t;
  }
};

// Maps a start into the feasible set A > 0, A >= B^2 + C^2, pulling (B, C)
// radially inward when needed.
Direction to_direction(const AbcEstimate& e) {
  if (!std::isfinite(e.A) || !std::isfinite(e.B) || !std::isfinite(e.C))
    throw Error(ErrorCode::InfeasibleStart, "non-finite initial parameters");
  double A = e.A;
  const double bc2 = e.B * e.B + e.C * e.C;
  if (A <= 0.0) {
    if (bc2 <= 0.0) throw Error(ErrorCode::InfeasibleStart, "initial A <= 0 with B = C = 0");
    A = bc2 * (1.0 + 1e-6);
  }
  const double r = std::sqrt(A);
  Direction dir{{1.0 / r, e.B / r, e.C / r}};
  const double norm = std::hypot(dir.v(1), dir.v(2));
  if (norm > 1.0) dir.v.tail<2>() *= (1.0 - 1e-9) / norm;
  return dir;
}

bool direction_equations(const Direction& dir, const PhaseSumSet& sums, NormalEquations& out) {
  if (!normal_equations(dir.abc(), sums, out)) return false;
  const Eigen::Matrix3d t = dir.tangent();
  out.hessian = t.transpose() * out.hessian * t;
  out.gradient = t.transpose() * out.gradient;
  return true;
}

}  // namespace

void LsSettings::validate() const {
  if (max_iterations < 1) throw Error(ErrorCode::Config, "LS max iterations must be >= 1");
  if (!(step_tolerance > 0.0) || !(initial_damping > 0.0) || !(damping_up > 0.0) ||
      !(damping_down > 0.0))
    throw Error(ErrorCode::Config, "LS tolerances and damping factors must be positive");
}

CenterLineSums extract_center_sums(const PhaseSumSet& sums) {
  const UpaConfig& cfg = sums.config();
  const int N = cfg.half_size;
  if (N < 1) throw Error(ErrorCode::InsufficientAperture, "closed form needs N >= 1");
  const double scale = cfg.wavelength / kTwoPi;
  return {scale * sums.sum({Axis::Vertical, 0, N, 0}),
          scale * sums.sum({Axis::Vertical, -N, 0, 0}),
          scale * sums.sum({Axis::Horizontal, -N, N, 0})};
}

double closed_form_denominator_threshold(const CenterLineSums& cs, const UpaConfig& cfg) {
  const double dn = cfg.spacing * cfg.half_size;
  return 1e3 * std::numeric_limits<double>::epsilon() *
         (cs.delta_v1 * cs.delta_v1 + cs.delta_v2 * cs.delta_v2 + 2.0 * dn * dn) / (2.0 * dn);
}

AbcEstimate closed_form_estimate(const CenterLineSums& cs, const UpaConfig& cfg) {
  if (cfg.half_size < 1) throw Error(ErrorCode::InsufficientAperture, "closed form needs N >= 1");
  const double dn = cfg.spacing * cfg.half_size;
  const double d1 = cs.delta_v1;
  const double d2 = cs.delta_v2;
  const double dh = cs.delta_h;
  const double den = d1 - d2;
  if (!(std::abs(den) > closed_form_denominator_threshold(cs, cfg)))
    throw Error(ErrorCode::RangeUnidentifiable, "vertical center-line sums coincide");

  const double r_signed = (d1 * d1 + d2 * d2 - 2.0 * dn * dn) / (2.0 * den);
  if (!(r_signed > 0.0))
    throw Error(ErrorCode::InconsistentMeasurement, "closed-form range is not positive");
  AbcEstimate out;
  out.A = r_signed * r_signed;
  out.C = (2.0 * d1 * r_signed + dn * dn - d1 * d1) / (2.0 * dn);
  const double b_rad = 4.0 * out.A + 4.0 * dn * dn - dh * dh;
  if (b_rad < 0.0) throw Error(ErrorCode::InfeasibleMeasurement, "negative radicand for B");
  out.B = dh * std::sqrt(b_rad) / (4.0 * dn);
  return out;
}

AbcEstimate fallback_initialization(const CenterLineSums& cs, const UpaConfig& cfg) {
  const double aperture = cfg.aperture();
  if (!(aperture > 0.0)) throw Error(ErrorCode::InsufficientAperture, "fallback needs N >= 1");
  // Far field: delta_h ~ 2 dN x / r, delta_v1 + delta_v2 ~ 2 dN z / r.
  double ux = cs.delta_h / aperture;
  double uz = (cs.delta_v1 + cs.delta_v2) / aperture;
  const double norm = std::hypot(ux, uz);
  constexpr double kMaxCosine = 0.999;
  if (norm > kMaxCosine) {
    ux *= kMaxCosine / norm;
    uz *= kMaxCosine / norm;
  }
  const double r0 = 10.0 * aperture;
  return {r0 * r0, r0 * ux, r0 * uz};
}

Eigen::VectorXd ls_residuals(const AbcEstimate& e, const PhaseSumSet& sums) {
  Eigen::VectorXd out(residual_count(sums.config().half_size));
  Eigen::Index i = 0;
  if (!e.feasible() ||
      !visit_residuals(e, sums, false, [&](double r, const Eigen::Vector3d&) { out(i++) = r; }))
    throw Error(ErrorCode::InfeasibleParameter, "parameters outside the valid geometry");
  return out;
}

Eigen::MatrixX3d ls_jacobian(const AbcEstimate& e, const PhaseSumSet& sums) {
  Eigen::MatrixX3d out(residual_count(sums.config().half_size), 3);
  Eigen::Index i = 0;
  if (!e.feasible() || !visit_residuals(e, sums, true, [&](double, const Eigen::Vector3d& g) {
        out.row(i++) = g.transpose();
      }))
    throw Error(ErrorCode::InfeasibleParameter, "parameters outside the valid geometry");
  return out;
}

double ls_objective(const AbcEstimate& e, const PhaseSumSet& sums) {
  double cost = 0.0;
  if (!e.feasible() || !objective(e, sums, cost))
    throw Error(ErrorCode::InfeasibleParameter, "parameters outside the valid geometry");
  return cost;
}

EstimateReport make_report(const AbcEstimate& abc) {
  EstimateReport report;
  report.abc = abc;
  const auto sph = spherical_from_abc(abc);
  const auto cart = cartesian_from_abc(abc);
  report.spherical = sph.position;
  report.cartesian = cart.position;
  report.flags.clamped_arccos = sph.clamped_arccos;
  report.flags.azimuth_degenerate = sph.azimuth_degenerate;
  report.flags.clamped_y = cart.clamped_y;
  return report;
}

EstimateReport least_squares_estimate(const PhaseSumSet& sums, const AbcEstimate& init,
                                      const LsSettings& settings) {
  settings.validate();
  Direction x = to_direction(init);
  NormalEquations ne;
  if (!direction_equations(x, sums, ne))
    throw Error(ErrorCode::InfeasibleStart, "initial point places the user on an element");

  double damping = settings.initial_damping;
  bool converged = false;
  int iter = 0;
  while (iter < settings.max_iterations) {
    ++iter;
    Eigen::Matrix3d lhs = ne.hessian;
    for (int i = 0; i < 3; ++i) lhs(i, i) += damping * std::max(ne.hessian(i, i), 1e-300);
    const Eigen::Vector3d step = lhs.ldlt().solve(-ne.gradient);
    if (!step.allFinite()) {
      damping *= settings.damping_up;
      continue;
    }
    if (step.norm() <= settings.step_tolerance * (x.v.norm() + settings.step_tolerance)) {
      converged = true;
      break;
    }
    const Direction trial{x.v + step};
    double trial_cost = 0.0;
    // Once the predicted decrease is below the rounding noise of the summed
    // cost, comparing costs says nothing; the step itself comes from the
    // accurately computed gradient, so take it.
    const double predicted = -2.0 * ne.gradient.dot(step) - step.dot(ne.hessian * step);
    const bool in_noise = predicted <= kCostNoise * ne.cost;
    if (!trial.feasible() || !objective(trial.abc(), sums, trial_cost) ||
        !(trial_cost < ne.cost || in_noise)) {
      damping *= settings.damping_up;
      continue;
    }
    x = trial;
    direction_equations(x, sums, ne);
    damping = std::max(damping * settings.damping_down, 1e-15);
  }

  EstimateReport report = make_report(x.abc());
  report.iterations = iter;
  report.final_objective = ne.cost;
  report.flags.ls_converged = converged;
  return report;
}

PipelineReport estimate_pipeline(const PilotField& field, const LsSettings& settings) {
  const UpaConfig& cfg = field.config();
  const PhaseSumSet sums = build_phase_sums(adjacent_phase_diffs(field));
  const CenterLineSums cs = extract_center_sums(sums);

  PipelineReport out;
  const bool near_degenerate =
      std::abs(cs.delta_v1 - cs.delta_v2) < 100.0 * closed_form_denominator_threshold(cs, cfg);
  AbcEstimate init;
  try {
    init = closed_form_estimate(cs, cfg);
    out.closed_form = make_report(init);
    out.closed_form->flags.near_degenerate_denominator = near_degenerate;
  } catch (const Error& err) {
    switch (err.code()) {
      case ErrorCode::RangeUnidentifiable:
      case ErrorCode::InfeasibleMeasurement:
      case ErrorCode::InconsistentMeasurement:
        out.closed_form_error = err.code();
        init = fallback_initialization(cs, cfg);
        break;
      default:
        throw;
    }
  }
  out.refined = least_squares_estimate(sums, init, settings);
  out.refined.flags.fallback_init = out.closed_form_error.has_value();
  out.refined.flags.near_degenerate_denominator = near_degenerate;
  return out;
}

}  // namespace nfloc
