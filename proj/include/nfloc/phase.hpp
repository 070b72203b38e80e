#ifndef NFLOC_PHASE_HPP
#define NFLOC_PHASE_HPP

// Adjacent phase-differences, their row/column prefix sums, and the
// (A, B, C)-parameterized model of every summed phase-difference.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <utility>

#include "nfloc/channel.hpp"
#include "nfloc/geometry.hpp"

namespace nfloc {

enum class Axis { Horizontal, Vertical };

/// One summed phase-difference baseline. Horizontal runs along x (index n from
/// `lower` to `upper` at fixed m); vertical runs along z (m from `lower` to
/// `upper` at fixed n).
struct SumIndex {
  Axis axis = Axis::Horizontal;
  int lower = 0;
  int upper = 0;
  int fixed = 0;

  bool valid(int half_size) const {
    return -half_size <= lower && lower < upper && upper <= half_size && -half_size <= fixed &&
           fixed <= half_size;
  }
};

/// Wrapped adjacent differences in (-pi, pi].
struct AdjacentDiffs {
  UpaConfig cfg;
  // x_diffs(n + N - 1, m + N) = arg(y_{n,m} / y_{n-1,m}), n in [-N+1, N]
  Eigen::MatrixXd x_diffs;
  // z_diffs(n + N, m + N - 1) = arg(y_{n,m} / y_{n,m-1}), m in [-N+1, N]
  Eigen::MatrixXd z_diffs;

  double x(int n, int m) const { return x_diffs(n + cfg.half_size - 1, m + cfg.half_size); }
  double z(int n, int m) const { return z_diffs(n + cfg.half_size, m + cfg.half_size - 1); }
};

/// Prefix sums of the adjacent differences, anchored at zero on index -N.
class PhaseSumSet {
 public:
  PhaseSumSet() = default;
  PhaseSumSet(const UpaConfig& cfg, Eigen::MatrixXd h_prefix, Eigen::MatrixXd v_prefix)
      : cfg_(cfg), h_prefix_(std::move(h_prefix)), v_prefix_(std::move(v_prefix)) {}

  const UpaConfig& config() const { return cfg_; }

  // h_prefix(n + N, m + N) = sum of x-diffs from -N+1 through n along row m.
  const Eigen::MatrixXd& h_prefix() const { return h_prefix_; }
  // v_prefix(n + N, m + N) = sum of z-diffs from -N+1 through m along column n.
  const Eigen::MatrixXd& v_prefix() const { return v_prefix_; }

  // Unchecked O(1) access; `lookup_sum` is the validating entry point.
  double sum(const SumIndex& idx) const {
    const int N = cfg_.half_size;
    if (idx.axis == Axis::Horizontal)
      return h_prefix_(idx.upper + N, idx.fixed + N) - h_prefix_(idx.lower + N, idx.fixed + N);
    return v_prefix_(idx.fixed + N, idx.upper + N) - v_prefix_(idx.fixed + N, idx.lower + N);
  }

 private:
  UpaConfig cfg_{};
  Eigen::MatrixXd h_prefix_;
  Eigen::MatrixXd v_prefix_;
};

AdjacentDiffs adjacent_phase_diffs(const PilotField& field);

PhaseSumSet build_phase_sums(const AdjacentDiffs& diffs);

double lookup_sum(const PhaseSumSet& sums, const SumIndex& idx);

/// Number of summed phase-differences along one axis (Q) and of distinct
/// three-equation systems (N_sys), as exact decimal strings for arbitrary N.
struct SystemCount {
  std::string q;
  std::string n_sys;
};

SystemCount count_systems(int half_size);

/// Total number of residuals in the all-data least-squares problem (2Q).
std::int64_t residual_count(int half_size);

namespace detail {

// Squared distance from the parameterized user to element (n, m):
// A + d^2 (n^2 + m^2) - 2 B n d - 2 C m d.
template <typename Scalar>
Scalar element_radicand(const Abc<Scalar>& e, int n, int m, Scalar d) {
  const Scalar sn = Scalar(n);
  const Scalar sm = Scalar(m);
  return e.A + d * d * (sn * sn + sm * sm) - Scalar(2) * e.B * sn * d - Scalar(2) * e.C * sm * d;
}

// Endpoints (n, m) of a baseline.
inline void endpoints(const SumIndex& idx, int& nl, int& ml, int& nu, int& mu) {
  if (idx.axis == Axis::Horizontal) {
    nl = idx.lower, nu = idx.upper, ml = mu = idx.fixed;
  } else {
    ml = idx.lower, mu = idx.upper, nl = nu = idx.fixed;
  }
}

}  // namespace detail

/// Noiseless summed phase-difference predicted by (A, B, C):
/// -(2 pi / lambda) (rho_upper - rho_lower). The distance difference is formed
/// as (rad_u - rad_l) / (rho_u + rho_l) so the large common A term cancels
/// analytically.
template <typename Scalar>
Scalar model_sum(const Abc<Scalar>& e, const SumIndex& idx, const Upa<Scalar>& cfg) {
  using std::sqrt;
  int nl, ml, nu, mu;
  detail::endpoints(idx, nl, ml, nu, mu);
  const Scalar d = cfg.spacing;
  const Scalar rad_l = detail::element_radicand(e, nl, ml, d);
  const Scalar rad_u = detail::element_radicand(e, nu, mu, d);
  if (rad_l < Scalar(0) || rad_u < Scalar(0))
    throw Error(ErrorCode::InfeasibleParameter, "negative radicand in model sum");
  const Scalar rho_sum = sqrt(rad_u) + sqrt(rad_l);
  if (!(rho_sum > Scalar(0))) throw Error(ErrorCode::InfeasibleParameter, "user on an array element");
  // rad_u - rad_l without A.
  const Scalar a = Scalar(idx.lower), b = Scalar(idx.upper);
  const Scalar lin = idx.axis == Axis::Horizontal ? e.B : e.C;
  const Scalar delta = d * d * (b * b - a * a) - Scalar(2) * lin * d * (b - a);
  const Scalar k = Scalar(2) * std::numbers::pi_v<Scalar> / cfg.wavelength;
  return -k * delta / rho_sum;
}

/// Analytic gradient of `model_sum` with respect to (A, B, C).
template <typename Scalar>
Vec3<Scalar> model_sum_gradient(const Abc<Scalar>& e, const SumIndex& idx, const Upa<Scalar>& cfg) {
  using std::sqrt;
  int nl, ml, nu, mu;
  detail::endpoints(idx, nl, ml, nu, mu);
  const Scalar d = cfg.spacing;
  const Scalar rad_l = detail::element_radicand(e, nl, ml, d);
  const Scalar rad_u = detail::element_radicand(e, nu, mu, d);
  if (!(rad_l > Scalar(0)) || !(rad_u > Scalar(0)))
    throw Error(ErrorCode::InfeasibleParameter, "non-positive radicand in model gradient");
  const Scalar inv_l = Scalar(1) / sqrt(rad_l);
  const Scalar inv_u = Scalar(1) / sqrt(rad_u);
  const Scalar k = Scalar(2) * std::numbers::pi_v<Scalar> / cfg.wavelength;
  // d rho / dA = 1 / (2 rho), d rho / dB = -n d / rho, d rho / dC = -m d / rho
  return {-k * Scalar(0.5) * (inv_u - inv_l),
          k * d * (Scalar(nu) * inv_u - Scalar(nl) * inv_l),
          k * d * (Scalar(mu) * inv_u - Scalar(ml) * inv_l)};
}

}  // namespace nfloc

#endif  // NFLOC_PHASE_HPP
