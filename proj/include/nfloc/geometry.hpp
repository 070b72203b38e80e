#ifndef NFLOC_GEOMETRY_HPP
#define NFLOC_GEOMETRY_HPP

// Coordinate systems for a (2N+1)x(2N+1) uniform planar array in the Oxz
// plane, centered at the origin. Element (n, m) sits at [n d, 0, m d].

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "nfloc/errors.hpp"

namespace nfloc {

template <typename Scalar>
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;

template <typename Scalar>
struct Upa {
  int half_size = 0;  // N
  Scalar spacing{};   // d [m]
  Scalar wavelength{};  // lambda [m]

  int side() const { return 2 * half_size + 1; }
  Scalar aperture() const { return Scalar(2 * half_size) * spacing; }

  // Noiseless adjacent phase-differences stay inside [-pi, pi].
  bool wrap_free() const { return spacing <= wavelength / Scalar(2); }

  bool contains(int n, int m) const {
    return n >= -half_size && n <= half_size && m >= -half_size && m <= half_size;
  }

  void validate() const {
    if (half_size < 0) throw Error(ErrorCode::Config, "array half-size must be >= 0");
    if (!(spacing > Scalar(0))) throw Error(ErrorCode::Config, "element spacing must be > 0");
    if (!(wavelength > Scalar(0))) throw Error(ErrorCode::Config, "wavelength must be > 0");
  }
};

/// User position in spherical coordinates: range r, azimuth theta, zenith phi.
template <typename Scalar>
struct Spherical {
  Scalar r{};
  Scalar theta{};
  Scalar phi{};

  bool valid() const {
    constexpr Scalar pi = std::numbers::pi_v<Scalar>;
    return r > Scalar(0) && theta >= Scalar(0) && theta <= pi && phi >= Scalar(0) && phi <= pi;
  }
};

/// Transformed unknowns (A, B, C) = (r^2, r sin(phi) cos(theta), r cos(phi)) = (r^2, x, z).
template <typename Scalar>
struct Abc {
  Scalar A{};
  Scalar B{};
  Scalar C{};

  Vec3<Scalar> vector() const { return {A, B, C}; }
  static Abc from_vector(const Vec3<Scalar>& v) { return {v(0), v(1), v(2)}; }

  // Squared y-coordinate implied by the parameters; negative means infeasible.
  Scalar y_squared() const { return A - B * B - C * C; }
  bool feasible() const { return A > Scalar(0) && y_squared() >= Scalar(0); }
};

using UpaConfig = Upa<double>;
using SphericalPosition = Spherical<double>;
using CartesianPosition = Vec3<double>;
using AbcEstimate = Abc<double>;

template <typename Scalar>
Vec3<Scalar> antenna_position(int n, int m, const Upa<Scalar>& cfg) {
  if (!cfg.contains(n, m))
    throw Error(ErrorCode::Domain, "element index (" + std::to_string(n) + ", " +
                                       std::to_string(m) + ") outside the array");
  return {Scalar(n) * cfg.spacing, Scalar(0), Scalar(m) * cfg.spacing};
}

template <typename Scalar>
Vec3<Scalar> spherical_to_cartesian(const Spherical<Scalar>& p) {
  using std::cos;
  using std::sin;
  return {p.r * sin(p.phi) * cos(p.theta), p.r * sin(p.phi) * sin(p.theta), p.r * cos(p.phi)};
}

/// Exact user-to-element distance ||r - s_{n,m}|| under the spherical-wave model.
template <typename Scalar>
Scalar exact_distance(const Spherical<Scalar>& p, int n, int m, const Upa<Scalar>& cfg) {
  using std::cos;
  using std::sin;
  if (!cfg.contains(n, m)) throw Error(ErrorCode::Domain, "element index outside the array");
  const Scalar d = cfg.spacing;
  const Scalar sn = Scalar(n);
  const Scalar sm = Scalar(m);
  const Scalar radicand = p.r * p.r + d * d * (sn * sn + sm * sm) -
                          Scalar(2) * d * sn * p.r * sin(p.phi) * cos(p.theta) -
                          Scalar(2) * d * sm * p.r * cos(p.phi);
  if (radicand < Scalar(0)) throw Error(ErrorCode::Domain, "negative distance radicand");
  using std::sqrt;
  return sqrt(radicand);
}

template <typename Scalar>
Abc<Scalar> abc_from_spherical(const Spherical<Scalar>& p) {
  using std::cos;
  using std::sin;
  return {p.r * p.r, p.r * sin(p.phi) * cos(p.theta), p.r * cos(p.phi)};
}

template <typename Scalar>
struct SphericalRecovery {
  Spherical<Scalar> position;
  bool clamped_arccos = false;      // an arccos argument fell outside [-1, 1]
  bool azimuth_degenerate = false;  // A - C^2 <= 0: user on the z-axis
};

template <typename Scalar>
SphericalRecovery<Scalar> spherical_from_abc(const Abc<Scalar>& e) {
  using std::acos;
  using std::sqrt;
  if (!(e.A > Scalar(0))) throw Error(ErrorCode::Domain, "A must be positive");
  SphericalRecovery<Scalar> out;
  const auto clamped_acos = [&out](Scalar x) {
    if (x > Scalar(1) || x < Scalar(-1)) {
      out.clamped_arccos = true;
      x = std::clamp(x, Scalar(-1), Scalar(1));
    }
    return acos(x);
  };
  const Scalar r = sqrt(e.A);
  out.position.r = r;
  out.position.phi = clamped_acos(e.C / r);
  const Scalar transverse = e.A - e.C * e.C;
  if (transverse <= Scalar(0)) {
    out.azimuth_degenerate = true;
    out.position.theta = std::numbers::pi_v<Scalar> / Scalar(2);
  } else {
    out.position.theta = clamped_acos(e.B / sqrt(transverse));
  }
  return out;
}

template <typename Scalar>
struct CartesianRecovery {
  Vec3<Scalar> position;
  bool clamped_y = false;  // A - B^2 - C^2 < 0, y forced to 0
};

template <typename Scalar>
CartesianRecovery<Scalar> cartesian_from_abc(const Abc<Scalar>& e) {
  using std::sqrt;
  if (!(e.A > Scalar(0))) throw Error(ErrorCode::Domain, "A must be positive");
  const Scalar y2 = e.y_squared();
  CartesianRecovery<Scalar> out;
  out.clamped_y = y2 < Scalar(0);
  out.position = {e.B, sqrt(std::max(y2, Scalar(0))), e.C};
  return out;
}

}  // namespace nfloc

#endif  // NFLOC_GEOMETRY_HPP
