#include "nfloc/crb.hpp"

#include <cmath>
#include <numbers>

namespace nfloc {

namespace {

constexpr double kPi = std::numbers::pi;

double gain_amplitude(const ChannelGains& gains, const SphericalPosition& p, int n, int m,
                      const UpaConfig& cfg) {
  return gains.amplitude(spherical_to_cartesian(p), antenna_position(n, m, cfg));
}

}  // namespace

double CrbResult::sqrt_crb_theta() const { return std::sqrt(var_theta); }
double CrbResult::sqrt_crb_phi() const { return std::sqrt(var_phi); }

Eigen::MatrixX3cd channel_jacobian(const SphericalPosition& p, const UpaConfig& cfg,
                                   const ChannelGains& gains) {
  const int N = cfg.half_size;
  const int side = cfg.side();
  const double d = cfg.spacing;
  const double k = 2.0 * kPi / cfg.wavelength;
  const double st = std::sin(p.theta), ct = std::cos(p.theta);
  const double sp = std::sin(p.phi), cp = std::cos(p.phi);

  Eigen::MatrixX3cd jac(side * side, 3);
  for (int m = -N; m <= N; ++m)
    for (int n = -N; n <= N; ++n) {
      const double rho = exact_distance(p, n, m, cfg);
      if (!(rho > 0.0)) throw Error(ErrorCode::Domain, "user coincides with an array element");
      // Gradient of rho with respect to (r, theta, phi).
      const Eigen::Vector3d drho{(p.r - d * n * sp * ct - d * m * cp) / rho,
                                 d * n * p.r * sp * st / rho,
                                 (d * m * p.r * sp - d * n * p.r * cp * ct) / rho};
      const Complex carrier = std::polar(1.0, -k * rho);
      const double amp = gain_amplitude(gains, p, n, m, cfg);
      const Complex h = amp / (4.0 * kPi * rho) * carrier;
      const Complex dh_drho = h * Complex(-1.0 / rho, -k);
      Eigen::Vector3cd row = dh_drho * drho.cast<Complex>();

      if (!gains.position_independent) {
        // Gains supplied as opaque functions: differentiate their amplitude numerically.
        const double steps[3] = {1e-6 * p.r, 1e-6, 1e-6};
        for (int i = 0; i < 3; ++i) {
          SphericalPosition lo = p, hi = p;
          double* lo_c[3] = {&lo.r, &lo.theta, &lo.phi};
          double* hi_c[3] = {&hi.r, &hi.theta, &hi.phi};
          *lo_c[i] -= steps[i];
          *hi_c[i] += steps[i];
          const double da =
              (gain_amplitude(gains, hi, n, m, cfg) - gain_amplitude(gains, lo, n, m, cfg)) /
              (2.0 * steps[i]);
          row(i) += da / (4.0 * kPi * rho) * carrier;
        }
      }
      jac.row((m + N) * side + (n + N)) = row.transpose();
    }
  return jac;
}

Eigen::MatrixXd fisher_information_full(const Eigen::MatrixXcd& jacobian, const RadioConfig& radio) {
  radio.validate();
  if (!(radio.noise_power > 0.0))
    throw Error(ErrorCode::UnboundedInformation, "noise-free observations carry unbounded information");
  const double scale = 2.0 * radio.pilot_count * radio.transmit_power / radio.noise_power;
  const Eigen::MatrixXd fim = scale * (jacobian.adjoint() * jacobian).real();
  return 0.5 * (fim + fim.transpose());
}

FisherMatrix fisher_information(const Eigen::MatrixX3cd& jacobian, const Eigen::VectorXcd& channel,
                                const RadioConfig& radio, GainModel model) {
  if (model == GainModel::Known) return fisher_information_full(jacobian, radio);
  if (channel.size() != jacobian.rows())
    throw Error(ErrorCode::Domain, "channel and Jacobian disagree in length");
  // The nuisance columns h and jh span the complex line through h, so the Schur
  // complement equals the Gram matrix of J with that line projected out. Doing
  // the projection on the columns avoids subtracting two nearly equal Gram
  // entries (range information is mostly common phase).
  const double hh = channel.squaredNorm();
  if (!(hh > 0.0)) throw Error(ErrorCode::DegenerateGeometry, "channel vanishes");
  const Eigen::MatrixX3cd projected = jacobian - channel * ((channel.adjoint() * jacobian) / hh);
  return fisher_information_full(projected, radio);
}

FisherMatrix fisher_information(const SphericalPosition& p, const UpaConfig& cfg,
                                const ChannelGains& gains, const RadioConfig& radio, GainModel model) {
  return fisher_information(channel_jacobian(p, cfg, gains), channel_field(p, cfg, gains).values().reshaped(),
                            radio, model);
}

CrbResult crb_from_fisher(const FisherMatrix& fim) {
  const Eigen::Vector3d diag = fim.diagonal();
  if (!(diag.minCoeff() > 0.0) || !fim.allFinite())
    throw Error(ErrorCode::DegenerateGeometry, "Fisher information has a vanishing direction");
  const Eigen::Vector3d inv_sqrt = diag.cwiseSqrt().cwiseInverse();
  const Eigen::Matrix3d normalized = inv_sqrt.asDiagonal() * fim * inv_sqrt.asDiagonal();
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(normalized, Eigen::EigenvaluesOnly);
  const Eigen::Vector3d ev = eig.eigenvalues();
  if (!(ev(0) > 0.0) || ev(2) / ev(0) > 1e12)
    throw Error(ErrorCode::DegenerateGeometry, "Fisher information is ill-conditioned");

  const Eigen::Matrix3d inv_normalized = normalized.ldlt().solve(Eigen::Matrix3d::Identity());
  const Eigen::Matrix3d cov = inv_sqrt.asDiagonal() * inv_normalized * inv_sqrt.asDiagonal();
  CrbResult out;
  out.var_r = cov(0, 0);
  out.var_theta = cov(1, 1);
  out.var_phi = cov(2, 2);
  out.sqrt_crb_r = std::sqrt(out.var_r);
  return out;
}

CrbResult crb_diag(const SphericalPosition& p, const UpaConfig& cfg, const ChannelGains& gains,
                   const RadioConfig& radio, GainModel model) {
  return crb_from_fisher(fisher_information(p, cfg, gains, radio, model));
}

}  // namespace nfloc
