#ifndef NFLOC_CRB_HPP
#define NFLOC_CRB_HPP

#include <Eigen/Dense>

#include "nfloc/channel.hpp"
#include "nfloc/geometry.hpp"

namespace nfloc {

/// Fisher information for (r, theta, phi), in that order.
using FisherMatrix = Eigen::Matrix3d;

struct CrbResult {
  double var_r = 0.0;
  double var_theta = 0.0;
  double var_phi = 0.0;
  double sqrt_crb_r = 0.0;

  double sqrt_crb_theta() const;
  double sqrt_crb_phi() const;
};

/// d h_{n,m} / d(r, theta, phi). Row (m + N) * (2N + 1) + (n + N), i.e. the
/// column-major order of the pilot field.
Eigen::MatrixX3cd channel_jacobian(const SphericalPosition& p, const UpaConfig& cfg,
                                   const ChannelGains& gains);

/// How the common complex gain of the channel enters the bound.
enum class GainModel {
  // sqrt(G1 G2) and the carrier reference known exactly: absolute amplitude and
  // phase both carry range information.
  Known,
  // One unknown complex factor multiplies every h_{n,m}; its log-amplitude and
  // phase are nuisance parameters eliminated by a Schur complement. This is the
  // information available to any estimator that ignores gains and global phase.
  UnknownCommon,
};

/// Deterministic complex mean in white circular Gaussian noise with K
/// independent pilots: (2 K P / sigma^2) Re{J^H J}, with J the Jacobian of the
/// channel over every element (rows) and parameter (columns).
Eigen::MatrixXd fisher_information_full(const Eigen::MatrixXcd& jacobian, const RadioConfig& radio);

/// Fisher information for (r, theta, phi); `channel` is the noiseless h over
/// the grid in the same row order as `jacobian`, used for the nuisance columns.
FisherMatrix fisher_information(const Eigen::MatrixX3cd& jacobian, const Eigen::VectorXcd& channel,
                                const RadioConfig& radio, GainModel model = GainModel::UnknownCommon);
FisherMatrix fisher_information(const SphericalPosition& p, const UpaConfig& cfg,
                                const ChannelGains& gains, const RadioConfig& radio,
                                GainModel model = GainModel::UnknownCommon);

/// Diagonal of the inverse Fisher matrix. Throws DegenerateGeometry when the
/// diagonally normalized matrix has condition number above 1e12.
CrbResult crb_from_fisher(const FisherMatrix& fim);
CrbResult crb_diag(const SphericalPosition& p, const UpaConfig& cfg, const ChannelGains& gains,
                   const RadioConfig& radio, GainModel model = GainModel::UnknownCommon);

}  // namespace nfloc

#endif  // NFLOC_CRB_HPP
