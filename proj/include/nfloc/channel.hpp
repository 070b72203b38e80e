#ifndef NFLOC_CHANNEL_HPP
#define NFLOC_CHANNEL_HPP

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <functional>
#include <vector>

#include "nfloc/geometry.hpp"
#include "nfloc/random.hpp"

namespace nfloc {

using Complex = std::complex<double>;

/// Effective-aperture (G1) and polarization (G2) gains as functions of user and
/// element position. Estimators never see these; only the simulator and the bound do.
struct ChannelGains {
  using GainFn = std::function<double(const CartesianPosition& user, const CartesianPosition& element)>;

  GainFn g1;
  GainFn g2;
  // True when neither gain varies with position, so the bound's Jacobian can
  // treat sqrt(G1 G2) as a constant.
  bool position_independent = true;

  static ChannelGains constant(double g1, double g2);
  // G1 = 1, G2 = lambda^2 / (4 pi).
  static ChannelGains isotropic(double wavelength);

  double amplitude(const CartesianPosition& user, const CartesianPosition& element) const;
};

struct RadioConfig {
  double transmit_power = 0.0;  // P [W]
  double noise_power = 0.0;     // sigma^2 [W]
  int pilot_count = 1;          // K

  void validate() const;
};

double dbm_to_watts(double dbm);

/// Pilot observations y_{n,m} over the (2N+1)x(2N+1) grid.
class PilotField {
 public:
  PilotField() = default;
  PilotField(const UpaConfig& cfg, Eigen::MatrixXcd values);
  explicit PilotField(const UpaConfig& cfg);

  const UpaConfig& config() const { return cfg_; }
  int half_size() const { return cfg_.half_size; }

  Complex operator()(int n, int m) const { return values_(n + cfg_.half_size, m + cfg_.half_size); }
  Complex& operator()(int n, int m) { return values_(n + cfg_.half_size, m + cfg_.half_size); }

  // Row index is n + N, column index is m + N.
  const Eigen::MatrixXcd& values() const { return values_; }

  PilotField scaled(Complex factor) const;

 private:
  UpaConfig cfg_{};
  Eigen::MatrixXcd values_;
};

Complex channel_coefficient(const SphericalPosition& p, int n, int m, const UpaConfig& cfg,
                            const ChannelGains& gains);

/// Noiseless channel over the full grid.
PilotField channel_field(const SphericalPosition& p, const UpaConfig& cfg, const ChannelGains& gains);

/// Averaged observations sqrt(P) h + w with w ~ CN(0, sigma^2 / K), drawn in
/// one shot. Deterministic for a given generator state.
PilotField simulate_pilot_field(const SphericalPosition& p, const UpaConfig& cfg,
                                const ChannelGains& gains, const RadioConfig& radio, Rng& rng);
PilotField simulate_pilot_field(const SphericalPosition& p, const UpaConfig& cfg,
                                const ChannelGains& gains, const RadioConfig& radio,
                                std::uint64_t seed);

/// The K per-pilot observations sqrt(P) h + w_k, w_k ~ CN(0, sigma^2).
std::vector<PilotField> simulate_pilot_block(const SphericalPosition& p, const UpaConfig& cfg,
                                             const ChannelGains& gains, const RadioConfig& radio,
                                             Rng& rng);

PilotField average_pilots(const std::vector<PilotField>& block);

}  // namespace nfloc

#endif  // NFLOC_CHANNEL_HPP
