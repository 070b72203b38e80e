#include "nfloc/channel.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <utility>

namespace nfloc {

namespace {

constexpr double kPi = std::numbers::pi;

void add_complex_noise(Eigen::MatrixXcd& values, double variance, Rng& rng) {
  if (variance <= 0.0) return;
  std::normal_distribution<double> normal(0.0, std::sqrt(variance / 2.0));
  // Column-major fill order is part of the reproducibility contract.
  for (Eigen::Index j = 0; j < values.cols(); ++j)
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
      const double re = normal(rng);
      const double im = normal(rng);
      values(i, j) += Complex(re, im);
    }
}

}  // namespace

ChannelGains ChannelGains::constant(double g1, double g2) {
  if (!(g1 >= 0.0) || !(g2 >= 0.0)) throw Error(ErrorCode::Config, "gains must be non-negative");
  ChannelGains gains;
  gains.g1 = [g1](const CartesianPosition&, const CartesianPosition&) { return g1; };
  gains.g2 = [g2](const CartesianPosition&, const CartesianPosition&) { return g2; };
  gains.position_independent = true;
  return gains;
}

ChannelGains ChannelGains::isotropic(double wavelength) {
  return constant(1.0, wavelength * wavelength / (4.0 * kPi));
}

double ChannelGains::amplitude(const CartesianPosition& user, const CartesianPosition& element) const {
  const double a = g1(user, element);
  const double b = g2(user, element);
  if (a < 0.0 || b < 0.0) throw Error(ErrorCode::Domain, "negative channel gain");
  return std::sqrt(a * b);
}

void RadioConfig::validate() const {
  if (!(transmit_power > 0.0)) throw Error(ErrorCode::Config, "transmit power must be > 0");
  if (!(noise_power >= 0.0)) throw Error(ErrorCode::Config, "noise power must be >= 0");
  if (pilot_count < 1) throw Error(ErrorCode::Config, "pilot count must be >= 1");
}

double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

PilotField::PilotField(const UpaConfig& cfg, Eigen::MatrixXcd values) : cfg_(cfg), values_(std::move(values)) {
  if (values_.rows() != cfg_.side() || values_.cols() != cfg_.side())
    throw Error(ErrorCode::Domain, "pilot field shape does not match the array");
  if (!values_.allFinite()) throw Error(ErrorCode::Domain, "pilot field has non-finite entries");
}

PilotField::PilotField(const UpaConfig& cfg)
    : cfg_(cfg), values_(Eigen::MatrixXcd::Zero(cfg.side(), cfg.side())) {}

PilotField PilotField::scaled(Complex factor) const { return PilotField(cfg_, values_ * factor); }

Complex channel_coefficient(const SphericalPosition& p, int n, int m, const UpaConfig& cfg,
                            const ChannelGains& gains) {
  const double dist = exact_distance(p, n, m, cfg);
  if (!(dist > 0.0)) throw Error(ErrorCode::Domain, "user coincides with an array element");
  const double amp =
      gains.amplitude(spherical_to_cartesian(p), antenna_position(n, m, cfg)) / (4.0 * kPi * dist);
  return std::polar(amp, -2.0 * kPi / cfg.wavelength * dist);
}

PilotField channel_field(const SphericalPosition& p, const UpaConfig& cfg, const ChannelGains& gains) {
  PilotField field(cfg);
  const int N = cfg.half_size;
  for (int n = -N; n <= N; ++n)
    for (int m = -N; m <= N; ++m) field(n, m) = channel_coefficient(p, n, m, cfg, gains);
  return field;
}

PilotField simulate_pilot_field(const SphericalPosition& p, const UpaConfig& cfg,
                                const ChannelGains& gains, const RadioConfig& radio, Rng& rng) {
  radio.validate();
  Eigen::MatrixXcd values = channel_field(p, cfg, gains).values() * std::sqrt(radio.transmit_power);
  add_complex_noise(values, radio.noise_power / radio.pilot_count, rng);
  return PilotField(cfg, std::move(values));
}

PilotField simulate_pilot_field(const SphericalPosition& p, const UpaConfig& cfg,
                                const ChannelGains& gains, const RadioConfig& radio,
                                std::uint64_t seed) {
  Rng rng = substream(seed, 0);
  return simulate_pilot_field(p, cfg, gains, radio, rng);
}

std::vector<PilotField> simulate_pilot_block(const SphericalPosition& p, const UpaConfig& cfg,
                                             const ChannelGains& gains, const RadioConfig& radio,
                                             Rng& rng) {
  radio.validate();
  const Eigen::MatrixXcd clean = channel_field(p, cfg, gains).values() * std::sqrt(radio.transmit_power);
  std::vector<PilotField> block;
  block.reserve(radio.pilot_count);
  for (int k = 0; k < radio.pilot_count; ++k) {
    Eigen::MatrixXcd values = clean;
    add_complex_noise(values, radio.noise_power, rng);
    block.emplace_back(cfg, std::move(values));
  }
  return block;
}

PilotField average_pilots(const std::vector<PilotField>& block) {
  if (block.empty()) throw Error(ErrorCode::Domain, "empty pilot block");
  Eigen::MatrixXcd sum = block.front().values();
  for (std::size_t k = 1; k < block.size(); ++k) {
    if (block[k].half_size() != block.front().half_size())
      throw Error(ErrorCode::Domain, "pilot block fields differ in shape");
    sum += block[k].values();
  }
  return PilotField(block.front().config(), sum / static_cast<double>(block.size()));
}

}  // namespace nfloc
