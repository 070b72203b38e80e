#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "nfloc/channel.hpp"
#include "oracles.hpp"

using namespace nfloc;
using Catch::Approx;
using oracle::kPi;

TEST_CASE("dBm conversion") {
  CHECK(dbm_to_watts(30.0) == Approx(1.0));
  CHECK(dbm_to_watts(23.0) == Approx(0.19952623149688797));
  CHECK(dbm_to_watts(-114.0) == Approx(3.981071705534969e-15));
}

TEST_CASE("channel_coefficient magnitude and phase") {
  const UpaConfig cfg = oracle::study_array();
  const ChannelGains iso = ChannelGains::isotropic(cfg.wavelength);

  // Center element, r = 5 m: lambda / (2 sqrt(pi) 4 pi r), frozen from numpy.
  const Complex h = channel_coefficient(oracle::study_user(), 0, 0, cfg, iso);
  CHECK(std::abs(h) == Approx(4.4896780531291644e-05).epsilon(1e-13));

  // One full wavelength from the center element.
  const Complex one_lambda = channel_coefficient(SphericalPosition{cfg.wavelength, 0.4, 1.2}, 0, 0, cfg, iso);
  CHECK(std::abs(std::arg(one_lambda)) < 1e-12);

  const SphericalPosition bore{3.0, kPi / 2, kPi / 2};
  for (int n = -10; n <= 10; n += 2)
    for (int m = -10; m <= 10; m += 5)
      CHECK(std::abs(channel_coefficient(bore, n, m, cfg, iso)) ==
            Approx(std::abs(channel_coefficient(bore, -n, -m, cfg, iso))).epsilon(1e-14));

  const ChannelGains scaled = ChannelGains::constant(4.0, cfg.wavelength * cfg.wavelength / (4.0 * kPi));
  CHECK(std::abs(channel_coefficient(bore, 2, 3, cfg, scaled)) ==
        Approx(2.0 * std::abs(channel_coefficient(bore, 2, 3, cfg, iso))));
}

TEST_CASE("channel_coefficient rejects a user on an element") {
  const UpaConfig cfg{2, 0.5, 1.0};
  // Element (1, 0) at [0.5, 0, 0]; user on the x-axis at r = 0.5.
  const SphericalPosition on_element{0.5, 0.0, kPi / 2};
  CHECK_THROWS_AS(channel_coefficient(on_element, 1, 0, cfg, ChannelGains::isotropic(1.0)), Error);
  CHECK_THROWS_AS(ChannelGains::constant(-1.0, 1.0), Error);
}

TEST_CASE("noiseless simulation is sqrt(P) h exactly") {
  const UpaConfig cfg = oracle::study_array(4);
  RadioConfig radio = oracle::study_radio();
  radio.noise_power = 0.0;
  const ChannelGains iso = ChannelGains::isotropic(cfg.wavelength);
  const PilotField y = simulate_pilot_field(oracle::study_user(), cfg, iso, radio, 99);
  const PilotField h = channel_field(oracle::study_user(), cfg, iso);
  for (int n = -4; n <= 4; ++n)
    for (int m = -4; m <= 4; ++m) REQUIRE(y(n, m) == std::sqrt(radio.transmit_power) * h(n, m));
}

TEST_CASE("simulation is deterministic given the seed") {
  const UpaConfig cfg = oracle::study_array(5);
  const ChannelGains iso = ChannelGains::isotropic(cfg.wavelength);
  const auto a = simulate_pilot_field(oracle::study_user(), cfg, iso, oracle::study_radio(), 1234);
  const auto b = simulate_pilot_field(oracle::study_user(), cfg, iso, oracle::study_radio(), 1234);
  const auto c = simulate_pilot_field(oracle::study_user(), cfg, iso, oracle::study_radio(), 1235);
  CHECK(a.values() == b.values());
  CHECK(a.values() != c.values());

  Rng s0 = substream(42, 0), s1 = substream(42, 1), s0b = substream(42, 0);
  CHECK(s0() == s0b());
  CHECK(s0() != s1());
}

TEST_CASE("averaged noise has variance sigma^2 / K") {
  const UpaConfig cfg{0, 0.005, 0.01};
  const ChannelGains iso = ChannelGains::isotropic(cfg.wavelength);
  const RadioConfig radio{1.0, 2.0, 8};
  const SphericalPosition p{5.0, 1.0, 1.0};
  const Complex clean = channel_field(p, cfg, iso)(0, 0);
  Rng rng = substream(5, 0);
  constexpr int kDraws = 100000;
  double sum_sq = 0.0;
  for (int i = 0; i < kDraws; ++i) sum_sq += std::norm(simulate_pilot_field(p, cfg, iso, radio, rng)(0, 0) - clean);
  CHECK(sum_sq / kDraws == Approx(radio.noise_power / radio.pilot_count).epsilon(0.03));
}

TEST_CASE("single draw at sigma^2/K matches averaging K per-pilot draws") {
  const UpaConfig cfg{2, 0.005, 0.01};
  const ChannelGains iso = ChannelGains::isotropic(cfg.wavelength);
  const RadioConfig radio{1.0, 1.0, 5};
  const SphericalPosition p{5.0, 1.0, 1.0};
  const PilotField clean = channel_field(p, cfg, iso);

  struct Moments {
    double mean_re = 0, mean_im = 0, var_re = 0, var_im = 0, cross = 0;
  };
  const auto moments = [&](auto&& draw, std::uint64_t seed) {
    Rng rng = substream(seed, 0);
    Moments mo;
    int count = 0;
    while (count < 100000) {
      const PilotField f = draw(rng);
      for (int n = -2; n <= 2; ++n)
        for (int m = -2; m <= 2; ++m, ++count) {
          const Complex w = f(n, m) - clean(n, m);
          mo.mean_re += w.real();
          mo.mean_im += w.imag();
          mo.var_re += w.real() * w.real();
          mo.var_im += w.imag() * w.imag();
          mo.cross += w.real() * w.imag();
        }
    }
    mo.mean_re /= count, mo.mean_im /= count, mo.var_re /= count, mo.var_im /= count, mo.cross /= count;
    return mo;
  };
  const Moments direct = moments([&](Rng& r) { return simulate_pilot_field(p, cfg, iso, radio, r); }, 1);
  const Moments averaged =
      moments([&](Rng& r) { return average_pilots(simulate_pilot_block(p, cfg, iso, radio, r)); }, 2);

  const double half_var = radio.noise_power / radio.pilot_count / 2.0;
  const double se_mean = std::sqrt(half_var / 100000.0);
  for (const Moments& mo : {direct, averaged}) {
    CHECK(std::abs(mo.mean_re) < 5 * se_mean);
    CHECK(std::abs(mo.mean_im) < 5 * se_mean);
    CHECK(mo.var_re == Approx(half_var).epsilon(0.03));
    CHECK(mo.var_im == Approx(half_var).epsilon(0.03));
    CHECK(std::abs(mo.cross) < 0.03 * half_var);
  }
  CHECK(direct.var_re + direct.var_im == Approx(averaged.var_re + averaged.var_im).epsilon(0.04));
}

TEST_CASE("PilotField construction checks") {
  const UpaConfig cfg{1, 0.005, 0.01};
  CHECK_THROWS_AS(PilotField(cfg, Eigen::MatrixXcd::Ones(2, 3)), Error);
  Eigen::MatrixXcd bad = Eigen::MatrixXcd::Ones(3, 3);
  bad(1, 1) = Complex(std::nan(""), 0.0);
  CHECK_THROWS_AS(PilotField(cfg, bad), Error);
  CHECK_THROWS_AS(average_pilots({}), Error);
  CHECK_THROWS_AS((RadioConfig{1.0, 1.0, 0}.validate()), Error);
  CHECK_THROWS_AS((RadioConfig{0.0, 1.0, 1}.validate()), Error);
}
