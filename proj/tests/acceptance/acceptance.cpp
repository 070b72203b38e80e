// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include <unistd.h>

#include "nfloc/crb.hpp"
#include "nfloc/estimators.hpp"
#include "nfloc/harness.hpp"
#include "nfloc/phase.hpp"
#include "oracles.hpp"

using namespace nfloc;
using oracle::kPi;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

PhaseSumSet noiseless_sums(const SphericalPosition& p, const UpaConfig& cfg) {
  return build_phase_sums(adjacent_phase_diffs(oracle::noiseless_field(p, cfg)));
}

double abc_error(const AbcEstimate& est, const AbcEstimate& truth) {
  const double r = std::sqrt(truth.A);
  return std::max({std::abs(est.A - truth.A) / truth.A, std::abs(est.B - truth.B) / r,
                   std::abs(est.C - truth.C) / r});
}

Scenario study_scenario(const char* name) {
  return load_scenario(std::string(NFLOC_SOURCE_DIR) + "/tools/scenarios/" + name);
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

Outcome noiseless_grid() {
  const auto t0 = Clock::now();
  const UpaConfig cfg = oracle::study_array();
  double worst_cf = 0.0, worst_ls = 0.0;
  int cells = 0;
  for (double r : {2.0, 5.0, 10.0, 40.0})
    for (double theta : {kPi / 6, kPi / 3, kPi / 2, 2 * kPi / 3})
      for (double phi : {kPi / 6, kPi / 4, kPi / 2, 3 * kPi / 4}) {
        const SphericalPosition p{r, theta, phi};
        const AbcEstimate truth = abc_from_spherical(p);
        const PhaseSumSet sums = noiseless_sums(p, cfg);
        const AbcEstimate cf = closed_form_estimate(extract_center_sums(sums), cfg);
        const EstimateReport ls = least_squares_estimate(sums, cf);
        worst_cf = std::max(worst_cf, abc_error(cf, truth));
        worst_ls = std::max(worst_ls, abc_error(ls.abc, truth));
        ++cells;
      }
  const double elapsed = seconds_since(t0);
  return {cells == 64 && worst_cf <= 1e-6 && worst_ls <= 1e-8 && elapsed <= 10.0,
          std::to_string(cells) + " users, closed form max rel err " + fmt("%.3g", worst_cf) +
              " (<= 1e-6), LS " + fmt("%.3g", worst_ls) + " (<= 1e-8), " + fmt("%.2f", elapsed) + " s (<= 10 s)"};
}

Outcome telescoping() {
  const UpaConfig cfg = oracle::study_array();
  const int N = cfg.half_size;
  double worst = 0.0;
  long count = 0;
  for (const SphericalPosition& p : {oracle::study_user(), oracle::study_user(40.0)}) {
    const PhaseSumSet sums = noiseless_sums(p, cfg);
    long per_user = 0;
    for (int f = -N; f <= N; ++f)
      for (int lo = -N; lo <= N; ++lo)
        for (int hi = lo + 1; hi <= N; ++hi) {
          worst = std::max(worst, std::abs(lookup_sum(sums, {Axis::Horizontal, lo, hi, f}) -
                                           oracle::baseline_phase(p, lo, f, hi, f, cfg)));
          worst = std::max(worst, std::abs(lookup_sum(sums, {Axis::Vertical, lo, hi, f}) -
                                           oracle::baseline_phase(p, f, lo, f, hi, cfg)));
          per_user += 2;
        }
    if (per_user != residual_count(N)) return {false, "sum count " + std::to_string(per_user) + " != 2Q"};
    count += per_user;
  }
  return {worst <= 1e-10, std::to_string(count / 2) + " sums per user at r = 5 m and 40 m, max |err| " +
                              fmt("%.3g", worst) + " rad (<= 1e-10)"};
}

Outcome crb_tracking() {
  const auto t0 = Clock::now();
  bool ok = true;
  std::string detail;
  for (const char* name : {"near_field.json", "far_field.json"}) {
    const Scenario s = study_scenario(name);
    const MonteCarloResult mc = run_monte_carlo(s, LsSettings{});
    const RmseRow& ls = mc.least_squares;
    const double fr = ls.rmse_r / ls.sqrt_crb_r;
    const double ft = ls.rmse_theta / ls.sqrt_crb_theta;
    const double fp = ls.rmse_phi / ls.sqrt_crb_phi;
    ok = ok && s.trials == 200 && ls.failure_count == 0 && fr <= 1.5 && ft <= 1.5 && fp <= 1.5;
    detail += "r=" + fmt("%g", s.user.r) + " m: RMSE/sqrtCRB (r " + fmt("%.3f", fr) + ", theta " +
              fmt("%.3f", ft) + ", phi " + fmt("%.3f", fp) + "); ";
  }
  const double elapsed = seconds_since(t0);
  ok = ok && elapsed <= 300.0;
  return {ok, detail + "limit 1.5, " + fmt("%.1f", elapsed) + " s (<= 300 s)"};
}

Outcome monotone_k() {
  const Scenario s = study_scenario("near_field.json");
  const SweepResult sweep = sweep_k(s, {5, 20, 100}, LsSettings{});
  double med[3];
  for (int i = 0; i < 3; ++i) {
    std::vector<TrialRecord> block(sweep.records.begin() + i * s.trials, sweep.records.begin() + (i + 1) * s.trials);
    med[i] = median_abs_range_error(block, Estimator::LeastSquares);
  }
  return {med[0] > med[1] && med[1] > med[2], "median |r err| at K=5,20,100: " + fmt("%.4g", med[0]) + ", " +
                                                  fmt("%.4g", med[1]) + ", " + fmt("%.4g", med[2]) + " m"};
}

Outcome monotone_n() {
  const Scenario s = study_scenario("near_field.json");
  const SweepResult sweep = sweep_n(s, {2, 5, 10}, LsSettings{});
  const RmseRow* ls[3] = {&sweep.rows[1], &sweep.rows[3], &sweep.rows[5]};
  bool ok = true;
  std::string detail;
  for (int i = 0; i < 3; ++i) {
    if (i > 0)
      ok = ok && ls[i]->rmse_r < ls[i - 1]->rmse_r && ls[i]->rmse_theta < ls[i - 1]->rmse_theta &&
           ls[i]->rmse_phi < ls[i - 1]->rmse_phi;
    detail += "N=" + fmt("%g", ls[i]->sweep_value) + " (" + fmt("%.3g", ls[i]->rmse_r) + " m, " +
              fmt("%.3g", ls[i]->rmse_theta) + ", " + fmt("%.3g", ls[i]->rmse_phi) + " rad) ";
  }
  return {ok, "LS RMSE " + detail};
}

Outcome combinatorics() {
  const SystemCount c0 = count_systems(0), c1 = count_systems(1), c10 = count_systems(10);
  const auto small = oracle::pascal(21, 2);
  const unsigned __int128 q = 21 * small[21][2];
  const auto big = oracle::pascal(static_cast<int>(q), 3);
  const std::string expected = oracle::to_decimal(2 * big[q][3] + 2 * big[q][2] * q);
  const bool ok = c0.q == "0" && c0.n_sys == "0" && c1.q == "9" && c1.n_sys == "816" &&
                  c10.q == oracle::to_decimal(q) && c10.n_sys == expected;
  return {ok, "N=0 (" + c0.q + ", " + c0.n_sys + "), N=1 (" + c1.q + ", " + c1.n_sys + "), N=10 (" + c10.q + ", " +
                  c10.n_sys + ") vs reference " + expected};
}

Outcome jacobians() {
  const UpaConfig cfg = oracle::study_array();
  const ChannelGains iso = ChannelGains::isotropic(cfg.wavelength);
  const PhaseSumSet sums = build_phase_sums(adjacent_phase_diffs(
      simulate_pilot_field(oracle::study_user(), cfg, iso, oracle::study_radio(), 11)));
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> r_dist(0.5, 50.0), ang(0.1, kPi - 0.1);
  double worst_ls = 0.0, worst_ch = 0.0;
  for (int i = 0; i < 100; ++i) {
    const SphericalPosition p{r_dist(rng), ang(rng), ang(rng)};

    const AbcEstimate e = abc_from_spherical(p);
    const Eigen::Vector3d x = e.vector();
    const Eigen::Vector3d step = 1e-6 * x.cwiseAbs().cwiseMax(Eigen::Vector3d::Constant(1e-3 * p.r));
    const Eigen::MatrixX3d fd_ls = oracle::central_jacobian(
        [&](const Eigen::Vector3d& v) { return Eigen::VectorXd(ls_residuals(AbcEstimate::from_vector(v), sums)); },
        x, step);
    const Eigen::MatrixX3d an_ls = ls_jacobian(e, sums);

    const Eigen::MatrixX3cd fd_ch = oracle::central_jacobian(
        [&](const Eigen::Vector3d& v) {
          return Eigen::VectorXcd(oracle::noiseless_field(SphericalPosition{v(0), v(1), v(2)}, cfg).values().reshaped());
        },
        Eigen::Vector3d(p.r, p.theta, p.phi), Eigen::Vector3d(1e-7, 1e-5, 1e-5));
    const Eigen::MatrixX3cd an_ch = channel_jacobian(p, cfg, iso);

    for (int c = 0; c < 3; ++c) {
      worst_ls = std::max(worst_ls, (an_ls.col(c) - fd_ls.col(c)).norm() / fd_ls.col(c).norm());
      worst_ch = std::max(worst_ch, (an_ch.col(c) - fd_ch.col(c)).norm() / fd_ch.col(c).norm());
    }
  }
  return {worst_ls <= 1e-5 && worst_ch <= 1e-5, "100 points, model-sum max rel " + fmt("%.3g", worst_ls) +
                                                   ", channel max rel " + fmt("%.3g", worst_ch) + " (<= 1e-5)"};
}

Outcome scaling() {
  const Scenario s = study_scenario("near_field.json");
  const Complex c = std::polar(1000.0, 2.1);
  double worst = 0.0;
  const auto rel = [](double a, double b) { return a == b ? 0.0 : std::abs(a - b) / std::abs(b); };
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const PilotField field = simulate_pilot_field(s.user, s.cfg, s.gains, s.radio, seed);
    const PipelineReport a = estimate_pipeline(field);
    const PipelineReport b = estimate_pipeline(field.scaled(c));
    const auto compare = [&](const EstimateReport& x, const EstimateReport& y) {
      for (auto [u, v] : {std::pair{x.abc.A, y.abc.A}, {x.abc.B, y.abc.B}, {x.abc.C, y.abc.C},
                          {x.spherical.r, y.spherical.r}, {x.spherical.theta, y.spherical.theta},
                          {x.spherical.phi, y.spherical.phi}})
        worst = std::max(worst, rel(v, u));
    };
    compare(a.refined, b.refined);
    if (a.closed_form.has_value() != b.closed_form.has_value()) return {false, "closed form availability changed"};
    if (a.closed_form) compare(*a.closed_form, *b.closed_form);
  }
  return {worst <= 1e-12, "20 noisy fields x 1000 e^{j2.1}, max rel change " + fmt("%.3g", worst) + " (<= 1e-12)"};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome reproducible_cli() {
  const auto dir = std::filesystem::temp_directory_path() / ("nfloc_accept_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  const std::string cfg = std::string(NFLOC_SOURCE_DIR) + "/tools/scenarios/near_field.json";
  const std::string runs[] = {
      "mc --config " + cfg + " --trials 40 --seed 99 --threads 1",
      "mc --config " + cfg + " --trials 40 --seed 99 --threads 3",
      "sweep-k --config " + cfg + " --values 5,50 --trials 20 --seed 4",
  };
  bool ok = true;
  int compared = 0;
  for (int i = 0; i < 3; ++i) {
    std::string first;
    for (int rep = 0; rep < 2; ++rep) {
      const auto out = dir / ("run" + std::to_string(i) + "_" + std::to_string(rep) + ".csv");
      const auto trials = dir / ("trials" + std::to_string(i) + "_" + std::to_string(rep) + ".csv");
      const std::string cmd = std::string(NFLOC_CLI_PATH) + " " + runs[i] + " --out " + out.string() +
                              " --trials-out " + trials.string() + " 2>/dev/null";
      if (std::system(cmd.c_str()) != 0) return {false, "command failed: " + cmd};
      const std::string body = slurp(out) + slurp(trials);
      if (body.empty()) return {false, "empty output from: " + cmd};
      if (rep == 0) first = body;
      else ok = ok && body == first, ++compared;
    }
  }
  // Thread count must not change the bytes either.
  ok = ok && slurp(dir / "run0_0.csv") == slurp(dir / "run1_0.csv");
  std::filesystem::remove_all(dir);
  return {ok, std::to_string(compared) + " repeated invocations plus 1 vs 3 threads, summary and trial CSVs byte-identical"};
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"noiseless oracle equivalence", noiseless_grid},
      {"telescoping identity", telescoping},
      {"CRB tracking", crb_tracking},
      {"monotonicity in K", monotone_k},
      {"monotonicity in N", monotone_n},
      {"combinatorics", combinatorics},
      {"Jacobian checks", jacobians},
      {"scaling invariance", scaling},
      {"CLI reproducibility", reproducible_cli},
  };
  int failures = 0;
  int index = 1;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::cout << "criterion " << index++ << " [" << name << "]: " << (o.pass ? "PASS" : "FAIL") << " : " << o.detail
              << std::endl;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
