#ifndef NFLOC_HARNESS_HPP
#define NFLOC_HARNESS_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nfloc/channel.hpp"
#include "nfloc/crb.hpp"
#include "nfloc/estimators.hpp"
#include "nfloc/geometry.hpp"

namespace nfloc {

struct Scenario {
  UpaConfig cfg{10, 0.005, 0.01};
  RadioConfig radio{};
  ChannelGains gains = ChannelGains::isotropic(0.01);
  SphericalPosition user{5.0, 0.0, 0.0};
  int trials = 200;
  std::uint64_t master_seed = 1;

  void validate() const;
};

/// Parses a JSON scenario. Powers are given in dBm ("transmit_power_dbm",
/// "noise_power_dbm") or watts ("..._w"); lengths in meters; angles in radians.
Scenario scenario_from_json(const nlohmann::json& doc);
Scenario load_scenario(const std::string& path);

enum class Estimator { ClosedForm, LeastSquares };
const char* to_string(Estimator e);

struct RmseRow {
  double sweep_value = 0.0;
  Estimator estimator = Estimator::LeastSquares;
  double rmse_r = 0.0;
  double rmse_theta = 0.0;
  double rmse_phi = 0.0;
  double sqrt_crb_r = 0.0;
  double sqrt_crb_theta = 0.0;
  double sqrt_crb_phi = 0.0;
  int failure_count = 0;
  int trials = 0;
};

/// Signed errors (estimate - truth) for one trial; `ok` false when the
/// estimator raised a designated error.
struct TrialErrors {
  bool ok = false;
  double r = 0.0;
  double theta = 0.0;
  double phi = 0.0;
};

struct TrialRecord {
  double sweep_value = 0.0;
  int trial = 0;
  TrialErrors closed_form;
  TrialErrors least_squares;
  bool fallback_init = false;
  bool ls_converged = false;
};

struct MonteCarloResult {
  RmseRow closed_form;
  RmseRow least_squares;
  std::vector<TrialRecord> records;
  // Set when the closed form failed on any trial.
  bool flagged = false;
};

/// Bound for the scenario; zeros when sigma^2 = 0, NaN when degenerate.
CrbResult scenario_crb(const Scenario& s);

/// Runs `s.trials` independent trials (trial i draws from substream(seed, i)).
/// Trials are spread over `threads` workers (0 = hardware concurrency);
/// results do not depend on the thread count.
MonteCarloResult run_monte_carlo(const Scenario& s, const LsSettings& settings,
                                 double sweep_value, unsigned threads = 0);
MonteCarloResult run_monte_carlo(const Scenario& s, const LsSettings& settings);

/// RMSE over the successful entries of `records` for one estimator.
RmseRow aggregate(const std::vector<TrialRecord>& records, Estimator estimator, double sweep_value,
                  const CrbResult& crb);

double median_abs_range_error(const std::vector<TrialRecord>& records, Estimator estimator);

struct SweepResult {
  std::vector<RmseRow> rows;
  std::vector<TrialRecord> records;
};

SweepResult sweep_k(const Scenario& s, const std::vector<int>& k_values, const LsSettings& settings,
                    unsigned threads = 0);
SweepResult sweep_n(const Scenario& s, const std::vector<int>& n_values, const LsSettings& settings,
                    unsigned threads = 0);

struct AnglePair {
  double theta = 0.0;
  double phi = 0.0;
};

struct CrbMapRow {
  double r = 0.0;
  double theta = 0.0;
  double phi = 0.0;
  std::optional<CrbResult> crb;  // empty for degenerate geometries
};

std::vector<CrbMapRow> crb_map(const UpaConfig& cfg, const RadioConfig& radio,
                               const ChannelGains& gains, const std::vector<double>& r_values,
                               const std::vector<AnglePair>& angle_pairs);

// CSV emitters. Floating-point fields carry 9 significant digits.
std::string format_number(double value);
void write_rmse_csv(std::ostream& os, const std::vector<RmseRow>& rows, bool degrees = false);
void write_trials_csv(std::ostream& os, const std::vector<TrialRecord>& records, bool degrees = false);
std::vector<TrialRecord> read_trials_csv(std::istream& is);
void write_crb_map_csv(std::ostream& os, const std::vector<CrbMapRow>& rows, bool degrees = false);

}  // namespace nfloc

#endif  // NFLOC_HARNESS_HPP
