#include "nfloc/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <thread>

#include "nfloc/phase.hpp"
#include "nfloc/random.hpp"

namespace nfloc {

namespace {

using nlohmann::json;

constexpr double kRadToDeg = 180.0 / std::numbers::pi;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double power_field(const json& obj, const std::string& stem, std::optional<double> fallback_w) {
  const std::string dbm = stem + "_dbm";
  const std::string watts = stem + "_w";
  if (obj.contains(dbm) && obj.contains(watts))
    throw Error(ErrorCode::Config, "give only one of '" + dbm + "' and '" + watts + "'");
  if (obj.contains(dbm)) return dbm_to_watts(obj.at(dbm).get<double>());
  if (obj.contains(watts)) return obj.at(watts).get<double>();
  if (fallback_w) return *fallback_w;
  throw Error(ErrorCode::Config, "missing '" + dbm + "'");
}

void reject_unknown(const json& obj, std::initializer_list<const char*> keys, const std::string& where) {
  for (const auto& [key, value] : obj.items())
    if (std::find_if(keys.begin(), keys.end(), [&](const char* k) { return key == k; }) == keys.end())
      throw Error(ErrorCode::Config, "unknown key '" + key + "' in " + where);
}

TrialErrors errors_of(const SphericalPosition& est, const SphericalPosition& truth) {
  return {true, est.r - truth.r, est.theta - truth.theta, est.phi - truth.phi};
}

TrialRecord run_trial(const Scenario& s, const LsSettings& settings, double sweep_value, int trial) {
  TrialRecord rec;
  rec.sweep_value = sweep_value;
  rec.trial = trial;
  Rng rng = substream(s.master_seed, static_cast<std::uint64_t>(trial));
  const PilotField field = simulate_pilot_field(s.user, s.cfg, s.gains, s.radio, rng);
  try {
    const PipelineReport report = estimate_pipeline(field, settings);
    if (report.closed_form) rec.closed_form = errors_of(report.closed_form->spherical, s.user);
    rec.least_squares = errors_of(report.refined.spherical, s.user);
    rec.fallback_init = report.refined.flags.fallback_init;
    rec.ls_converged = report.refined.flags.ls_converged;
  } catch (const Error& err) {
    if (err.code() != ErrorCode::DegenerateObservation) throw;
  }
  return rec;
}

std::string join_csv(std::initializer_list<std::string> fields) {
  std::string line;
  for (const auto& f : fields) {
    if (!line.empty()) line += ',';
    line += f;
  }
  return line;
}

std::string format_exact(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

}  // namespace

void Scenario::validate() const {
  cfg.validate();
  radio.validate();
  if (trials < 1) throw Error(ErrorCode::Config, "trials must be >= 1");
  if (!user.valid()) throw Error(ErrorCode::Config, "user needs r > 0 and theta, phi in [0, pi]");
}

Scenario scenario_from_json(const json& doc) {
  try {
    reject_unknown(doc, {"array", "radio", "gains", "user", "trials", "seed"}, "scenario");
    Scenario s;
    const json& arr = doc.at("array");
    reject_unknown(arr, {"half_size", "spacing_m", "wavelength_m"}, "array");
    s.cfg.half_size = arr.at("half_size").get<int>();
    s.cfg.wavelength = arr.at("wavelength_m").get<double>();
    s.cfg.spacing = arr.value("spacing_m", s.cfg.wavelength / 2.0);

    const json& radio = doc.at("radio");
    reject_unknown(radio,
                   {"transmit_power_dbm", "transmit_power_w", "noise_power_dbm", "noise_power_w", "pilots"},
                   "radio");
    s.radio.transmit_power = power_field(radio, "transmit_power", std::nullopt);
    s.radio.noise_power = power_field(radio, "noise_power", std::nullopt);
    s.radio.pilot_count = radio.at("pilots").get<int>();

    if (doc.contains("gains")) {
      const json& g = doc.at("gains");
      reject_unknown(g, {"g1", "g2"}, "gains");
      s.gains = ChannelGains::constant(g.value("g1", 1.0),
                                       g.value("g2", s.cfg.wavelength * s.cfg.wavelength /
                                                         (4.0 * std::numbers::pi)));
    } else {
      s.gains = ChannelGains::isotropic(s.cfg.wavelength);
    }

    const json& user = doc.at("user");
    reject_unknown(user, {"r_m", "theta_rad", "phi_rad"}, "user");
    s.user = {user.at("r_m").get<double>(), user.at("theta_rad").get<double>(),
              user.at("phi_rad").get<double>()};
    s.trials = doc.value("trials", 200);
    s.master_seed = doc.value("seed", std::uint64_t{1});
    s.validate();
    return s;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Config, e.what());
  }
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Config, "cannot open scenario file '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Config, std::string("malformed scenario JSON: ") + e.what());
  }
  return scenario_from_json(doc);
}

const char* to_string(Estimator e) {
  return e == Estimator::ClosedForm ? "closed_form" : "least_squares";
}

CrbResult scenario_crb(const Scenario& s) {
  if (s.radio.noise_power == 0.0) return CrbResult{};
  try {
    return crb_diag(s.user, s.cfg, s.gains, s.radio);
  } catch (const Error& err) {
    if (err.code() != ErrorCode::DegenerateGeometry) throw;
    return CrbResult{kNaN, kNaN, kNaN, kNaN};
  }
}

RmseRow aggregate(const std::vector<TrialRecord>& records, Estimator estimator, double sweep_value,
                  const CrbResult& crb) {
  RmseRow row;
  row.sweep_value = sweep_value;
  row.estimator = estimator;
  row.trials = static_cast<int>(records.size());
  double sr = 0.0, st = 0.0, sp = 0.0;
  int ok = 0;
  for (const auto& rec : records) {
    const TrialErrors& e = estimator == Estimator::ClosedForm ? rec.closed_form : rec.least_squares;
    if (!e.ok) {
      ++row.failure_count;
      continue;
    }
    ++ok;
    sr += e.r * e.r;
    st += e.theta * e.theta;
    sp += e.phi * e.phi;
  }
  if (ok > 0) {
    row.rmse_r = std::sqrt(sr / ok);
    row.rmse_theta = std::sqrt(st / ok);
    row.rmse_phi = std::sqrt(sp / ok);
  } else {
    row.rmse_r = row.rmse_theta = row.rmse_phi = kNaN;
  }
  row.sqrt_crb_r = crb.sqrt_crb_r;
  row.sqrt_crb_theta = crb.sqrt_crb_theta();
  row.sqrt_crb_phi = crb.sqrt_crb_phi();
  return row;
}

double median_abs_range_error(const std::vector<TrialRecord>& records, Estimator estimator) {
  std::vector<double> errs;
  for (const auto& rec : records) {
    const TrialErrors& e = estimator == Estimator::ClosedForm ? rec.closed_form : rec.least_squares;
    if (e.ok) errs.push_back(std::abs(e.r));
  }
  if (errs.empty()) return kNaN;
  const auto mid = errs.begin() + static_cast<std::ptrdiff_t>(errs.size() / 2);
  std::nth_element(errs.begin(), mid, errs.end());
  if (errs.size() % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(errs.begin(), mid);
  return 0.5 * (lower + upper);
}

MonteCarloResult run_monte_carlo(const Scenario& s, const LsSettings& settings, double sweep_value,
                                 unsigned threads) {
  s.validate();
  settings.validate();
  MonteCarloResult out;
  out.records.resize(static_cast<std::size_t>(s.trials));

  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(s.trials));
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  const auto worker = [&] {
    for (int i = next++; i < s.trials && !failed; i = next++) {
      try {
        out.records[i] = run_trial(s, settings, sweep_value, i);
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  const CrbResult crb = scenario_crb(s);
  out.closed_form = aggregate(out.records, Estimator::ClosedForm, sweep_value, crb);
  out.least_squares = aggregate(out.records, Estimator::LeastSquares, sweep_value, crb);
  out.flagged = out.closed_form.failure_count > 0;
  return out;
}

MonteCarloResult run_monte_carlo(const Scenario& s, const LsSettings& settings) {
  return run_monte_carlo(s, settings, static_cast<double>(s.radio.pilot_count));
}

SweepResult sweep_k(const Scenario& s, const std::vector<int>& k_values, const LsSettings& settings,
                    unsigned threads) {
  if (k_values.empty()) throw Error(ErrorCode::Config, "K sweep needs at least one value");
  SweepResult out;
  for (int k : k_values) {
    if (k < 1) throw Error(ErrorCode::Config, "pilot counts must be >= 1");
    Scenario sk = s;
    sk.radio.pilot_count = k;
    MonteCarloResult mc = run_monte_carlo(sk, settings, k, threads);
    out.rows.push_back(mc.closed_form);
    out.rows.push_back(mc.least_squares);
    out.records.insert(out.records.end(), mc.records.begin(), mc.records.end());
  }
  return out;
}

SweepResult sweep_n(const Scenario& s, const std::vector<int>& n_values, const LsSettings& settings,
                    unsigned threads) {
  if (n_values.empty()) throw Error(ErrorCode::Config, "N sweep needs at least one value");
  SweepResult out;
  for (int n : n_values) {
    if (n < 1) throw Error(ErrorCode::Config, "array half-sizes must be >= 1");
    Scenario sn = s;
    sn.cfg.half_size = n;
    MonteCarloResult mc = run_monte_carlo(sn, settings, n, threads);
    out.rows.push_back(mc.closed_form);
    out.rows.push_back(mc.least_squares);
    out.records.insert(out.records.end(), mc.records.begin(), mc.records.end());
  }
  return out;
}

std::vector<CrbMapRow> crb_map(const UpaConfig& cfg, const RadioConfig& radio,
                               const ChannelGains& gains, const std::vector<double>& r_values,
                               const std::vector<AnglePair>& angle_pairs) {
  cfg.validate();
  radio.validate();
  std::vector<CrbMapRow> rows;
  for (const AnglePair& ang : angle_pairs)
    for (double r : r_values) {
      CrbMapRow row{r, ang.theta, ang.phi, std::nullopt};
      const SphericalPosition p{r, ang.theta, ang.phi};
      if (!p.valid()) throw Error(ErrorCode::Config, "crb map point outside r > 0, angles in [0, pi]");
      try {
        row.crb = crb_diag(p, cfg, gains, radio);
      } catch (const Error& err) {
        if (err.code() != ErrorCode::DegenerateGeometry && err.code() != ErrorCode::Domain) throw;
      }
      rows.push_back(row);
    }
  return rows;
}

std::string format_number(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", value);
  return buf;
}

void write_rmse_csv(std::ostream& os, const std::vector<RmseRow>& rows, bool degrees) {
  const double a = degrees ? kRadToDeg : 1.0;
  os << (degrees ? "sweep,estimator,rmse_r_m,rmse_theta_deg,rmse_phi_deg,crb_r_m,crb_theta_deg,"
                   "crb_phi_deg,failures,trials\n"
                 : "sweep,estimator,rmse_r_m,rmse_theta_rad,rmse_phi_rad,crb_r_m,crb_theta_rad,"
                   "crb_phi_rad,failures,trials\n");
  for (const auto& row : rows)
    os << join_csv({format_number(row.sweep_value), to_string(row.estimator), format_number(row.rmse_r),
                    format_number(a * row.rmse_theta), format_number(a * row.rmse_phi),
                    format_number(row.sqrt_crb_r), format_number(a * row.sqrt_crb_theta),
                    format_number(a * row.sqrt_crb_phi), std::to_string(row.failure_count),
                    std::to_string(row.trials)})
       << '\n';
}

void write_trials_csv(std::ostream& os, const std::vector<TrialRecord>& records, bool degrees) {
  const double a = degrees ? kRadToDeg : 1.0;
  os << (degrees ? "sweep,trial,estimator,ok,err_r_m,err_theta_deg,err_phi_deg\n"
                 : "sweep,trial,estimator,ok,err_r_m,err_theta_rad,err_phi_rad\n");
  for (const auto& rec : records)
    for (Estimator est : {Estimator::ClosedForm, Estimator::LeastSquares}) {
      const TrialErrors& e = est == Estimator::ClosedForm ? rec.closed_form : rec.least_squares;
      os << join_csv({format_number(rec.sweep_value), std::to_string(rec.trial), to_string(est),
                      e.ok ? "1" : "0", format_exact(e.r), format_exact(a * e.theta),
                      format_exact(a * e.phi)})
         << '\n';
    }
}

std::vector<TrialRecord> read_trials_csv(std::istream& is) {
  std::vector<TrialRecord> out;
  std::string line;
  if (!std::getline(is, line)) return out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 7) throw Error(ErrorCode::Config, "malformed trial record: " + line);
    const double sweep = std::stod(f[0]);
    const int trial = std::stoi(f[1]);
    if (out.empty() || out.back().trial != trial || out.back().sweep_value != sweep) {
      out.emplace_back();
      out.back().sweep_value = sweep;
      out.back().trial = trial;
    }
    TrialErrors& e = f[2] == "closed_form" ? out.back().closed_form : out.back().least_squares;
    e = {f[3] == "1", std::stod(f[4]), std::stod(f[5]), std::stod(f[6])};
  }
  return out;
}

void write_crb_map_csv(std::ostream& os, const std::vector<CrbMapRow>& rows, bool degrees) {
  const double a = degrees ? kRadToDeg : 1.0;
  os << (degrees ? "r_m,theta_deg,phi_deg,crb_r_m,crb_theta_deg,crb_phi_deg,degenerate\n"
                 : "r_m,theta_rad,phi_rad,crb_r_m,crb_theta_rad,crb_phi_rad,degenerate\n");
  for (const auto& row : rows) {
    const bool ok = row.crb.has_value();
    os << join_csv({format_number(row.r), format_number(a * row.theta), format_number(a * row.phi),
                    ok ? format_number(row.crb->sqrt_crb_r) : "",
                    ok ? format_number(a * row.crb->sqrt_crb_theta()) : "",
                    ok ? format_number(a * row.crb->sqrt_crb_phi()) : "", ok ? "0" : "1"})
       << '\n';
  }
}

}  // namespace nfloc
