// nfloc: Monte Carlo simulator and estimator front end for phase-difference
// localization with a uniform planar array.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "nfloc/crb.hpp"
#include "nfloc/estimators.hpp"
#include "nfloc/harness.hpp"
#include "nfloc/phase.hpp"

namespace {

using namespace nfloc;
using nlohmann::json;

constexpr int kExitConfig = 2;
constexpr int kExitDegenerate = 3;

struct CommonOptions {
  std::string config;
  std::string out;
  std::string trials_out;
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
  bool degrees = false;
  int ls_max_iter = LsSettings{}.max_iterations;
  double ls_tol = LsSettings{}.step_tolerance;
  unsigned threads = 0;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool monte_carlo) {
  cmd->add_option("--config", o.config, "Scenario JSON file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "Master RNG seed (overrides the scenario)");
  cmd->add_option("--out", o.out, "Output path (default: stdout)");
  cmd->add_flag("--degrees", o.degrees, "Report angles in degrees");
  cmd->add_option("--ls-max-iter", o.ls_max_iter, "Levenberg-Marquardt iteration cap")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--ls-tol", o.ls_tol, "Relative LM step tolerance")->check(CLI::PositiveNumber);
  if (monte_carlo) {
    cmd->add_option("--trials", o.trials, "Monte Carlo trials (overrides the scenario)")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--trials-out", o.trials_out, "Sidecar CSV with per-trial errors");
    cmd->add_option("--threads", o.threads, "Worker threads (0 = all cores)");
  }
}

Scenario scenario_for(const CommonOptions& o) {
  Scenario s = load_scenario(o.config);
  if (o.seed) s.master_seed = *o.seed;
  if (o.trials) s.trials = *o.trials;
  s.validate();
  return s;
}

LsSettings settings_for(const CommonOptions& o) {
  LsSettings ls;
  ls.max_iterations = o.ls_max_iter;
  ls.step_tolerance = o.ls_tol;
  ls.validate();
  return ls;
}

// Geometry the estimators or the bound cannot handle.
void check_geometry(const Scenario& s) {
  if (s.cfg.half_size < 1)
    throw Error(ErrorCode::InsufficientAperture, "the estimators need N >= 1");
  if (s.radio.noise_power > 0.0) crb_diag(s.user, s.cfg, s.gains, s.radio);
}

template <typename Fn>
void with_output(const std::string& path, Fn&& fn) {
  if (path.empty()) {
    fn(std::cout);
    return;
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::Config, "cannot write '" + path + "'");
  fn(os);
}

void emit_sweep(const CommonOptions& o, const std::vector<RmseRow>& rows,
                const std::vector<TrialRecord>& records) {
  with_output(o.out, [&](std::ostream& os) { write_rmse_csv(os, rows, o.degrees); });
  if (!o.trials_out.empty())
    with_output(o.trials_out, [&](std::ostream& os) { write_trials_csv(os, records, o.degrees); });
}

PilotField read_field_csv(const std::string& path, const UpaConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Config, "cannot open field file '" + path + "'");
  PilotField field(cfg);
  std::vector<bool> seen(static_cast<std::size_t>(cfg.side() * cfg.side()), false);
  std::string line;
  std::getline(in, line);
  if (line.rfind("n,m,re,im", 0) != 0) throw Error(ErrorCode::Config, "field CSV header must be n,m,re,im");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    int n = 0, m = 0;
    double re = 0.0, im = 0.0;
    if (std::sscanf(line.c_str(), "%d,%d,%lf,%lf", &n, &m, &re, &im) != 4)
      throw Error(ErrorCode::Config, "malformed field row: " + line);
    if (!cfg.contains(n, m)) throw Error(ErrorCode::Config, "field row outside the array: " + line);
    field(n, m) = Complex(re, im);
    seen[static_cast<std::size_t>((m + cfg.half_size) * cfg.side() + n + cfg.half_size)] = true;
  }
  for (bool s : seen)
    if (!s) throw Error(ErrorCode::Config, "field CSV does not cover every element");
  return PilotField(cfg, field.values());
}

void write_field_csv(std::ostream& os, const PilotField& field) {
  const int N = field.half_size();
  os << "n,m,re,im\n";
  char buf[96];
  for (int m = -N; m <= N; ++m)
    for (int n = -N; n <= N; ++n) {
      std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%.17g\n", n, m, field(n, m).real(), field(n, m).imag());
      os << buf;
    }
}

json report_json(const EstimateReport& r, bool degrees) {
  const double a = degrees ? 180.0 / std::numbers::pi : 1.0;
  const std::string unit = degrees ? "_deg" : "_rad";
  return json{{"A_m2", r.abc.A},
              {"B_m", r.abc.B},
              {"C_m", r.abc.C},
              {"r_m", r.spherical.r},
              {"theta" + unit, a * r.spherical.theta},
              {"phi" + unit, a * r.spherical.phi},
              {"x_m", r.cartesian(0)},
              {"y_m", r.cartesian(1)},
              {"z_m", r.cartesian(2)},
              {"iterations", r.iterations},
              {"final_objective_rad2", r.final_objective},
              {"flags",
               {{"clamped_y", r.flags.clamped_y},
                {"clamped_arccos", r.flags.clamped_arccos},
                {"azimuth_degenerate", r.flags.azimuth_degenerate},
                {"near_degenerate_denominator", r.flags.near_degenerate_denominator},
                {"fallback_init", r.flags.fallback_init},
                {"ls_converged", r.flags.ls_converged}}}};
}

std::vector<AnglePair> parse_angles(const std::vector<std::string>& specs) {
  std::vector<AnglePair> out;
  for (const auto& s : specs) {
    const auto colon = s.find(':');
    if (colon == std::string::npos) throw Error(ErrorCode::Config, "angle pair must be theta:phi, got " + s);
    try {
      out.push_back({std::stod(s.substr(0, colon)), std::stod(s.substr(colon + 1))});
    } catch (const std::exception&) {
      throw Error(ErrorCode::Config, "bad angle pair " + s);
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Phase-difference 3D localization for uniform planar arrays"};
  app.require_subcommand(1);

  CommonOptions mc_opt, sk_opt, sn_opt, est_opt, map_opt;
  std::vector<int> k_values, n_values, count_n;
  std::vector<double> r_values;
  std::vector<std::string> angle_specs;
  std::string field_path, dump_field;

  auto* mc = app.add_subcommand("mc", "Monte Carlo RMSE for one scenario");
  add_common(mc, mc_opt, true);

  auto* sk = app.add_subcommand("sweep-k", "RMSE versus pilot count K");
  add_common(sk, sk_opt, true);
  sk->add_option("--values", k_values, "Pilot counts")->required()->delimiter(',')->check(CLI::PositiveNumber);

  auto* sn = app.add_subcommand("sweep-n", "RMSE versus array half-size N");
  add_common(sn, sn_opt, true);
  sn->add_option("--values", n_values, "Array half-sizes")->required()->delimiter(',')->check(CLI::PositiveNumber);

  auto* est = app.add_subcommand("estimate", "Estimate the user position from one pilot field");
  add_common(est, est_opt, false);
  est->add_option("--field", field_path, "Pilot field CSV (n,m,re,im); simulated from the scenario if absent")
      ->check(CLI::ExistingFile);
  est->add_option("--dump-field", dump_field, "Write the field used to this CSV");

  auto* map = app.add_subcommand("crb-map", "Tabulate the Cramer-Rao bound over ranges and angles");
  map->add_option("--config", map_opt.config, "Scenario JSON file")->required()->check(CLI::ExistingFile);
  map->add_option("--r-values", r_values, "Ranges in meters")->required()->delimiter(',');
  map->add_option("--angles", angle_specs, "theta:phi pairs in radians (default: scenario user)")->delimiter(',');
  map->add_option("--out", map_opt.out, "Output path (default: stdout)");
  map->add_flag("--degrees", map_opt.degrees, "Report angles in degrees");

  auto* count = app.add_subcommand("count-systems", "Count summed phase-differences and three-equation systems");
  count->add_option("--n", count_n, "Array half-sizes")->required()->delimiter(',')->check(CLI::NonNegativeNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*mc) {
      const Scenario s = scenario_for(mc_opt);
      check_geometry(s);
      const MonteCarloResult r = run_monte_carlo(s, settings_for(mc_opt), s.radio.pilot_count, mc_opt.threads);
      emit_sweep(mc_opt, {r.closed_form, r.least_squares}, r.records);
      if (r.flagged)
        std::cerr << "warning: closed form failed on " << r.closed_form.failure_count << " of "
                  << r.closed_form.trials << " trials\n";
    } else if (*sk) {
      const Scenario s = scenario_for(sk_opt);
      check_geometry(s);
      const SweepResult r = sweep_k(s, k_values, settings_for(sk_opt), sk_opt.threads);
      emit_sweep(sk_opt, r.rows, r.records);
    } else if (*sn) {
      Scenario s = scenario_for(sn_opt);
      for (int n : n_values) {
        s.cfg.half_size = n;
        check_geometry(s);
      }
      const SweepResult r = sweep_n(s, n_values, settings_for(sn_opt), sn_opt.threads);
      emit_sweep(sn_opt, r.rows, r.records);
    } else if (*est) {
      const Scenario s = scenario_for(est_opt);
      if (s.cfg.half_size < 1) throw Error(ErrorCode::InsufficientAperture, "the estimators need N >= 1");
      const PilotField field = field_path.empty()
                                   ? simulate_pilot_field(s.user, s.cfg, s.gains, s.radio, s.master_seed)
                                   : read_field_csv(field_path, s.cfg);
      if (!dump_field.empty()) with_output(dump_field, [&](std::ostream& os) { write_field_csv(os, field); });
      const PipelineReport report = estimate_pipeline(field, settings_for(est_opt));
      json doc{{"least_squares", report_json(report.refined, est_opt.degrees)}};
      doc["closed_form"] = report.closed_form ? report_json(*report.closed_form, est_opt.degrees) : json(nullptr);
      if (report.closed_form_error) doc["closed_form_error"] = to_string(*report.closed_form_error);
      with_output(est_opt.out, [&](std::ostream& os) { os << doc.dump(2) << '\n'; });
    } else if (*map) {
      const Scenario s = load_scenario(map_opt.config);
      const std::vector<AnglePair> angles =
          angle_specs.empty() ? std::vector<AnglePair>{{s.user.theta, s.user.phi}} : parse_angles(angle_specs);
      const auto rows = crb_map(s.cfg, s.radio, s.gains, r_values, angles);
      with_output(map_opt.out, [&](std::ostream& os) { write_crb_map_csv(os, rows, map_opt.degrees); });
    } else if (*count) {
      std::cout << "N,Q,N_sys\n";
      for (int n : count_n) {
        const SystemCount c = count_systems(n);
        std::cout << n << ',' << c.q << ',' << c.n_sys << '\n';
      }
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    switch (e.code()) {
      case ErrorCode::Config:
        return kExitConfig;
      case ErrorCode::DegenerateGeometry:
      case ErrorCode::InsufficientAperture:
      case ErrorCode::DegenerateObservation:
      case ErrorCode::UnboundedInformation:
        return kExitDegenerate;
      default:
        return 1;
    }
  }
  return 0;
}
