#include "nfloc/phase.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <complex>
#include <numbers>

namespace nfloc {

namespace {

// arg(a / b) in (-pi, pi].
double wrapped_ratio_phase(Complex a, Complex b) {
  const double phase = std::arg(a * std::conj(b));
  return phase <= -std::numbers::pi ? std::numbers::pi : phase;
}

}  // namespace

AdjacentDiffs adjacent_phase_diffs(const PilotField& field) {
  const UpaConfig& cfg = field.config();
  const int N = cfg.half_size;
  const Eigen::MatrixXcd& y = field.values();
  for (Eigen::Index j = 0; j < y.cols(); ++j)
    for (Eigen::Index i = 0; i < y.rows(); ++i)
      if (y(i, j) == Complex(0.0, 0.0))
        throw Error(ErrorCode::DegenerateObservation,
                    "zero observation at element (" + std::to_string(i - N) + ", " +
                        std::to_string(j - N) + ")");

  AdjacentDiffs out;
  out.cfg = cfg;
  out.x_diffs.resize(2 * N, 2 * N + 1);
  out.z_diffs.resize(2 * N + 1, 2 * N);
  for (int j = 0; j <= 2 * N; ++j)
    for (int i = 1; i <= 2 * N; ++i) out.x_diffs(i - 1, j) = wrapped_ratio_phase(y(i, j), y(i - 1, j));
  for (int j = 1; j <= 2 * N; ++j)
    for (int i = 0; i <= 2 * N; ++i) out.z_diffs(i, j - 1) = wrapped_ratio_phase(y(i, j), y(i, j - 1));
  return out;
}

PhaseSumSet build_phase_sums(const AdjacentDiffs& diffs) {
  const int side = diffs.cfg.side();
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(side, side);
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(side, side);
  for (int j = 0; j < side; ++j)
    for (int i = 1; i < side; ++i) h(i, j) = h(i - 1, j) + diffs.x_diffs(i - 1, j);
  for (int j = 1; j < side; ++j)
    for (int i = 0; i < side; ++i) v(i, j) = v(i, j - 1) + diffs.z_diffs(i, j - 1);
  return PhaseSumSet(diffs.cfg, std::move(h), std::move(v));
}

double lookup_sum(const PhaseSumSet& sums, const SumIndex& idx) {
  if (!idx.valid(sums.config().half_size))
    throw Error(ErrorCode::Domain, "summed phase-difference index requires -N <= L < M <= N");
  return sums.sum(idx);
}

SystemCount count_systems(int half_size) {
  using boost::multiprecision::cpp_int;
  if (half_size < 0) throw Error(ErrorCode::Domain, "half-size must be >= 0");
  const auto choose2 = [](const cpp_int& n) -> cpp_int { return n < 2 ? cpp_int(0) : n * (n - 1) / 2; };
  const auto choose3 = [](const cpp_int& n) -> cpp_int {
    return n < 3 ? cpp_int(0) : n * (n - 1) * (n - 2) / 6;
  };
  const cpp_int side = 2 * half_size + 1;
  const cpp_int q = side * choose2(side);
  const cpp_int n_sys = 2 * choose3(q) + 2 * choose2(q) * q;
  return {q.str(), n_sys.str()};
}

std::int64_t residual_count(int half_size) {
  const std::int64_t side = 2 * static_cast<std::int64_t>(half_size) + 1;
  return 2 * side * (side * (side - 1) / 2);
}

}  // namespace nfloc
