#include "qf/execution.hpp"

#include <cmath>
#include <string>

#include "qf/error.hpp"

namespace qf {

void ExecutionSchedule::validate() const {
  if (slices.size() != n_slices) throw ValidationError("schedule: slice count mismatch");
  double sum = 0.0;
  for (double n : slices) {
    if (!(n >= 0.0)) throw ValidationError("schedule: negative slice");
    sum += n;
  }
  if (std::fabs(sum - total_shares) > 1e-9 * std::max(1.0, std::fabs(total_shares)))
    throw ValidationError("schedule: slices do not sum to total shares");
}

namespace {

void fill_times(ExecutionSchedule& s) {
  s.times.resize(s.n_slices + 1);
  for (std::size_t j = 0; j <= s.n_slices; ++j) s.times[j] = static_cast<double>(j) * s.tau;
}

void check_common(double total_shares, std::size_t n_slices, double tau) {
  if (n_slices < 1) throw ValidationError("execution: n_slices must be >= 1");
  if (!(total_shares >= 0.0) || !std::isfinite(total_shares)) throw ValidationError("execution: shares must be >= 0");
  if (!(tau > 0.0)) throw ValidationError("execution: tau must be > 0");
}

}  // namespace

ExecutionSchedule twap(double total_shares, std::size_t n_slices, double tau) {
  check_common(total_shares, n_slices, tau);
  ExecutionSchedule s;
  s.total_shares = total_shares;
  s.n_slices = n_slices;
  s.tau = tau;
  const double each = total_shares / static_cast<double>(n_slices);
  s.slices.assign(n_slices, each);
  s.holdings.resize(n_slices + 1);
  for (std::size_t j = 0; j <= n_slices; ++j)
    s.holdings[j] = total_shares * static_cast<double>(n_slices - j) / static_cast<double>(n_slices);
  fill_times(s);
  return s;
}

ExecutionSchedule ac_trajectory(double total_shares, std::size_t n_slices, const AcParams& p) {
  check_common(total_shares, n_slices, p.tau);
  if (!(p.lambda_risk >= 0.0)) throw ValidationError("ac_trajectory: lambda_risk must be >= 0");
  if (!(p.sigma >= 0.0)) throw ValidationError("ac_trajectory: sigma must be >= 0");
  if (!(p.eta > 0.0)) throw ValidationError("ac_trajectory: eta must be > 0");
  const double eta_adj = p.eta - 0.5 * p.gamma_perm * p.tau;
  if (!(eta_adj > 0.0)) throw ValidationError("ac_trajectory: adjusted temporary impact eta - gamma*tau/2 must be > 0");
  const double a = p.lambda_risk * p.sigma * p.sigma * p.tau * p.tau / (2.0 * eta_adj);
  if (a == 0.0) return twap(total_shares, n_slices, p.tau);

  // kappa*tau = acosh(1 + a), written to stay accurate for small a
  const double kt = std::log1p(a + std::sqrt(a * (a + 2.0)));
  const double kT = kt * static_cast<double>(n_slices);
  if (!std::isfinite(kT) || kT > 700.0)
    throw NumericError("ac_trajectory: kappa*T = " + std::to_string(kT) +
                       " overflows sinh; reduce lambda_risk, sigma or n_slices");
  ExecutionSchedule s;
  s.total_shares = total_shares;
  s.n_slices = n_slices;
  s.tau = p.tau;
  s.holdings.resize(n_slices + 1);
  const double denom = std::sinh(kT);
  s.holdings[0] = total_shares;
  for (std::size_t j = 1; j < n_slices; ++j)
    s.holdings[j] = total_shares * std::sinh(kt * static_cast<double>(n_slices - j)) / denom;
  s.holdings[n_slices] = 0.0;
  s.slices.resize(n_slices);
  for (std::size_t j = 0; j < n_slices; ++j) s.slices[j] = s.holdings[j] - s.holdings[j + 1];
  fill_times(s);
  return s;
}

double ac_objective(const ExecutionSchedule& s, const AcParams& p) {
  const double eta_adj = p.eta - 0.5 * p.gamma_perm * p.tau;
  double expected = 0.0;
  for (double n : s.slices) expected += eta_adj / s.tau * n * n;
  double variance = 0.0;
  for (std::size_t j = 1; j < s.holdings.size(); ++j) variance += p.sigma * p.sigma * s.tau * s.holdings[j] * s.holdings[j];
  return expected + p.lambda_risk * variance;
}

ExecutionResult simulate_execution(const ExecutionSchedule& s, std::span<const double> mid_path,
                                   const ImpactModel& impact) {
  s.validate();
  if (mid_path.size() != s.n_slices + 1)
    throw ValidationError("simulate_execution: mid path needs N + 1 prices (arrival first)");
  ExecutionResult r;
  double bought = 0.0, paid = 0.0;
  for (std::size_t j = 0; j < s.n_slices; ++j) {
    const double n = s.slices[j];
    const double mid = mid_path[j + 1] + impact.gamma_perm * bought;
    const double temp = impact.eta_temp * n / s.tau;
    const double fill = mid + temp;
    if (fill < 0.0) throw NumericError("simulate_execution: negative fill price at slice " + std::to_string(j + 1));
    paid += n * fill;
    r.temporary_cost += n * temp;
    bought += n;
  }
  r.shortfall = paid - s.total_shares * mid_path[0];
  r.avg_fill = s.total_shares > 0.0 ? paid / s.total_shares : mid_path[0];
  return r;
}

}  // namespace qf
