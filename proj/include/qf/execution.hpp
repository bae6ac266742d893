#pragma once

#include <span>
#include <vector>

namespace qf {

/// Sell-or-buy program of X shares split over N slices of length tau.
struct ExecutionSchedule {
  double total_shares = 0.0;
  std::size_t n_slices = 0;
  double tau = 1.0;
  std::vector<double> slices;    // n_j >= 0, sum = X
  std::vector<double> holdings;  // x_0 = X, ..., x_N = 0
  std::vector<double> times;     // t_j = j * tau, j = 0..N

  void validate() const;
};

struct AcParams {
  double lambda_risk = 0.0;  // >= 0
  double eta = 0.0;          // temporary impact coefficient, > 0
  double sigma = 0.0;        // price volatility per unit time, >= 0
  double tau = 1.0;          // slice duration, > 0
  double gamma_perm = 0.0;   // permanent impact, enters via eta - gamma * tau / 2
};

/// Almgren-Chriss optimal trajectory. lambda_risk = 0 gives TWAP exactly.
ExecutionSchedule ac_trajectory(double total_shares, std::size_t n_slices, const AcParams& p);

/// Uniform schedule X/N per slice.
ExecutionSchedule twap(double total_shares, std::size_t n_slices, double tau);

/// Discrete Almgren-Chriss cost E[C] + lambda * Var[C] of a schedule, up to
/// the schedule-independent permanent-impact constant.
double ac_objective(const ExecutionSchedule& s, const AcParams& p);

struct ImpactModel {
  double eta_temp = 0.0;
  double gamma_perm = 0.0;
};

struct ExecutionResult {
  double shortfall = 0.0;       // sum n_j * fill_j - X * mid_0
  double avg_fill = 0.0;
  double temporary_cost = 0.0;  // sum n_j * eta * n_j / tau
};

/// Fills buying slice j at mid_path[j] plus temporary impact plus the
/// permanent shift accumulated from earlier slices. mid_path[0] is arrival.
ExecutionResult simulate_execution(const ExecutionSchedule& s, std::span<const double> mid_path,
                                   const ImpactModel& impact);

}  // namespace qf
