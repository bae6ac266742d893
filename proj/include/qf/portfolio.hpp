#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qf/pit_store.hpp"
#include "qf/signal.hpp"

namespace qf {

/// Per-rebalance-date long-only weights (>= 0, summing to 1).
struct WeightSeries {
  std::vector<Date> rebalance_dates;
  std::vector<std::map<std::string, double>> weights;

  /// Checks nonnegativity, unit sum (1e-9) and, when given, universe support.
  void validate(const UniverseTimeline* universe = nullptr) const;
};

std::string export_weights_csv(const WeightSeries& w);

/// Every `rebalance_every` calendar rows, equal-weights the top k scored
/// universe members (ties by ascending id). Dates without scores are skipped.
WeightSeries top_k_weights(const SignalFrame& signal, const UniverseTimeline& universe, std::size_t k,
                           std::size_t rebalance_every);

/// Euclidean projection onto {w : sum w = 1, 0 <= w <= cap}, solved exactly
/// by sorting the breakpoints of the piecewise-linear sum(theta).
Eigen::VectorXd project_capped_simplex(const Eigen::VectorXd& v, double cap);

struct MVProblem {
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;
  double gamma = 1.0;
  double w_max = 1.0;

  void validate() const;
};

struct MVSolution {
  Eigen::VectorXd weights;
  double objective = 0.0;    // w'mu - gamma/2 w'Sigma w
  double kkt_residual = 0.0;  // projected-gradient norm at the solution
  std::size_t iterations = 0;
};

/// Maximizes w'mu - (gamma/2) w'Sigma w over the capped simplex by
/// accelerated projected gradient ascent with adaptive restart. Stops when
/// the projected-gradient norm drops below 1e-8 or after 10,000 iterations.
MVSolution mean_variance(const MVProblem& p);

/// Symmetric PSD test via LDL' pivots (pivots >= -tol * max diagonal).
bool is_psd(const Eigen::MatrixXd& m, double tol = 1e-10);

/// Sample covariance of the trailing `window` daily returns ending at row t
/// over `columns`, plus ridge * I. Missing returns are treated as 0.
Eigen::MatrixXd trailing_covariance(const Panel& returns, std::size_t t, const std::vector<std::size_t>& columns,
                                    std::size_t window, double ridge);

struct MVConfig {
  std::size_t rebalance_every = 1;
  std::size_t cov_window = 60;
  double ridge = 1e-4;
  double gamma = 5.0;
  double w_max = 0.05;
  double mu_scale = 0.001;  // mu = mu_scale * cross-sectional zscore(signal)
};

/// Mean-variance weights at each rebalance date over the scored universe.
WeightSeries mean_variance_weights(const SignalFrame& signal, const BarPanel& bars,
                                   const UniverseTimeline& universe, const MVConfig& cfg);

}  // namespace qf
