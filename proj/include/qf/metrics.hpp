#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include "qf/backtest.hpp"
#include "qf/signal.hpp"

namespace qf {

enum class IcMethod { Pearson, Spearman };
std::string_view to_string(IcMethod m);

struct SignalReport {
  IcMethod method = IcMethod::Pearson;
  std::vector<Date> ic_dates;      // retained dates only
  std::vector<double> ic_series;   // per retained date
  double ic_mean = 0.0;
  double ic_std = 0.0;             // sample std; 0 with a single date
  std::optional<double> icir;      // undefined when ic_std == 0
  double rank_ic_mean = 0.0;       // Spearman mean over the same retained dates
  double coverage = 0.0;           // mean fraction of instruments scored, over dates with any score
};

/// Per-date cross-sectional correlation between signal and realized returns.
/// Dates with fewer than 3 pairs or zero variance on either side are skipped.
SignalReport information_coefficient(const SignalFrame& signal, const Panel& fwd, IcMethod method);

/// Mean per-date correlation, or nullopt when no date qualifies.
std::optional<double> mean_ic(const SignalFrame& signal, const Panel& fwd, IcMethod method = IcMethod::Pearson);

struct PortfolioReport {
  double ann_return = 0.0;
  double ann_vol = 0.0;
  std::optional<double> sharpe;  // undefined for zero return variance
  double max_drawdown = 0.0;
  double avg_turnover = 0.0;
  std::optional<double> rolling_sharpe_std;  // std of 63-day-window Sharpe ratios
  std::size_t n_dates = 0;
};

inline constexpr std::size_t kRollingSharpeWindow = 63;

/// Return statistics over net returns after the first (inception) date.
PortfolioReport portfolio_stats(const EquityCurve& curve, double periods_per_year = 252.0);

/// CUMULATIVE: IC(h) against forward_returns(bars, h).
/// LAGGED: IC(h) against the single-day return from t+h-1 to t+h.
enum class DecayMode { Lagged, Cumulative };
std::string_view to_string(DecayMode m);

enum class HalfLifeStatus { Reached, NotReached, Undefined };
std::string_view to_string(HalfLifeStatus s);

struct DecayReport {
  DecayMode mode = DecayMode::Lagged;
  std::vector<std::optional<double>> ic_by_horizon;  // index h-1
  std::optional<double> half_life;
  HalfLifeStatus status = HalfLifeStatus::Undefined;
};

DecayReport alpha_decay(const SignalFrame& signal, const BarPanel& bars, std::size_t max_horizon,
                        DecayMode mode = DecayMode::Lagged);

/// Single-day return realized from row t+h-1 to row t+h, for every row t.
Panel lagged_returns(const BarPanel& bars, std::size_t h);

using Matrix = std::vector<std::vector<double>>;

/// Pearson correlation over all cells present in both frames; unit diagonal.
Matrix signal_correlation(const std::vector<const SignalFrame*>& frames);

/// Cell-wise mean over the frames where present.
SignalFrame ensemble_mean(const std::vector<const SignalFrame*>& frames);

struct SensitivityReport {
  double base_ic = 0.0;
  std::vector<double> ic_shifts;
  double ic_shift_mean = 0.0;
  double ic_shift_std = 0.0;  // sample std; 0 with one trial
};

using SignalPipeline = std::function<SignalFrame(const BarPanel&)>;

/// Re-runs `pipeline` on bars whose close and volume are scaled by
/// (1 + epsilon * u), u ~ U[-1, 1] per cell per trial, and reports the shift
/// in mean Pearson IC against the unperturbed 1-day forward returns. A
/// signal with no scorable date counts as IC 0.
SensitivityReport perturbation_sensitivity(const SignalPipeline& pipeline, const BarPanel& bars, double epsilon,
                                           std::size_t n_trials, std::uint64_t seed);

}  // namespace qf
