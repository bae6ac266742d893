#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qf/backtest.hpp"
#include "qf/metrics.hpp"
#include "qf/portfolio.hpp"
#include "qf/signal.hpp"
#include "qf/synth.hpp"

namespace qf {

/// Months are approximated as this many trading days.
inline constexpr std::size_t kTradingDaysPerMonth = 21;

enum class SplitScheme { Tail, Random, Fragmented };
std::string_view to_string(SplitScheme s);
SplitScheme split_scheme_from_string(std::string_view s);

struct SplitSpec {
  SplitScheme scheme = SplitScheme::Tail;
  double valid_fraction = 0.2;
  std::size_t n_fragments = 4;
  std::uint64_t seed = 1;
};

struct SplitResult {
  std::vector<std::size_t> train;  // ascending
  std::vector<std::size_t> valid;  // ascending
};

/// Partitions `dates` (ascending calendar rows, >= 10) into train/validation.
/// The validation set has ceil(f * n) dates.
SplitResult split_dates(const std::vector<std::size_t>& dates, const SplitSpec& spec);

struct RollSpec {
  std::size_t train_months = 12;
  std::size_t roll_step = 3;  // months; 0 means NONE (one fit, one test span)
  std::optional<Date> test_start;  // default: first date with a full train window
  std::optional<Date> test_end;    // default: last calendar date
  bool expanding = false;
};

struct DataSpec {
  std::string dir;  // when empty, data is generated from `synth`
  SynthConfig synth;
};

struct PortfolioSpec {
  std::string method = "topk";  // "topk" or "mv"
  std::size_t k = 20;
  std::size_t rebalance_every = 1;
  CostModel costs;
  MVConfig mv;
};

struct EnsembleSpec {
  std::size_t n_runs = 1;
  std::uint64_t base_seed = 1;
};

/// Grid over FitConfig/objective parameters, enumerated with the last key
/// varying fastest. Keys: learning_rate, l2, epochs, init_scale,
/// row_subsample, combo_alpha.
using ParamGrid = std::vector<std::pair<std::string, std::vector<double>>>;
using ParamPoint = std::vector<std::pair<std::string, double>>;

struct TuningSpec {
  ParamGrid grid;
  bool retrain = true;
};

struct ExperimentConfig {
  DataSpec data;
  std::vector<factor::NamedFactor> factors;
  int label_horizon = 1;
  ObjectiveSpec objective;
  FitConfig fit;
  SplitSpec split;
  RollSpec roll;
  PortfolioSpec portfolio;
  EnsembleSpec ensemble;
  TuningSpec tuning;
  std::size_t decay_horizon = 5;

  void validate() const;
  /// Sets every seed (data, fit, split, ensemble) to `seed`.
  void set_seed(std::uint64_t seed);
};

/// Loads `cfg.data.dir` or generates the synthetic market.
MarketData load_market(const DataSpec& data);

std::vector<ParamPoint> enumerate_grid(const ParamGrid& grid);
void apply_params(const ParamPoint& p, FitConfig& fit, ObjectiveSpec& obj);

/// Mean per-date Pearson correlation between model scores and labels on the
/// rows of `m`; nullopt when no date has >= 3 pairs.
std::optional<double> validation_ic(const LinearModel& model, const FeatureMatrix& m);

struct TuneResult {
  ParamPoint best_params;
  LinearModel final_model;
  std::vector<std::optional<double>> valid_scores;  // per grid point; nullopt = failed
  SplitResult split;
};

/// Exhaustive grid search on a validation split of `train_dates`.
TuneResult tune(const FeatureMatrix& data, const std::vector<std::size_t>& train_dates, const ParamGrid& grid,
                const SplitSpec& split, bool retrain, const ObjectiveSpec& objective, const FitConfig& fit);

struct RollRecord {
  std::size_t index = 0;
  Date train_first, train_last;  // rows actually used by the fit (after purge)
  Date test_first, test_last;
  std::size_t n_train_dates = 0;
  std::size_t n_valid_dates = 0;
  std::size_t n_train_rows = 0;
  double final_loss = 0.0;
  ParamPoint params;
  std::optional<double> valid_score;
};

struct WalkForwardResult {
  SignalFrame oos_signal;  // full calendar; only test-range rows are filled
  std::vector<RollRecord> rolls;
  std::vector<LinearModel> models;
  std::size_t test_first_row = 0, test_last_row = 0;
};

/// Evaluated factor panels for `cfg.factors`, in config order.
std::vector<std::pair<std::string, Panel>> evaluate_features(const ExperimentConfig& cfg, const MarketData& market);

WalkForwardResult walk_forward(const ExperimentConfig& cfg, const MarketData& market, std::size_t threads = 1);

struct EvaluationReport {
  SignalReport ic_pearson;
  SignalReport ic_spearman;
  DecayReport decay;
  WeightSeries weights;
  EquityCurve curve;
  std::optional<PortfolioReport> portfolio;
};

/// Signal, decay and portfolio evaluation of an out-of-sample signal.
EvaluationReport evaluate_signal(const ExperimentConfig& cfg, const MarketData& market, const SignalFrame& signal);

struct EnsembleResult {
  std::vector<std::uint64_t> seeds;
  std::vector<WalkForwardResult> runs;
  std::vector<EvaluationReport> run_reports;
  SignalFrame ensemble;
  EvaluationReport ensemble_report;
  Matrix correlation;
};

/// Run i re-runs walk_forward with every fit and sampling seed = base_seed + i.
EnsembleResult run_ensemble(const ExperimentConfig& cfg, const MarketData& market, std::size_t threads = 1);

}  // namespace qf
