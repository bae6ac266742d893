#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "qf/factor/search.hpp"
#include "qf/harness.hpp"

namespace qf::run {

struct Options {
  std::string out_dir;
  bool deterministic = false;  // omit timestamps so reports are byte-stable
  std::size_t threads = 1;
};

/// Each command writes its artifacts plus config.toml, report.json and
/// report.txt under `out_dir` and returns the report bundle. Bundles carry
/// the keys command, config, signal, portfolio, decay, correlation, rolls
/// and manifest (paths relative to out_dir).
nlohmann::json synth(const ExperimentConfig& cfg, const Options& opt);
nlohmann::json factor_eval(const ExperimentConfig& cfg, const std::string& expr, const Options& opt);
nlohmann::json factor_search(const ExperimentConfig& cfg, const factor::GenConfig& gen, const Options& opt);
nlohmann::json train(const ExperimentConfig& cfg, const Options& opt);
/// Backtests the signal CSV at `signal_path`, or the walk-forward signal when empty.
nlohmann::json backtest(const ExperimentConfig& cfg, const std::string& signal_path, const Options& opt);
nlohmann::json walkforward(const ExperimentConfig& cfg, const Options& opt);
nlohmann::json ensemble(const ExperimentConfig& cfg, const Options& opt);

/// Config document as nested JSON {section: {key: value}}.
nlohmann::json config_json(const ExperimentConfig& cfg);

}  // namespace qf::run
