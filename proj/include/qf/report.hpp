#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qf/harness.hpp"

namespace qf::report {

nlohmann::json to_json(const SignalReport& r);
nlohmann::json to_json(const PortfolioReport& r);
nlohmann::json to_json(const DecayReport& r);
nlohmann::json to_json(const RollRecord& r);
nlohmann::json to_json(const Matrix& m);
nlohmann::json to_json(const ParamPoint& p);

/// {"pearson": ..., "spearman": ...}
nlohmann::json signal_json(const EvaluationReport& e);
/// Portfolio stats, or null when the curve is too short.
nlohmann::json portfolio_json(const EvaluationReport& e);

/// Columns padded to their widest cell; numeric-looking cells right-aligned.
std::string text_table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows);

/// Human-readable tables for a report bundle (signal, portfolio, decay,
/// rolls and, for ensembles, per-run results).
std::string render_text(const nlohmann::json& bundle);

/// `date,ic` series for plotting.
std::string ic_series_csv(const SignalReport& r);

/// Compact fixed-point rendering for tables ("undefined" for nullopt).
std::string fmt(std::optional<double> v, int precision = 4);

}  // namespace qf::report
