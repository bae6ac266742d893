#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "qf/factor/eval.hpp"
#include "qf/random.hpp"

namespace qf::factor {

struct GenConfig {
  std::size_t max_depth = 3;
  std::size_t n_candidates = 100;
  std::uint64_t seed = 1;
  /// Relative weights per node class: field, constant, unary, binary, ts,
  /// ts_pair, cs, graph. Missing keys keep their defaults.
  std::map<std::string, double> op_weights;
  std::vector<std::string> fields{"open", "high", "low", "close", "volume", "vwap", "returns"};
};

/// Random well-formed tree with depth <= max_depth (graph ops only when
/// `allow_graph`).
ExprPtr random_expr(Rng& rng, const GenConfig& cfg, bool allow_graph);

struct FactorCandidate {
  ExprPtr expr;
  std::string text;
  double score = 0.0;  // mean |per-date Pearson IC|, in [0, 1]
  std::size_t n_valid_dates = 0;
};

/// Scores a factor panel against labels. Constant output or more than 50%
/// MISSING cells scores 0. Dates need >= 3 pairs and non-constant sides.
FactorCandidate score_factor(const Panel& values, const Panel& labels);

/// Generates and scores n_candidates random trees; sorted by descending
/// score (generation order breaks ties). Deterministic given the seed.
std::vector<FactorCandidate> search_factors(const DataView& data, const Panel& labels,
                                            const GenConfig& cfg);

}  // namespace qf::factor
