#pragma once

#include <cstdint>
#include <vector>

#include "qf/pit_store.hpp"

namespace qf {

struct SynthConfig {
  std::size_t n_instruments = 200;
  std::size_t n_days = 500;
  std::uint64_t seed = 1;
  double signal_ic = 0.1;  // target corr(planted feature at t, return at t+1)
  double noise_vol = 0.02;
  std::size_t n_latent_factors = 3;
  std::size_t drift_period = 0;  // days per regime rotation; 0 = stationary
  double graph_density = 4.0;    // expected edges per node
  std::size_t n_planted = 4;     // observable planted fields x0..x{n-1}
  Date start = Date::from_ymd(2015, 1, 2);

  /// Throws ValidationError if an invariant is violated.
  void validate() const;
};

struct RegimeTruth {
  std::size_t first_day = 0;
  std::size_t last_day = 0;  // inclusive
  std::size_t dominant_field = 0;
  double realized_ic = 0.0;
};

struct SynthTruth {
  std::vector<RegimeTruth> regimes;
  double mean_realized_ic = 0.0;
};

struct MarketBundle {
  MarketData market;     // bars, fields x0.. and "fundamental", graph, universe
  Panel planted_signal;  // the active planted feature z(i, t)
  SynthTruth truth;
};

/// Time-forward generator: day t draws a fixed number of variates from each
/// stream, so extending n_days reproduces the existing prefix exactly.
MarketBundle generate(const SynthConfig& cfg);

/// Loading of field k at day t under the rotation schedule.
std::vector<double> planted_loadings(const SynthConfig& cfg, std::size_t day);

struct RealizedIc {
  std::vector<Cell> per_date;  // MISSING where fewer than 3 pairs
  double mean = 0.0;
  std::size_t n_dates = 0;
};

/// Per-date Pearson correlation between planted_signal and next-day return.
RealizedIc realized_ic(const MarketBundle& bundle);

}  // namespace qf
