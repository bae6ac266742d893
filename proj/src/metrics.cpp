#include "qf/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "qf/error.hpp"
#include "qf/random.hpp"
#include "qf/stats.hpp"

namespace qf {

std::string_view to_string(IcMethod m) { return m == IcMethod::Pearson ? "pearson" : "spearman"; }

std::string_view to_string(DecayMode m) { return m == DecayMode::Lagged ? "lagged" : "cumulative"; }

std::string_view to_string(HalfLifeStatus s) {
  switch (s) {
    case HalfLifeStatus::Reached: return "reached";
    case HalfLifeStatus::NotReached: return "not_reached";
    case HalfLifeStatus::Undefined: return "undefined";
  }
  return "undefined";
}

namespace {

struct DateIc {
  std::size_t row;
  double pearson;
  double spearman;
};

std::vector<DateIc> per_date_ic(const SignalFrame& signal, const Panel& fwd) {
  require_same_axes(signal, fwd, "information_coefficient");
  std::vector<DateIc> out;
  std::vector<double> xs, ys;
  for (std::size_t t = 0; t < signal.rows(); ++t) {
    xs.clear();
    ys.clear();
    for (std::size_t i = 0; i < signal.cols(); ++i) {
      const Cell& x = signal.at(t, i);
      const Cell& y = fwd.at(t, i);
      if (x && y) {
        xs.push_back(*x);
        ys.push_back(*y);
      }
    }
    if (xs.size() < 3) continue;
    const auto p = stats::pearson(xs, ys);
    if (!p) continue;
    const auto s = stats::spearman(xs, ys);
    out.push_back({t, *p, s.value_or(0.0)});
  }
  return out;
}

}  // namespace

SignalReport information_coefficient(const SignalFrame& signal, const Panel& fwd, IcMethod method) {
  const std::vector<DateIc> ics = per_date_ic(signal, fwd);
  if (ics.empty()) throw DataError("information_coefficient: no date has >= 3 pairs with nonzero variance");
  SignalReport r;
  r.method = method;
  std::vector<double> rank;
  for (const DateIc& d : ics) {
    r.ic_dates.push_back(signal.calendar()[d.row]);
    r.ic_series.push_back(method == IcMethod::Pearson ? d.pearson : d.spearman);
    rank.push_back(d.spearman);
  }
  r.ic_mean = stats::mean(r.ic_series);
  r.ic_std = stats::sample_std(r.ic_series).value_or(0.0);
  if (r.ic_std > 0.0) r.icir = r.ic_mean / r.ic_std;
  r.rank_ic_mean = stats::mean(rank);
  // over the dates the signal covers at all, so out-of-sample frames are not
  // penalized for their empty training rows
  double cov = 0.0;
  std::size_t dates = 0;
  for (std::size_t t = 0; t < signal.rows(); ++t) {
    std::size_t present = 0;
    for (const Cell& c : signal.row(t)) present += c.has_value();
    if (!present) continue;
    cov += static_cast<double>(present) / static_cast<double>(signal.cols());
    ++dates;
  }
  r.coverage = dates ? cov / static_cast<double>(dates) : 0.0;
  return r;
}

std::optional<double> mean_ic(const SignalFrame& signal, const Panel& fwd, IcMethod method) {
  const std::vector<DateIc> ics = per_date_ic(signal, fwd);
  if (ics.empty()) return std::nullopt;
  std::vector<double> v;
  for (const DateIc& d : ics) v.push_back(method == IcMethod::Pearson ? d.pearson : d.spearman);
  return stats::mean(v);
}

PortfolioReport portfolio_stats(const EquityCurve& curve, double periods_per_year) {
  const std::size_t n = curve.size();
  if (n < 2) throw ValidationError("portfolio_stats: need at least 2 dates");
  if (!(periods_per_year > 0.0)) throw ValidationError("portfolio_stats: periods_per_year must be > 0");
  PortfolioReport r;
  r.n_dates = n;
  r.ann_return = std::pow(curve.nav.back() / curve.nav.front(), periods_per_year / static_cast<double>(n - 1)) - 1.0;
  const std::span<const double> rets(curve.net.data() + 1, n - 1);
  const double sq = std::sqrt(periods_per_year);
  const std::optional<double> sd = stats::sample_std(rets);
  r.ann_vol = sd.value_or(0.0) * sq;
  if (sd && *sd > 0.0) r.sharpe = stats::mean(rets) / *sd * sq;
  double peak = curve.nav.front();
  for (double v : curve.nav) {
    peak = std::max(peak, v);
    if (peak > 0.0) r.max_drawdown = std::max(r.max_drawdown, 1.0 - v / peak);
  }
  r.avg_turnover = stats::mean(curve.turnover);
  std::vector<double> rolling;
  if (rets.size() >= kRollingSharpeWindow)
    for (std::size_t s = 0; s + kRollingSharpeWindow <= rets.size(); ++s) {
      const auto w = rets.subspan(s, kRollingSharpeWindow);
      const auto wsd = stats::sample_std(w);
      if (wsd && *wsd > 0.0) rolling.push_back(stats::mean(w) / *wsd * sq);
    }
  if (rolling.size() >= 2) r.rolling_sharpe_std = stats::sample_std(rolling);
  return r;
}

Panel lagged_returns(const BarPanel& bars, std::size_t h) {
  if (h < 1) throw ValidationError("lagged_returns: horizon must be >= 1");
  const Panel one = forward_returns(bars, 1);
  Panel out(bars.close.calendar_ptr(), bars.close.instruments_ptr());
  for (std::size_t t = 0; t + h - 1 < out.rows(); ++t)
    for (std::size_t i = 0; i < out.cols(); ++i) out.at(t, i) = one.at(t + h - 1, i);
  return out;
}

DecayReport alpha_decay(const SignalFrame& signal, const BarPanel& bars, std::size_t max_horizon, DecayMode mode) {
  if (max_horizon < 1) throw ValidationError("alpha_decay: max horizon must be >= 1");
  if (max_horizon >= bars.rows()) throw ValidationError("alpha_decay: max horizon must be shorter than the calendar");
  DecayReport r;
  r.mode = mode;
  for (std::size_t h = 1; h <= max_horizon; ++h) {
    const Panel fwd = mode == DecayMode::Lagged ? lagged_returns(bars, h) : forward_returns(bars, static_cast<int>(h));
    r.ic_by_horizon.push_back(mean_ic(signal, fwd));
  }
  if (!r.ic_by_horizon[0]) throw DataError("alpha_decay: signal has no scorable date at horizon 1");
  const double ic1 = *r.ic_by_horizon[0];
  if (!(ic1 > 0.0)) {
    r.status = HalfLifeStatus::Undefined;
    return r;
  }
  const double half = ic1 / 2.0;
  r.status = HalfLifeStatus::NotReached;
  for (std::size_t h = 2; h <= max_horizon; ++h) {
    const auto& prev = r.ic_by_horizon[h - 2];
    const auto& cur = r.ic_by_horizon[h - 1];
    if (!prev || !cur) break;
    if (*cur <= half) {
      const double frac = (*prev - half) / (*prev - *cur);
      r.half_life = static_cast<double>(h - 1) + frac;
      r.status = HalfLifeStatus::Reached;
      break;
    }
  }
  return r;
}

Matrix signal_correlation(const std::vector<const SignalFrame*>& frames) {
  if (frames.size() < 2) throw ValidationError("signal_correlation: need at least 2 frames");
  for (const SignalFrame* f : frames) require_same_axes(*frames[0], *f, "signal_correlation");
  const std::size_t m = frames.size();
  Matrix out(m, std::vector<double>(m, 1.0));
  std::vector<double> xs, ys;
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = a + 1; b < m; ++b) {
      xs.clear();
      ys.clear();
      const auto& ca = frames[a]->cells();
      const auto& cb = frames[b]->cells();
      for (std::size_t k = 0; k < ca.size(); ++k)
        if (ca[k] && cb[k]) {
          xs.push_back(*ca[k]);
          ys.push_back(*cb[k]);
        }
      if (xs.size() < 3) throw DataError("signal_correlation: fewer than 3 common cells for a pair");
      const auto c = stats::pearson(xs, ys);
      if (!c) throw NumericError("signal_correlation: constant frame in pair");
      out[a][b] = out[b][a] = *c;
    }
  return out;
}

SignalFrame ensemble_mean(const std::vector<const SignalFrame*>& frames) {
  if (frames.empty()) throw ValidationError("ensemble_mean: need at least 1 frame");
  for (const SignalFrame* f : frames) require_same_axes(*frames[0], *f, "ensemble_mean");
  SignalFrame out(frames[0]->calendar_ptr(), frames[0]->instruments_ptr());
  for (std::size_t t = 0; t < out.rows(); ++t)
    for (std::size_t i = 0; i < out.cols(); ++i) {
      double sum = 0.0;
      std::size_t n = 0;
      for (const SignalFrame* f : frames)
        if (const Cell& c = f->at(t, i)) {
          sum += *c;
          ++n;
        }
      if (n) out.at(t, i) = sum / static_cast<double>(n);
    }
  return out;
}

SensitivityReport perturbation_sensitivity(const SignalPipeline& pipeline, const BarPanel& bars, double epsilon,
                                           std::size_t n_trials, std::uint64_t seed) {
  if (!(epsilon > 0.0)) throw ValidationError("perturbation_sensitivity: epsilon must be > 0");
  const Panel fwd = forward_returns(bars, 1);
  auto ic_of = [&](const BarPanel& b) {
    const SignalFrame s = pipeline(b);
    return mean_ic(reindex(s, fwd.calendar_ptr(), fwd.instruments_ptr()), fwd).value_or(0.0);
  };
  SensitivityReport r;
  r.base_ic = ic_of(bars);
  for (std::size_t k = 0; k < n_trials; ++k) {
    Rng rng(seed, k);
    BarPanel p = bars;
    for (Panel* panel : {&p.close, &p.volume})
      for (std::size_t t = 0; t < panel->rows(); ++t)
        for (std::size_t i = 0; i < panel->cols(); ++i) {
          const double u = rng.uniform(-1.0, 1.0);
          if (Cell& c = panel->at(t, i)) *c *= 1.0 + epsilon * u;
        }
    r.ic_shifts.push_back(ic_of(p) - r.base_ic);
  }
  if (!r.ic_shifts.empty()) {
    r.ic_shift_mean = stats::mean(r.ic_shifts);
    r.ic_shift_std = stats::sample_std(r.ic_shifts).value_or(0.0);
  }
  return r;
}

}  // namespace qf
