#include "qf/synth.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

#include "qf/error.hpp"
#include "qf/random.hpp"
#include "qf/stats.hpp"

namespace qf {

namespace {

constexpr std::size_t kGraphEpochDays = 126;
constexpr std::size_t kFundamentalEveryDays = 63;
constexpr std::uint64_t kMarketStream = 0;
constexpr std::uint64_t kGraphStream = 1;
constexpr std::uint64_t kInstrumentStreamBase = 16;

std::string instrument_id(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "S%04zu", i);
  return buf;
}

Date advance_business_days(Date d, std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) d = d.next_business_day();
  return d;
}

}  // namespace

void SynthConfig::validate() const {
  if (n_instruments < 1 || n_days < 1 || n_latent_factors < 1 || n_planted < 1)
    throw ValidationError("synth: counts must be >= 1");
  if (!(signal_ic >= 0.0 && signal_ic < 1.0)) throw ValidationError("synth: signal_ic must be in [0, 1)");
  if (!(noise_vol > 0.0)) throw ValidationError("synth: noise_vol must be > 0");
  if (graph_density < 0.0) throw ValidationError("synth: graph_density must be >= 0");
  if (drift_period > 0 && n_planted < 2)
    throw ValidationError("synth: drift requires at least 2 planted fields");
}

std::vector<double> planted_loadings(const SynthConfig& cfg, std::size_t day) {
  std::vector<double> beta(cfg.n_planted, 0.0);
  if (cfg.drift_period == 0) {
    beta[0] = 1.0;
    return beta;
  }
  // Field s dominates segment s (pure at its midpoint) and hands over to the
  // neighbouring field with equal loadings at the segment boundaries.
  const double p = static_cast<double>(day) / static_cast<double>(cfg.drift_period);
  const double s = std::floor(p);
  const double g = p - s - 0.5;
  const double psi = 0.5 * std::numbers::pi * std::fabs(g);
  const std::size_t m = cfg.n_planted;
  const std::size_t main = static_cast<std::size_t>(s) % m;
  const std::size_t other = g >= 0 ? (main + 1) % m : (main + m - 1) % m;
  beta[main] = std::cos(psi);
  beta[other] += std::sin(psi);
  return beta;
}

MarketBundle generate(const SynthConfig& cfg) {
  cfg.validate();
  const std::size_t n = cfg.n_instruments;
  const std::size_t days = cfg.n_days;
  const std::size_t m = cfg.n_planted;
  const std::size_t nf = cfg.n_latent_factors;
  const double rho = cfg.signal_ic;
  const double resid = std::sqrt(1.0 - rho * rho);

  std::vector<Date> dates;
  dates.reserve(days);
  Date d = cfg.start.weekday() >= 5 ? cfg.start.next_business_day() : cfg.start;
  for (std::size_t t = 0; t < days; ++t) {
    dates.push_back(d);
    d = d.next_business_day();
  }
  auto cal = std::make_shared<const TradingCalendar>(dates);
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back(instrument_id(i));
  auto inst = std::make_shared<const InstrumentSet>(ids);

  MarketBundle out;
  MarketData& mk = out.market;
  mk.bars = BarPanel{Panel(cal, inst), Panel(cal, inst), Panel(cal, inst),
                     Panel(cal, inst), Panel(cal, inst), Panel(cal, inst)};
  std::vector<Panel> planted(m, Panel(cal, inst));
  out.planted_signal = Panel(cal, inst);

  Rng market(cfg.seed, kMarketStream);
  Rng graph_rng(cfg.seed, kGraphStream);
  std::vector<Rng> streams;
  streams.reserve(n);
  for (std::size_t i = 0; i < n; ++i) streams.emplace_back(cfg.seed, kInstrumentStreamBase + i);

  // Static per-instrument draws come first on each stream.
  std::vector<std::vector<double>> loading(n, std::vector<double>(nf));
  std::vector<double> loading_norm(n), fundamental(n);
  std::vector<std::size_t> sector(n);
  for (std::size_t i = 0; i < n; ++i) {
    double ss = 1.0;
    for (auto& b : loading[i]) {
      b = streams[i].normal();
      ss += b * b;
    }
    loading_norm[i] = std::sqrt(ss);
    fundamental[i] = streams[i].normal();
    std::size_t best = 0;
    for (std::size_t k = 1; k < nf; ++k)
      if (std::fabs(loading[i][k]) > std::fabs(loading[i][best])) best = k;
    sector[i] = best;
  }

  std::vector<double> prev_z(n, 0.0), prev_close(n, 100.0);
  std::vector<double> factors(nf);
  for (std::size_t t = 0; t < days; ++t) {
    const double mkt = 0.0003 + 0.6 * cfg.noise_vol * market.normal();
    // factor draws are rescaled to norm sqrt(nf) so the cross-sectional
    // variance of eps is 1 on every date, not just on average
    double fss = 0.0;
    for (auto& f : factors) {
      f = market.normal();
      fss += f * f;
    }
    const double fscale = fss > 0.0 ? std::sqrt(static_cast<double>(nf) / fss) : 0.0;
    for (auto& f : factors) f *= fscale;
    const auto beta = planted_loadings(cfg, t);

    for (std::size_t i = 0; i < n; ++i) {
      Rng& r = streams[i];
      double z = 0.0;
      for (std::size_t k = 0; k < m; ++k) {
        const double x = r.normal();
        planted[k].at(t, i) = x;
        z += beta[k] * x;
      }
      const double idio = r.normal();
      const double n_open = r.normal();
      const double n_high = r.normal();
      const double n_low = r.normal();
      const double u_vwap = r.uniform();
      const double n_volume = r.normal();
      const double n_fund = r.normal();

      double common = idio;
      for (std::size_t k = 0; k < nf; ++k) common += loading[i][k] * factors[k];
      const double eps = common / loading_norm[i];

      double close = 100.0;
      double open = 100.0 * (1.0 + 0.25 * cfg.noise_vol * n_open);
      if (t > 0) {
        double ret = mkt + cfg.noise_vol * (rho * prev_z[i] + resid * eps);
        ret = std::max(ret, -0.9);
        close = prev_close[i] * (1.0 + ret);
        open = prev_close[i] * (1.0 + 0.25 * cfg.noise_vol * n_open);
      }
      const double high = std::max(open, close) * (1.0 + 0.5 * cfg.noise_vol * std::fabs(n_high));
      const double low = std::min(open, close) / (1.0 + 0.5 * cfg.noise_vol * std::fabs(n_low));
      mk.bars.open.at(t, i) = open;
      mk.bars.high.at(t, i) = high;
      mk.bars.low.at(t, i) = low;
      mk.bars.close.at(t, i) = close;
      mk.bars.vwap.at(t, i) = low + (high - low) * u_vwap;
      mk.bars.volume.at(t, i) = std::exp(std::log(1.0e6) + 0.5 * n_volume);
      out.planted_signal.at(t, i) = z;

      fundamental[i] += 0.05 * n_fund;
      if (t % kFundamentalEveryDays == 0)
        mk.fundamental_records.push_back({dates[t], ids[i], fundamental[i]});

      prev_z[i] = z;
      prev_close[i] = close;
    }

    if (t % kGraphEpochDays == 0 && cfg.graph_density > 0.0 && n >= 2) {
      const std::size_t n_edges =
          static_cast<std::size_t>(std::llround(cfg.graph_density * static_cast<double>(n) / 2.0));
      const Date to = advance_business_days(dates[t], kGraphEpochDays);
      for (std::size_t e = 0; e < n_edges; ++e) {
        const std::size_t a = graph_rng.below(n);
        const bool same_sector = graph_rng.uniform() < 0.7;
        std::size_t b = graph_rng.below(n);
        for (int tries = 0; same_sector && sector[b] != sector[a] && tries < 32; ++tries)
          b = graph_rng.below(n);
        if (a == b) continue;
        const bool tagged_sector = sector[a] == sector[b];
        mk.graph.add({ids[a], ids[b], tagged_sector ? "sector" : "peer", dates[t], to});
      }
    }
  }

  for (std::size_t k = 0; k < m; ++k) mk.fields.emplace("x" + std::to_string(k), std::move(planted[k]));
  mk.fields.emplace("fundamental", fundamentals_as_of(mk.fundamental_records, cal, inst));
  mk.universe = full_universe(*inst, dates.front());

  // Ground-truth bookkeeping per rotation segment.
  const RealizedIc ric = realized_ic(out);
  const std::size_t seg = cfg.drift_period == 0 ? days : cfg.drift_period;
  for (std::size_t start = 0; start < days; start += seg) {
    RegimeTruth rt;
    rt.first_day = start;
    rt.last_day = std::min(days, start + seg) - 1;
    rt.dominant_field = cfg.drift_period == 0 ? 0 : (start / seg) % m;
    double sum = 0.0;
    std::size_t cnt = 0;
    for (std::size_t t = rt.first_day; t <= rt.last_day; ++t)
      if (ric.per_date[t]) {
        sum += *ric.per_date[t];
        ++cnt;
      }
    rt.realized_ic = cnt ? sum / static_cast<double>(cnt) : 0.0;
    out.truth.regimes.push_back(rt);
  }
  out.truth.mean_realized_ic = ric.mean;
  return out;
}

RealizedIc realized_ic(const MarketBundle& bundle) {
  const BarPanel& bars = bundle.market.bars;
  RealizedIc out;
  out.per_date.assign(bars.rows(), kMissing);
  double sum = 0.0;
  std::vector<double> a, b;
  for (std::size_t t = 0; t + 1 < bars.rows(); ++t) {
    a.clear();
    b.clear();
    for (std::size_t i = 0; i < bars.cols(); ++i) {
      const Cell& z = bundle.planted_signal.at(t, i);
      const Cell& c0 = bars.close.at(t, i);
      const Cell& c1 = bars.close.at(t + 1, i);
      if (z && c0 && c1) {
        a.push_back(*z);
        b.push_back(*c1 / *c0 - 1.0);
      }
    }
    if (a.size() < 3) continue;
    if (auto c = stats::pearson(a, b)) {
      out.per_date[t] = *c;
      sum += *c;
      ++out.n_dates;
    }
  }
  out.mean = out.n_dates ? sum / static_cast<double>(out.n_dates) : 0.0;
  return out;
}

}  // namespace qf
