#include "qf/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <set>

#include "qf/error.hpp"
#include "qf/parallel.hpp"
#include "qf/random.hpp"
#include "qf/stats.hpp"

namespace qf {

std::string_view to_string(SplitScheme s) {
  switch (s) {
    case SplitScheme::Tail: return "tail";
    case SplitScheme::Random: return "random";
    case SplitScheme::Fragmented: return "fragmented";
  }
  return "tail";
}

SplitScheme split_scheme_from_string(std::string_view s) {
  if (s == "tail") return SplitScheme::Tail;
  if (s == "random") return SplitScheme::Random;
  if (s == "fragmented") return SplitScheme::Fragmented;
  throw ValidationError("unknown split scheme '" + std::string(s) + "'");
}

namespace {

// k distinct values from [0, n), ascending, by partial Fisher-Yates.
std::vector<std::size_t> sample_without_replacement(Rng& rng, std::size_t n, std::size_t k) {
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t j = 0; j < k; ++j) std::swap(pool[j], pool[j + rng.below(n - j)]);
  pool.resize(k);
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace

SplitResult split_dates(const std::vector<std::size_t>& dates, const SplitSpec& spec) {
  const std::size_t n = dates.size();
  if (n < 10) throw ValidationError("split_dates: need at least 10 dates, got " + std::to_string(n));
  if (!(spec.valid_fraction > 0.0 && spec.valid_fraction < 1.0))
    throw ValidationError("split_dates: valid_fraction must be in (0, 1)");
  const auto nv = static_cast<std::size_t>(std::ceil(spec.valid_fraction * static_cast<double>(n)));
  if (nv >= n) throw ValidationError("split_dates: validation set would leave no training dates");

  std::vector<char> is_valid(n, 0);
  switch (spec.scheme) {
    case SplitScheme::Tail:
      std::fill(is_valid.begin() + static_cast<std::ptrdiff_t>(n - nv), is_valid.end(), 1);
      break;
    case SplitScheme::Random: {
      Rng rng(spec.seed, 0x5B11ull);
      for (std::size_t k : sample_without_replacement(rng, n, nv)) is_valid[k] = 1;
      break;
    }
    case SplitScheme::Fragmented: {
      const std::size_t k = spec.n_fragments;
      if (k < 2) throw ValidationError("split_dates: n_fragments must be >= 2");
      if (nv < k) throw ValidationError("split_dates: fewer validation dates than fragments");
      const std::size_t free = n - nv;
      if (free + 1 < k) throw ValidationError("split_dates: not enough training dates to separate fragments");
      // Fragments keep at least one training date between them; the
      // remaining slack is spread by a seeded stars-and-bars draw.
      const std::size_t slack = free - (k - 1);
      Rng rng(spec.seed, 0xF4A6ull);
      const std::vector<std::size_t> bars = sample_without_replacement(rng, slack + k, k);
      std::size_t pos = 0;
      for (std::size_t j = 0; j < k; ++j) {
        const std::size_t gap = j == 0 ? bars[0] : bars[j] - bars[j - 1] - 1;
        pos += gap + (j == 0 ? 0 : 1);
        const std::size_t len = nv / k + (j < nv % k ? 1 : 0);
        for (std::size_t q = 0; q < len; ++q) is_valid[pos + q] = 1;
        pos += len;
      }
      break;
    }
  }
  SplitResult r;
  for (std::size_t k = 0; k < n; ++k) (is_valid[k] ? r.valid : r.train).push_back(dates[k]);
  return r;
}

void ExperimentConfig::validate() const {
  if (factors.empty()) throw ValidationError("config: [factors] must list at least one factor");
  if (label_horizon < 1) throw ValidationError("config: label horizon must be >= 1");
  objective.validate();
  if (roll.train_months < 1) throw ValidationError("config: roll.train_months must be >= 1");
  if (portfolio.k < 1 || portfolio.rebalance_every < 1)
    throw ValidationError("config: portfolio.k and portfolio.rebalance_every must be >= 1");
  if (portfolio.method != "topk" && portfolio.method != "mv")
    throw ValidationError("config: portfolio.method must be 'topk' or 'mv'");
  portfolio.costs.validate();
  if (ensemble.n_runs < 1) throw ValidationError("config: ensemble.n_runs must be >= 1");
  if (decay_horizon < 1) throw ValidationError("config: decay horizon must be >= 1");
  for (const auto& [key, values] : tuning.grid)
    if (values.empty()) throw ValidationError("config: tuning grid entry '" + key + "' has no values");
  if (data.dir.empty()) data.synth.validate();
}

void ExperimentConfig::set_seed(std::uint64_t seed) {
  data.synth.seed = seed;
  fit.seed = seed;
  split.seed = seed;
  ensemble.base_seed = seed;
}

MarketData load_market(const DataSpec& data) {
  if (!data.dir.empty()) return MarketData::load(data.dir);
  return generate(data.synth).market;
}

std::vector<ParamPoint> enumerate_grid(const ParamGrid& grid) {
  std::vector<ParamPoint> points{ParamPoint{}};
  for (const auto& [key, values] : grid) {
    std::vector<ParamPoint> next;
    for (const ParamPoint& p : points)
      for (double v : values) {
        ParamPoint q = p;
        q.emplace_back(key, v);
        next.push_back(std::move(q));
      }
    points = std::move(next);
  }
  return points;
}

void apply_params(const ParamPoint& p, FitConfig& fit, ObjectiveSpec& obj) {
  for (const auto& [key, v] : p) {
    if (key == "learning_rate") fit.learning_rate = v;
    else if (key == "l2") fit.l2 = v;
    else if (key == "epochs") {
      if (!(v >= 0.0) || v != std::floor(v)) throw ValidationError("grid: epochs must be a nonnegative integer");
      fit.epochs = static_cast<std::size_t>(v);
    } else if (key == "init_scale") fit.init_scale = v;
    else if (key == "row_subsample") fit.row_subsample = v;
    else if (key == "combo_alpha") obj.combo_alpha = v;
    else throw ValidationError("grid: unknown parameter '" + key + "'");
  }
}

std::optional<double> validation_ic(const LinearModel& model, const FeatureMatrix& m) {
  std::map<std::size_t, std::pair<std::vector<double>, std::vector<double>>> by_date;
  std::vector<double> raw(m.n_features);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t f = 0; f < m.n_features; ++f) raw[f] = m.at(r, f);
    auto& [p, y] = by_date[m.date_index[r]];
    p.push_back(model.score(raw));
    y.push_back(m.y[r]);
  }
  std::vector<double> ics;
  for (const auto& [d, py] : by_date) {
    if (py.first.size() < 3) continue;
    if (auto c = stats::pearson(py.first, py.second)) ics.push_back(*c);
  }
  if (ics.empty()) return std::nullopt;
  return stats::mean(ics);
}

namespace {

FeatureMatrix rows_on_dates(const FeatureMatrix& m, const std::vector<std::size_t>& dates) {
  const std::set<std::size_t> keep(dates.begin(), dates.end());
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < m.rows(); ++r)
    if (keep.count(m.date_index[r])) rows.push_back(r);
  return select_rows(m, rows);
}

}  // namespace

TuneResult tune(const FeatureMatrix& data, const std::vector<std::size_t>& train_dates, const ParamGrid& grid,
                const SplitSpec& split, bool retrain, const ObjectiveSpec& objective, const FitConfig& fit_cfg) {
  const std::vector<ParamPoint> points = enumerate_grid(grid);
  if (grid.empty() || points.empty()) throw ValidationError("tune: empty grid");
  TuneResult out;
  out.split = split_dates(train_dates, split);
  const FeatureMatrix fit_rows = rows_on_dates(data, out.split.train);
  const FeatureMatrix valid_rows = rows_on_dates(data, out.split.valid);

  std::optional<std::size_t> best;
  std::vector<LinearModel> models(points.size());
  std::string last_error;
  for (std::size_t g = 0; g < points.size(); ++g) {
    FitConfig fc = fit_cfg;
    ObjectiveSpec os = objective;
    std::optional<double> score;
    try {
      apply_params(points[g], fc, os);
      models[g] = fit(fit_rows, os, fc);
      score = validation_ic(models[g], valid_rows);
      if (score && !std::isfinite(*score)) score.reset();
      if (!score) last_error = "no scorable validation date";
    } catch (const Error& e) {
      last_error = e.what();
    }
    out.valid_scores.push_back(score);
    if (score && (!best || *score > *out.valid_scores[*best])) best = g;
  }
  if (!best) throw NumericError("tune: every grid point failed (last error: " + last_error + ")");
  out.best_params = points[*best];
  if (retrain) {
    FitConfig fc = fit_cfg;
    ObjectiveSpec os = objective;
    apply_params(out.best_params, fc, os);
    out.final_model = fit(data, os, fc);
  } else {
    out.final_model = std::move(models[*best]);
  }
  return out;
}

std::vector<std::pair<std::string, Panel>> evaluate_features(const ExperimentConfig& cfg, const MarketData& market) {
  const factor::DataView view = factor::DataView::of(market);
  std::vector<std::pair<std::string, Panel>> out;
  for (const auto& f : cfg.factors) out.emplace_back(f.name, factor::evaluate(*f.expr, view));
  return out;
}

WalkForwardResult walk_forward(const ExperimentConfig& cfg, const MarketData& market, std::size_t threads) {
  cfg.validate();
  const TradingCalendar& cal = market.bars.calendar();
  const std::size_t n = cal.size();
  const std::size_t train_len = cfg.roll.train_months * kTradingDaysPerMonth;
  const auto h = static_cast<std::size_t>(cfg.label_horizon);

  std::size_t first = train_len;
  if (cfg.roll.test_start) {
    first = cal.upper_index(Date(cfg.roll.test_start->days() - 1));  // first row on or after test_start
  }
  std::size_t last = n - 1;
  if (cfg.roll.test_end) {
    const std::size_t up = cal.upper_index(*cfg.roll.test_end);
    if (up == 0) throw ValidationError("walk_forward: test_end precedes the calendar");
    last = up - 1;
  }
  if (first >= n || first > last) throw ValidationError("walk_forward: empty test range");
  if (first < train_len)
    throw ValidationError("walk_forward: train window of " + std::to_string(train_len) +
                          " days extends before data start " + cal.front().to_string());
  if (train_len <= h) throw ValidationError("walk_forward: train window shorter than the label horizon");

  // test spans
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  const std::size_t step = cfg.roll.roll_step * kTradingDaysPerMonth;
  if (step == 0) spans.emplace_back(first, last);
  else
    for (std::size_t a = first; a <= last; a += step) spans.emplace_back(a, std::min(a + step - 1, last));

  const auto feats = evaluate_features(cfg, market);
  std::vector<std::pair<std::string, const Panel*>> feat_ptrs;
  std::map<std::string, Panel> feat_map;
  for (const auto& [name, p] : feats) {
    feat_ptrs.emplace_back(name, &p);
    feat_map.emplace(name, p);
  }
  if (feat_map.size() != feats.size()) throw ValidationError("config: duplicate factor names");
  const Panel labels = forward_returns(market.bars, cfg.label_horizon);

  WalkForwardResult out;
  out.test_first_row = first;
  out.test_last_row = last;
  out.rolls.resize(spans.size());
  out.models.resize(spans.size());
  std::vector<SignalFrame> preds(spans.size());

  parallel_for(spans.size(), threads, [&](std::size_t r) {
    const auto [a, b] = spans[r];
    const std::size_t lo = cfg.roll.expanding ? first - train_len : a - train_len;
    const std::size_t hi = a - h;  // last train row whose label is realized by a
    std::vector<std::size_t> train_dates;
    for (std::size_t t = lo; t <= hi; ++t) train_dates.push_back(t);
    const FeatureMatrix fm = build_feature_matrix(feat_ptrs, labels, train_dates);

    RollRecord rec;
    rec.index = r;
    rec.test_first = cal[a];
    rec.test_last = cal[b];
    LinearModel model;
    if (cfg.tuning.grid.empty()) {
      model = fit(fm, cfg.objective, cfg.fit);
      rec.n_train_dates = train_dates.size();
      rec.n_train_rows = fm.rows();
    } else {
      TuneResult tr = tune(fm, train_dates, cfg.tuning.grid, cfg.split, cfg.tuning.retrain, cfg.objective, cfg.fit);
      model = std::move(tr.final_model);
      rec.params = tr.best_params;
      for (std::size_t g = 0; g < tr.valid_scores.size(); ++g)
        if (enumerate_grid(cfg.tuning.grid)[g] == tr.best_params) rec.valid_score = tr.valid_scores[g];
      rec.n_train_dates = cfg.tuning.retrain ? train_dates.size() : tr.split.train.size();
      rec.n_valid_dates = tr.split.valid.size();
      rec.n_train_rows = fm.rows();
    }
    if (fm.rows() == 0) throw ValidationError("walk_forward: roll " + std::to_string(r) + " has no training rows");
    std::set<std::size_t> used(fm.date_index.begin(), fm.date_index.end());
    rec.train_first = cal[*used.begin()];
    rec.train_last = cal[*used.rbegin()];
    rec.final_loss = model.final_loss;
    preds[r] = predict(model, feat_map, a, b);
    out.rolls[r] = std::move(rec);
    out.models[r] = std::move(model);
  });

  out.oos_signal = SignalFrame(market.bars.close.calendar_ptr(), market.bars.close.instruments_ptr());
  for (std::size_t r = 0; r < spans.size(); ++r)
    for (std::size_t t = spans[r].first; t <= spans[r].second; ++t)
      for (std::size_t i = 0; i < out.oos_signal.cols(); ++i) out.oos_signal.at(t, i) = preds[r].at(t, i);
  return out;
}

EvaluationReport evaluate_signal(const ExperimentConfig& cfg, const MarketData& market, const SignalFrame& signal) {
  EvaluationReport rep;
  const Panel labels = forward_returns(market.bars, cfg.label_horizon);
  rep.ic_pearson = information_coefficient(signal, labels, IcMethod::Pearson);
  rep.ic_spearman = information_coefficient(signal, labels, IcMethod::Spearman);
  const std::size_t horizon = std::min(cfg.decay_horizon, market.bars.rows() - 1);
  rep.decay = alpha_decay(signal, market.bars, horizon);
  const UniverseTimeline universe =
      market.universe.empty() ? full_universe(market.bars.instruments(), market.bars.calendar().front())
                              : market.universe;
  if (cfg.portfolio.method == "mv") {
    MVConfig mv = cfg.portfolio.mv;
    mv.rebalance_every = cfg.portfolio.rebalance_every;
    rep.weights = mean_variance_weights(signal, market.bars, universe, mv);
  } else {
    rep.weights = top_k_weights(signal, universe, cfg.portfolio.k, cfg.portfolio.rebalance_every);
  }
  rep.curve = run_backtest(rep.weights, market.bars, cfg.portfolio.costs);
  if (rep.curve.size() >= 2) rep.portfolio = portfolio_stats(rep.curve);
  return rep;
}

EnsembleResult run_ensemble(const ExperimentConfig& cfg, const MarketData& market, std::size_t threads) {
  if (cfg.ensemble.n_runs < 2) throw ValidationError("run_ensemble: n_runs must be >= 2");
  const std::size_t m = cfg.ensemble.n_runs;
  EnsembleResult out;
  out.runs.resize(m);
  out.run_reports.resize(m);
  for (std::size_t i = 0; i < m; ++i) out.seeds.push_back(cfg.ensemble.base_seed + i);
  parallel_for(m, threads, [&](std::size_t i) {
    ExperimentConfig c = cfg;
    c.fit.seed = out.seeds[i];
    c.split.seed = out.seeds[i];
    try {
      out.runs[i] = walk_forward(c, market, 1);
      out.run_reports[i] = evaluate_signal(c, market, out.runs[i].oos_signal);
    } catch (const Error& e) {
      throw NumericError("ensemble run " + std::to_string(i) + " (seed " + std::to_string(out.seeds[i]) +
                         ") failed: " + e.what());
    }
  });
  std::vector<const SignalFrame*> frames;
  for (const auto& r : out.runs) frames.push_back(&r.oos_signal);
  out.ensemble = ensemble_mean(frames);
  out.ensemble_report = evaluate_signal(cfg, market, out.ensemble);
  out.correlation = signal_correlation(frames);
  return out;
}

}  // namespace qf
