// Acceptance suite: one PASS/FAIL line per criterion. Exits nonzero if any
// criterion fails.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "qf/factor/eval.hpp"
#include "qf/factor/parser.hpp"
#include "qf/harness.hpp"
#include "qf/metrics.hpp"
#include "qf/synth.hpp"
#include "support/oracles.hpp"

#ifndef QF_CLI_PATH
#error "QF_CLI_PATH must name the qf executable"
#endif

using namespace qf;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string sci(double v) { return fmt("%.2e", v); }

bool same_bits(const Cell& a, const Cell& b) {
  if (a.has_value() != b.has_value()) return false;
  return !a || std::bit_cast<std::uint64_t>(*a) == std::bit_cast<std::uint64_t>(*b);
}

// Rows 0..t of two panels on the same axes are bit-identical.
bool same_prefix(const Panel& a, const Panel& b, std::size_t t) {
  if (!a.same_axes(b)) return false;
  for (std::size_t r = 0; r <= t && r < a.rows(); ++r)
    for (std::size_t i = 0; i < a.cols(); ++i)
      if (!same_bits(a.at(r, i), b.at(r, i))) return false;
  return true;
}

factor::NamedFactor named(const std::string& text) { return {text, text, factor::parse(text)}; }

// 1 ------------------------------------------------------------------------

Outcome planted_ic() {
  SynthConfig c;
  c.n_instruments = 200;
  c.n_days = 500;
  c.signal_ic = 0.10;
  c.seed = 1;
  const MarketBundle b = generate(c);
  const Panel fwd = forward_returns(b.market.bars, 1);
  const Panel& x0 = b.market.fields.at("x0");
  const double ic = information_coefficient(x0, fwd, IcMethod::Pearson).ic_mean;
  const testing::NaiveIc n = testing::naive_ic(x0, fwd);
  const double oracle = testing::tb_mean(n.series);
  const bool ok = ic >= 0.08 && ic <= 0.12 && std::fabs(ic - oracle) <= 1e-12;
  return {ok, "ic_mean=" + fmt("%.4f", ic) + " (naive " + fmt("%.4f", oracle) + ") in [0.08, 0.12]"};
}

// 2 ------------------------------------------------------------------------

Outcome gradients() {
  Rng rng(2024);
  double worst = 0.0;
  std::string worst_kind;
  for (auto k : {ObjectiveKind::MSE, ObjectiveKind::IC, ObjectiveKind::RANK, ObjectiveKind::CLF, ObjectiveKind::COMBO}) {
    ObjectiveSpec spec;
    spec.kind = k;
    if (k == ObjectiveKind::COMBO) spec.combo_alpha = 0.5;
    for (int trial = 0; trial < 50; ++trial) {
      const std::size_t dates = 1 + rng.below(6);
      std::vector<double> p, y;
      std::vector<std::size_t> d;
      for (std::size_t g = 0; g < dates; ++g) {
        const std::size_t rows = 3 + rng.below(15);
        for (std::size_t r = 0; r < rows; ++r) {
          d.push_back(g);
          y.push_back(rng.normal());
          p.push_back(0.5 * y.back() + rng.normal());
        }
      }
      const std::uint64_t seed = rng.next_u64();
      const LossGrad lg = objective(spec, p, y, d, seed);
      const double e = testing::fd_max_rel_error(
          [&](const std::vector<double>& q) { return objective(spec, q, y, d, seed).loss; }, p, lg.grad);
      if (e > worst) {
        worst = e;
        worst_kind = std::string(to_string(k));
      }
    }
  }
  return {worst < 1e-5, "max relative error " + sci(worst) + (worst_kind.empty() ? "" : " (" + worst_kind + ")") +
                            " < 1e-05 over 5 objectives x 50 batches"};
}

// 3 ------------------------------------------------------------------------

ExperimentConfig lookahead_experiment() {
  ExperimentConfig c;
  c.data.synth.n_instruments = 30;
  c.data.synth.n_days = 260;
  c.data.synth.seed = 7;
  c.data.synth.signal_ic = 0.2;
  c.factors = factor::builtin_library();
  c.factors.push_back(named("x0"));
  c.factors.push_back(named("x1"));
  c.roll.train_months = 3;
  c.roll.roll_step = 3;
  c.fit.epochs = 30;
  c.portfolio.k = 5;
  return c;
}

void mutate_after(MarketData& m, std::size_t t, Rng& rng) {
  BarPanel& b = m.bars;
  for (std::size_t r = t + 1; r < b.rows(); ++r)
    for (std::size_t i = 0; i < b.cols(); ++i) {
      if (!b.close.at(r, i)) continue;
      const double s = rng.uniform(0.5, 1.5);
      for (Panel* p : {&b.open, &b.high, &b.low, &b.close, &b.vwap})
        if (p->at(r, i)) p->at(r, i) = *p->at(r, i) * s;
      if (b.volume.at(r, i)) b.volume.at(r, i) = *b.volume.at(r, i) * rng.uniform(0.2, 5.0);
    }
  for (auto& [name, f] : m.fields)
    for (std::size_t r = t + 1; r < f.rows(); ++r)
      for (std::size_t i = 0; i < f.cols(); ++i)
        if (f.at(r, i)) f.at(r, i) = *f.at(r, i) + rng.normal();
}

Outcome no_lookahead() {
  const ExperimentConfig cfg = lookahead_experiment();
  const MarketData base = load_market(cfg.data);
  Rng rng(33);
  std::vector<factor::ExprPtr> exprs;
  for (const auto& f : cfg.factors) exprs.push_back(f.expr);
  testing::TreeGen gen;
  for (int k = 0; k < 20; ++k) exprs.push_back(testing::random_tree(rng, gen, 2 + rng.below(4)));

  const factor::DataView bview = factor::DataView::of(base);
  std::vector<Panel> base_eval;
  for (const auto& e : exprs) base_eval.push_back(factor::evaluate(*e, bview));
  const WalkForwardResult base_wf = walk_forward(cfg, base, 1);
  const EvaluationReport base_rep = evaluate_signal(cfg, base, base_wf.oos_signal);
  const TradingCalendar& cal = base.bars.calendar();

  std::size_t bad_a = 0, bad_b = 0, bad_c = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t lo = base_wf.test_first_row;
    const std::size_t t = lo + rng.below(cal.size() - 2 - lo);
    MarketData m = base;
    mutate_after(m, t, rng);
    const factor::DataView view = factor::DataView::of(m);
    for (std::size_t k = 0; k < exprs.size(); ++k)
      if (!same_prefix(factor::evaluate(*exprs[k], view), base_eval[k], t)) ++bad_a;
    const WalkForwardResult wf = walk_forward(cfg, m, 1);
    if (!same_prefix(wf.oos_signal, base_wf.oos_signal, t)) ++bad_b;
    const EvaluationReport rep = evaluate_signal(cfg, m, wf.oos_signal);
    for (std::size_t k = 0; k < base_rep.curve.size() && base_rep.curve.dates[k] <= cal[t]; ++k)
      if (k >= rep.curve.size() || std::bit_cast<std::uint64_t>(rep.curve.nav[k]) !=
                                       std::bit_cast<std::uint64_t>(base_rep.curve.nav[k])) {
        ++bad_c;
        break;
      }
  }
  const bool ok = bad_a == 0 && bad_b == 0 && bad_c == 0;
  return {ok, "20 mutations, " + std::to_string(exprs.size()) + " factors: differing factor panels " +
                  std::to_string(bad_a) + ", signal frames " + std::to_string(bad_b) + ", nav paths " +
                  std::to_string(bad_c)};
}

// 4 ------------------------------------------------------------------------

Outcome dsl() {
  Rng rng(44);
  testing::TreeGen gen;
  std::size_t mismatches = 0, cells = 0;
  for (int k = 0; k < 200; ++k) {
    const std::size_t rows = 4 + rng.below(9), cols = 2 + rng.below(5);
    BarPanel bars = testing::random_bars(rng, rows, cols, 0.08);
    std::map<std::string, Panel> fields;
    Panel x0 = testing::random_panel(rng, bars.close.calendar_ptr(), bars.close.instruments_ptr(), -2, 2, 0.1);
    for (std::size_t t = 0; t < x0.rows(); ++t)
      for (std::size_t i = 0; i < x0.cols(); ++i)
        if (Cell& c = x0.at(t, i); c && rng.uniform() < 0.5) c = std::round(*c);
    fields["x0"] = std::move(x0);
    const GraphTimeline graph = testing::random_graph(rng, bars.calendar(), bars.instruments(), 2 * cols);
    const factor::ExprPtr e = testing::random_tree(rng, gen, 1 + rng.below(5));
    const Panel fast = factor::evaluate(*e, factor::DataView{&bars, &fields, &graph});
    const testing::NaiveContext ctx{&bars, &fields, &graph};
    for (std::size_t t = 0; t < rows; ++t)
      for (std::size_t i = 0; i < cols; ++i) {
        ++cells;
        const Cell slow = testing::naive_eval(*e, ctx, t, i), got = fast.at(t, i);
        if (got.has_value() != slow.has_value() ||
            (got && std::fabs(*got - *slow) > 1e-12 * std::max(1.0, std::fabs(*slow))))
          ++mismatches;
      }
  }
  std::size_t round_trip_failures = 0;
  for (int k = 0; k < 1000; ++k) {
    const factor::ExprPtr e = testing::random_tree(rng, gen, 1 + rng.below(6));
    const std::string text = factor::format(*e);
    const factor::ExprPtr back = factor::parse(text);
    if (!(*back == *e) || factor::format(*back) != text) ++round_trip_failures;
  }
  const bool ok = mismatches == 0 && round_trip_failures == 0;
  return {ok, "200 trees: " + std::to_string(mismatches) + "/" + std::to_string(cells) +
                  " cells off by > 1e-12; 1000 trees: " + std::to_string(round_trip_failures) +
                  " parse(format) failures"};
}

// 5 ------------------------------------------------------------------------

Outcome metrics() {
  Rng rng(55);
  double worst = 0.0;
  bool structure = true;
  auto track = [&](double a, double b) {
    worst = std::max(worst, std::fabs(a - b) / std::max({1.0, std::fabs(a), std::fabs(b)}));
  };
  for (int k = 0; k < 50; ++k) {
    const auto cal = testing::make_calendar(5 + rng.below(30));
    const auto inst = testing::make_instruments(3 + rng.below(15));
    const Panel s = testing::random_panel(rng, cal, inst, -1, 1, 0.15);
    const Panel f = testing::random_panel(rng, cal, inst, -0.05, 0.05, 0.15);
    const testing::NaiveIc n = testing::naive_ic(s, f);
    if (n.series.empty()) continue;
    const SignalReport p = information_coefficient(s, f, IcMethod::Pearson);
    if (p.ic_series.size() != n.series.size()) {
      structure = false;
      continue;
    }
    for (std::size_t d = 0; d < n.series.size(); ++d) track(p.ic_series[d], n.series[d]);
    track(p.ic_mean, testing::tb_mean(n.series));
    const auto sd = testing::tb_sample_std(n.series);
    track(p.ic_std, sd.value_or(0.0));
    if (sd && *sd > 0.0) {
      if (!p.icir) structure = false;
      else track(*p.icir, testing::tb_mean(n.series) / *sd);
    }
  }
  for (int k = 0; k < 50; ++k) {
    const std::size_t n = 3 + rng.below(400);
    std::vector<double> net(n), turnover(n);
    for (std::size_t t = 0; t < n; ++t) {
      net[t] = 0.01 * rng.normal() + 0.0003;
      turnover[t] = rng.uniform() < 0.5 ? rng.uniform() : 0.0;
    }
    const EquityCurve c = testing::curve_from_returns(net, turnover);
    const PortfolioReport r = portfolio_stats(c);
    const testing::NaiveStats o = testing::naive_portfolio_stats(c.nav, c.net, c.turnover);
    track(r.ann_return, o.ann_return);
    track(r.ann_vol, o.ann_vol);
    track(r.max_drawdown, o.max_drawdown);
    track(r.avg_turnover, o.avg_turnover);
    if (r.sharpe.has_value() != o.sharpe.has_value()) structure = false;
    else if (r.sharpe) track(*r.sharpe, *o.sharpe);
  }
  for (int k = 0; k < 50; ++k) {
    const auto cal = testing::make_calendar(4 + rng.below(10));
    const auto inst = testing::make_instruments(3 + rng.below(6));
    const std::size_t m = 2 + rng.below(5);
    std::vector<Panel> frames;
    for (std::size_t q = 0; q < m; ++q) frames.push_back(testing::random_panel(rng, cal, inst, -1, 1, 0.3));
    std::vector<const SignalFrame*> ptrs;
    for (const auto& f : frames) ptrs.push_back(&f);
    const Matrix c = signal_correlation(ptrs);
    for (std::size_t a = 0; a < m; ++a)
      for (std::size_t b = 0; b < m; ++b) {
        std::vector<double> x, y;
        for (std::size_t t = 0; t < cal->size(); ++t)
          for (std::size_t i = 0; i < inst->size(); ++i)
            if (frames[a].at(t, i) && frames[b].at(t, i)) {
              x.push_back(*frames[a].at(t, i));
              y.push_back(*frames[b].at(t, i));
            }
        track(c[a][b], a == b ? 1.0 : *testing::tb_corr(x, y));
      }
  }
  return {structure && worst <= 1e-10, "max relative deviation " + sci(worst) + " <= 1e-10 over 150 instances"};
}

// 6 ------------------------------------------------------------------------

Outcome backtest() {
  Rng rng(66);
  double oracle_err = 0.0;
  for (int k = 0; k < 50; ++k) {
    const BarPanel bars = testing::random_bars(rng, 20 + rng.below(60), 2 + rng.below(8));
    WeightSeries w;
    const std::size_t every = 1 + rng.below(5);
    for (std::size_t t = rng.below(bars.rows() / 2); t < bars.rows(); t += every) {
      std::map<std::string, double> m;
      double s = 0.0;
      for (std::size_t i = 0; i < bars.cols(); ++i)
        if (rng.uniform() < 0.7) s += m[bars.instruments()[i]] = rng.uniform(0.01, 1.0);
      if (m.empty()) m[bars.instruments()[0]] = s = 1.0;
      for (auto& [id, v] : m) v /= s;
      w.rebalance_dates.push_back(bars.calendar()[t]);
      w.weights.push_back(std::move(m));
    }
    const CostModel costs{rng.uniform(0.0, 0.003), rng.uniform(0.0, 0.002)};
    const EquityCurve c = run_backtest(w, bars, costs);
    const testing::OracleCurve o = testing::share_oracle(w, bars, costs.total());
    if (c.size() != o.nav.size()) return {false, "curve length differs from the oracle"};
    for (std::size_t t = 0; t < c.size(); ++t)
      oracle_err = std::max({oracle_err, std::fabs(c.nav[t] - o.nav[t]), std::fabs(c.turnover[t] - o.turnover[t])});
  }

  // buy and hold, rebalanced daily to 100% of a single asset at zero cost
  double hold_err = 0.0;
  for (int k = 0; k < 20; ++k) {
    const BarPanel bars = testing::random_bars(rng, 30 + rng.below(200), 1);
    WeightSeries w;
    for (std::size_t t = 0; t < bars.rows(); ++t) {
      w.rebalance_dates.push_back(bars.calendar()[t]);
      w.weights.push_back({{bars.instruments()[0], 1.0}});
    }
    const EquityCurve c = run_backtest(w, bars, CostModel{0.0, 0.0});
    const double cum = *bars.close.at(bars.rows() - 1, 0) / *bars.close.at(0, 0);
    hold_err = std::max(hold_err, std::fabs(c.nav.back() / c.nav.front() - cum) / cum);
  }

  // static targets: every rebalance asks for the drifted weights
  double static_turnover = 0.0;
  for (int k = 0; k < 20; ++k) {
    const BarPanel bars = testing::random_bars(rng, 20 + rng.below(60), 2 + rng.below(8));
    std::vector<double> shares(bars.cols());
    for (std::size_t i = 0; i < bars.cols(); ++i) shares[i] = rng.uniform(0.1, 1.0) / *bars.close.at(0, i);
    WeightSeries w;
    for (std::size_t t = 0; t < bars.rows(); ++t) {
      double value = 0.0;
      for (std::size_t i = 0; i < bars.cols(); ++i) value += shares[i] * *bars.close.at(t, i);
      std::map<std::string, double> m;
      for (std::size_t i = 0; i < bars.cols(); ++i) m[bars.instruments()[i]] = shares[i] * *bars.close.at(t, i) / value;
      w.rebalance_dates.push_back(bars.calendar()[t]);
      w.weights.push_back(std::move(m));
    }
    const EquityCurve c = run_backtest(w, bars, CostModel{});
    for (std::size_t t = 1; t < c.size(); ++t) static_turnover = std::max(static_turnover, c.turnover[t]);
  }
  const bool ok = oracle_err <= 1e-10 && hold_err <= 1e-12 && static_turnover <= 1e-12;
  return {ok, "oracle deviation " + sci(oracle_err) + " <= 1e-10; buy-and-hold relative error " + sci(hold_err) +
                  "; static-target turnover after inception " + sci(static_turnover)};
}

// 7 ------------------------------------------------------------------------

Outcome mean_variance_solver() {
  Rng rng(77);
  double grid_err = 0.0;
  for (int k = 0; k < 50; ++k) {
    const MVProblem p = testing::random_problem(rng, 2);
    const MVSolution sol = mean_variance(p);
    const double lo = std::max(0.0, 1.0 - p.w_max), hi = std::min(1.0, p.w_max);
    double best = lo, best_f = -1e300;
    for (int g = 0; g <= 100000; ++g) {
      const double a = lo + (hi - lo) * g / 100000.0;
      const Eigen::Vector2d w(a, 1.0 - a);
      const double f = w.dot(p.mu) - 0.5 * p.gamma * w.dot(p.sigma * w);
      if (f > best_f) {
        best_f = f;
        best = a;
      }
    }
    grid_err = std::max(grid_err, std::fabs(sol.weights[0] - best));
  }
  double kkt = 0.0;
  for (int k = 0; k < 100; ++k) {
    const MVProblem p = testing::random_problem(rng, 1 + rng.below(10));
    const MVSolution sol = mean_variance(p);
    kkt = std::max({kkt, sol.kkt_residual, testing::kkt_violation(p, sol.weights)});
  }
  double sym_err = 0.0;
  for (int k = 0; k < 50; ++k) {
    const std::size_t n = 2 + rng.below(9);
    MVProblem p;
    p.mu = Eigen::VectorXd::Constant(n, rng.normal());
    const double a = rng.uniform(0.01, 1.0), b = rng.uniform(0.0, 0.5);
    p.sigma = a * Eigen::MatrixXd::Identity(n, n) + b * Eigen::MatrixXd::Ones(n, n);
    p.gamma = rng.uniform(0.5, 10.0);
    p.w_max = rng.uniform(1.0 / static_cast<double>(n), 1.0);
    const MVSolution sol = mean_variance(p);
    sym_err = std::max(sym_err, (sol.weights.array() - 1.0 / static_cast<double>(n)).abs().maxCoeff());
  }
  const bool ok = grid_err < 1e-3 && kkt < 1e-6 && sym_err <= 1e-9;
  return {ok, "grid deviation " + sci(grid_err) + " < 1e-3; KKT residual " + sci(kkt) +
                  " < 1e-6; symmetric deviation " + sci(sym_err) + " <= 1e-9"};
}

// 8 ------------------------------------------------------------------------

Outcome execution() {
  Rng rng(88);
  bool uniform = true;
  for (int k = 0; k < 50; ++k) {
    const double X = rng.uniform(1e3, 1e7);
    const std::size_t N = 1 + rng.below(50);
    const AcParams p{0.0, rng.uniform(0.01, 1.0), rng.uniform(0.1, 2.0), rng.uniform(0.1, 2.0), 0.0};
    const ExecutionSchedule s = ac_trajectory(X, N, p);
    const ExecutionSchedule t = twap(X, N, p.tau);
    if (s.slices != t.slices || s.holdings != t.holdings) uniform = false;
    for (double v : s.slices)
      if (v != s.slices.front()) uniform = false;
  }
  bool decreasing = true;
  for (int k = 0; k < 100; ++k) {
    const double X = rng.uniform(1e3, 1e7);
    const std::size_t N = 2 + rng.below(40);
    const AcParams p{std::exp(rng.uniform(std::log(1e-8), std::log(1e-5))), rng.uniform(0.01, 0.5),
                     rng.uniform(0.2, 2.0), rng.uniform(0.2, 2.0), 0.0};
    const ExecutionSchedule s = ac_trajectory(X, N, p);
    for (std::size_t j = 1; j < N; ++j)
      if (!(s.slices[j] < s.slices[j - 1])) decreasing = false;
  }
  const AcParams p{2e-6, 0.05, 0.95, 1.0, 0.01};
  const double X = 1e6;
  const std::size_t N = 10;
  const ExecutionSchedule s = ac_trajectory(X, N, p);
  const std::vector<double> x = testing::numerical_minimizer(X, N, p);
  double slice_err = 0.0;
  for (std::size_t j = 0; j < N; ++j) {
    const double nj = x[j] - x[j + 1];
    slice_err = std::max(slice_err, std::fabs(s.slices[j] - nj) / std::fabs(nj));
  }
  double twap_err = 0.0;
  for (int k = 0; k < 50; ++k) {
    const double X2 = std::round(rng.uniform(1e2, 1e6));
    const std::size_t N2 = 1 + rng.below(30);
    const double tau = rng.uniform(0.1, 3.0), eta = rng.uniform(0.001, 1.0);
    const ExecutionSchedule t = twap(X2, N2, tau);
    const ExecutionResult r = simulate_execution(t, std::vector<double>(N2 + 1, rng.uniform(10, 100)), ImpactModel{eta, 0.0});
    const double expect = eta * X2 * X2 / (static_cast<double>(N2) * tau);
    twap_err = std::max(twap_err, std::fabs(r.shortfall - expect) / expect);
  }
  const bool ok = uniform && decreasing && slice_err < 0.005 && twap_err <= 1e-12;
  return {ok, std::string("lambda=0 uniform ") + (uniform ? "yes" : "no") + "; strictly decreasing " +
                  (decreasing ? "yes" : "no") + "; max slice deviation " + fmt("%.4f%%", 100 * slice_err) +
                  " < 0.5%; TWAP shortfall relative error " + sci(twap_err)};
}

// 9 ------------------------------------------------------------------------

Outcome rolling_direction() {
  double sum[3] = {0, 0, 0};
  int strictly = 0;
  std::string per_seed;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    ExperimentConfig c;
    SynthConfig& s = c.data.synth;
    s.n_instruments = 200;
    s.n_days = 500;
    s.seed = seed;
    s.signal_ic = 0.2;
    s.drift_period = 63;
    s.n_planted = 12;
    c.factors.clear();
    for (int k = 0; k < 12; ++k) c.factors.push_back(named("x" + std::to_string(k)));
    c.objective.kind = ObjectiveKind::IC;
    c.fit.epochs = 100;
    c.roll.train_months = 3;
    const MarketData m = load_market(c.data);
    const Panel fwd = forward_returns(m.bars, 1);
    double ic[3];
    const std::size_t steps[3] = {3, 6, 0};
    for (int k = 0; k < 3; ++k) {
      c.roll.roll_step = steps[k];
      ic[k] = mean_ic(walk_forward(c, m, 1).oos_signal, fwd).value_or(0.0);
      sum[k] += ic[k];
    }
    if (ic[0] > ic[2]) ++strictly;
    per_seed += fmt(" %.3f", ic[0]) + "/" + fmt("%.3f", ic[1]) + "/" + fmt("%.3f", ic[2]);
  }
  const double m3 = sum[0] / 5, m6 = sum[1] / 5, mn = sum[2] / 5;
  const bool ok = m3 >= m6 && m6 >= mn && strictly >= 4;
  return {ok, "mean OOS IC 3m " + fmt("%.4f", m3) + " >= 6m " + fmt("%.4f", m6) + " >= none " + fmt("%.4f", mn) +
                  "; 3m > none in " + std::to_string(strictly) + "/5 seeds (3m/6m/none:" + per_seed + ")"};
}

// 10 -----------------------------------------------------------------------

Outcome ensemble() {
  ExperimentConfig c;
  c.data.synth.n_instruments = 200;
  c.data.synth.n_days = 500;
  c.data.synth.seed = 1;
  c.data.synth.signal_ic = 0.05;
  c.factors.clear();
  for (const auto& f : factor::builtin_library())
    if (!factor::uses_graph(*f.expr)) c.factors.push_back(f);
  for (int k = 0; k < 4; ++k) c.factors.push_back(named("x" + std::to_string(k)));
  c.objective.kind = ObjectiveKind::IC;
  c.fit.epochs = 100;
  c.fit.row_subsample = 0.5;
  c.fit.init_scale = 0.1;
  c.roll.train_months = 6;
  c.roll.roll_step = 3;
  c.ensemble.n_runs = 40;
  c.ensemble.base_seed = 1;
  const MarketData m = load_market(c.data);
  const EnsembleResult r = run_ensemble(c, m, 1);
  std::vector<double> ics, navs;
  for (const auto& rep : r.run_reports) {
    ics.push_back(rep.ic_pearson.ic_mean);
    navs.push_back(rep.curve.nav.back());
  }
  const double mean = testing::tb_mean(ics);
  const double sd = testing::tb_sample_std(ics).value_or(0.0);
  std::sort(navs.begin(), navs.end());
  const double median = 0.5 * (navs[navs.size() / 2 - 1] + navs[navs.size() / 2]);
  const double ens_ic = r.ensemble_report.ic_pearson.ic_mean;
  const double ens_nav = r.ensemble_report.curve.nav.back();
  const bool ok = r.runs.size() == 40 && sd > 0.002 && ens_ic >= mean && ens_nav >= median;
  return {ok, "per-run IC std " + fmt("%.4f", sd) + " > 0.002; ensemble IC " + fmt("%.4f", ens_ic) +
                  " >= mean " + fmt("%.4f", mean) + "; ensemble nav " + fmt("%.4f", ens_nav) + " >= median " +
                  fmt("%.4f", median)};
}

// 11 -----------------------------------------------------------------------

Outcome split_schemes() {
  Rng rng(111);
  std::size_t failures = 0, tail_failures = 0, cases = 0;
  for (int k = 0; k < 500; ++k) {
    const std::size_t n = 40 + rng.below(400);
    const double f = rng.uniform(0.1, 0.5);
    const std::uint64_t seed = rng.next_u64();
    std::vector<std::size_t> d;
    std::size_t cur = rng.below(5);
    for (std::size_t j = 0; j < n; ++j) d.push_back(cur += 1 + rng.below(3));
    const std::size_t nv = static_cast<std::size_t>(std::ceil(f * static_cast<double>(n)));
    for (auto scheme : {SplitScheme::Tail, SplitScheme::Random, SplitScheme::Fragmented}) {
      ++cases;
      SplitSpec spec;
      spec.scheme = scheme;
      spec.valid_fraction = f;
      spec.seed = seed;
      const SplitResult r = split_dates(d, spec);
      std::vector<std::size_t> all = r.train;
      all.insert(all.end(), r.valid.begin(), r.valid.end());
      std::sort(all.begin(), all.end());
      const bool disjoint = std::adjacent_find(all.begin(), all.end()) == all.end();
      if (all != d || !disjoint || r.valid.size() != nv || r.train.empty() ||
          !std::is_sorted(r.train.begin(), r.train.end()) || !std::is_sorted(r.valid.begin(), r.valid.end()))
        ++failures;
      if (scheme == SplitScheme::Tail && (r.valid != std::vector<std::size_t>(d.end() - nv, d.end()) ||
                                          r.train != std::vector<std::size_t>(d.begin(), d.end() - nv)))
        ++tail_failures;
    }
  }
  return {failures == 0 && tail_failures == 0, std::to_string(cases) + " splits: " + std::to_string(failures) +
                                                   " partition failures, " + std::to_string(tail_failures) +
                                                   " tail slice mismatches"};
}

// 12 -----------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome cli_determinism() {
  const fs::path root = fs::temp_directory_path() / "qf_acceptance_cli";
  fs::remove_all(root);
  fs::create_directories(root);
  const fs::path cfg = root / "exp.toml";
  std::ofstream(cfg) << "seed = 5\n"
                        "[data]\nn_instruments = 60\nn_days = 400\nsignal_ic = 0.1\n"
                        "[model]\nobjective = \"ic\"\nepochs = 60\nrow_subsample = 0.7\n"
                        "[roll]\ntrain_months = 6\nroll_step = 3\n"
                        "[split]\nscheme = \"fragmented\"\n"
                        "[portfolio]\nk = 10\n"
                        "[tuning]\nl2 = [0.0, 0.01]\n";
  auto run = [&](const std::string& name, int threads) {
    const fs::path out = root / name;
    const std::string cmd = std::string("\"") + QF_CLI_PATH + "\" --config \"" + cfg.string() + "\" --out \"" +
                            out.string() + "\" --threads " + std::to_string(threads) +
                            " --deterministic walkforward > \"" + (root / (name + ".log")).string() + "\" 2>&1";
    const int rc = std::system(cmd.c_str());
    return std::make_pair(rc, slurp(out / "report.json"));
  };
  const auto a = run("a", 1), b = run("b", 1), c = run("c", 8);
  if (a.first != 0 || b.first != 0 || c.first != 0) return {false, "walkforward exited nonzero"};
  if (a.second.empty()) return {false, "report.json missing"};
  const bool ok = a.second == b.second && a.second == c.second;
  fs::remove_all(root);
  return {ok, "report.json " + std::to_string(a.second.size()) + " bytes; repeat identical " +
                  (a.second == b.second ? "yes" : "no") + ", threads 1 vs 8 identical " +
                  (a.second == c.second ? "yes" : "no")};
}

struct Criterion {
  int id;
  const char* name;
  double limit_s;  // 0: no runtime bound
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> all{
      {1, "synthetic planted IC", 10, planted_ic},
      {2, "objective gradients", 5, gradients},
      {3, "no lookahead", 10, no_lookahead},
      {4, "factor DSL", 0, dsl},
      {5, "signal and portfolio metrics", 0, metrics},
      {6, "backtest accounting", 0, backtest},
      {7, "mean-variance solver", 0, mean_variance_solver},
      {8, "execution schedules", 0, execution},
      {9, "rolling direction", 120, rolling_direction},
      {10, "seed ensemble", 180, ensemble},
      {11, "split schemes", 0, split_schemes},
      {12, "CLI determinism", 0, cli_determinism},
  };
  int failed = 0;
  for (const Criterion& c : all) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::string timing = fmt("%.2f s", secs);
    if (c.limit_s > 0) {
      timing += fmt(" < %.0f s", c.limit_s);
      if (secs >= c.limit_s) {
        o.pass = false;
        o.detail += "; runtime limit exceeded";
      }
    }
    if (!o.pass) ++failed;
    std::printf("%s %2d %s: %s (%s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), timing.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
