#include "qf/backtest.hpp"

#include <cmath>
#include <map>

#include "qf/csv.hpp"
#include "qf/error.hpp"

namespace qf {

void CostModel::validate() const {
  if (!(fee_rate >= 0.0) || !(slippage_rate >= 0.0)) throw ValidationError("cost rates must be >= 0");
}

EquityCurve run_backtest(const WeightSeries& weights, const BarPanel& bars, const CostModel& costs) {
  costs.validate();
  weights.validate();
  const TradingCalendar& cal = bars.calendar();
  const InstrumentSet& inst = bars.instruments();

  // target weights keyed by calendar row, as dense column vectors
  std::map<std::size_t, std::vector<double>> targets;
  for (std::size_t k = 0; k < weights.weights.size(); ++k) {
    const auto row = cal.index_of(weights.rebalance_dates[k]);
    if (!row) throw ValidationError("rebalance date " + weights.rebalance_dates[k].to_string() + " not in bar calendar");
    std::vector<double> w(inst.size(), 0.0);
    for (const auto& [id, v] : weights.weights[k]) {
      const auto col = inst.index_of(id);
      if (!col) throw ValidationError("weights reference instrument '" + id + "' absent from bars");
      w[*col] = v;
    }
    targets.emplace(*row, std::move(w));
  }

  EquityCurve curve;
  if (targets.empty()) return curve;
  const Panel rets = trailing_returns(bars);
  const double rate = costs.total();
  std::vector<double> w(inst.size(), 0.0);  // post-trade weights; all cash before inception
  double nav = 1.0;
  auto next_target = targets.begin();
  for (std::size_t t = targets.begin()->first; t < cal.size(); ++t) {
    const Date d = cal[t];
    double gross = 0.0;
    if (t > targets.begin()->first) {
      for (std::size_t i = 0; i < w.size(); ++i) {
        if (w[i] == 0.0) continue;
        const Cell& r = rets.at(t, i);
        if (r) gross += w[i] * *r;
        else curve.frozen.push_back({d, inst[i]});
      }
      const double denom = 1.0 + gross;
      if (denom > 0.0)
        for (std::size_t i = 0; i < w.size(); ++i) {
          if (w[i] == 0.0) continue;
          const Cell& r = rets.at(t, i);
          w[i] = w[i] * (1.0 + (r ? *r : 0.0)) / denom;
        }
    }
    double turnover = 0.0;
    if (next_target != targets.end() && next_target->first == t) {
      const std::vector<double>& target = next_target->second;
      double l1 = 0.0;
      for (std::size_t i = 0; i < w.size(); ++i) {
        const double delta = target[i] - w[i];
        if (delta != 0.0) {
          l1 += std::fabs(delta);
          curve.trades.push_back({d, inst[i], delta});
        }
      }
      turnover = 0.5 * l1;
      w = target;
      ++next_target;
    }
    const double net = gross - 2.0 * turnover * rate;
    nav *= 1.0 + net;
    curve.dates.push_back(d);
    curve.gross.push_back(gross);
    curve.net.push_back(net);
    curve.turnover.push_back(turnover);
    if (!(nav > 0.0)) {
      curve.nav.push_back(0.0);
      curve.halted = true;
      break;
    }
    curve.nav.push_back(nav);
  }
  return curve;
}

std::string export_equity_csv(const EquityCurve& c) {
  std::string out = "date,nav,gross,net,turnover\n";
  for (std::size_t t = 0; t < c.size(); ++t)
    out += c.dates[t].to_string() + ',' + csv::format_double(c.nav[t]) + ',' + csv::format_double(c.gross[t]) + ',' +
           csv::format_double(c.net[t]) + ',' + csv::format_double(c.turnover[t]) + '\n';
  return out;
}

std::string export_trades_csv(const EquityCurve& c) {
  std::string out = "date,instrument,delta_weight\n";
  for (const Trade& tr : c.trades)
    out += tr.date.to_string() + ',' + tr.instrument + ',' + csv::format_double(tr.delta_weight) + '\n';
  return out;
}

}  // namespace qf
