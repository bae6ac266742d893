#pragma once

#include <string>
#include <vector>

#include "qf/pit_store.hpp"
#include "qf/portfolio.hpp"

namespace qf {

/// Proportional costs per unit of traded notional.
struct CostModel {
  double fee_rate = 0.001;
  double slippage_rate = 0.0005;

  void validate() const;
  double total() const { return fee_rate + slippage_rate; }
};

struct Trade {
  Date date;
  std::string instrument;
  double delta_weight = 0.0;  // target minus drifted weight
};

struct FrozenPosition {
  Date date;
  std::string instrument;  // held, but its return was MISSING that day
};

struct EquityCurve {
  std::vector<Date> dates;
  std::vector<double> nav;  // nav(t) = nav(t-1) * (1 + net(t)), from an implied 1.0
  std::vector<double> gross;
  std::vector<double> net;
  std::vector<double> turnover;  // half L1 weight change at rebalances, else 0
  std::vector<Trade> trades;
  std::vector<FrozenPosition> frozen;
  bool halted = false;  // a day with net return <= -100% ended the simulation

  std::size_t size() const { return dates.size(); }
};

/// Daily close-to-close simulation from the first rebalance date to the end
/// of the bar calendar. Weights drift between rebalances; trades at close.
EquityCurve run_backtest(const WeightSeries& weights, const BarPanel& bars, const CostModel& costs);

std::string export_equity_csv(const EquityCurve& c);
std::string export_trades_csv(const EquityCurve& c);

}  // namespace qf
