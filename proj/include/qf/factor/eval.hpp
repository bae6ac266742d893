#pragma once

#include <map>
#include <string>

#include "qf/factor/ast.hpp"
#include "qf/pit_store.hpp"

namespace qf::factor {

/// Read-only data an expression is evaluated against. `fields` supplies
/// extra named panels (x0, fundamental, ...) on the bars' axes; `graph` is
/// required only by graph operators.
struct DataView {
  const BarPanel* bars = nullptr;
  const std::map<std::string, Panel>* fields = nullptr;
  const GraphTimeline* graph = nullptr;

  static DataView of(const MarketData& m) { return {&m.bars, &m.fields, &m.graph}; }
  /// Panel bound to `name`; throws ValidationError when unbound.
  const Panel& resolve(const std::string& name, Panel& scratch) const;
};

/// Evaluates `e` over the bars' axes, operator by operator.
///   delay(x,d)   value d rows earlier; delta(x,d) = x - delay(x,d)
///   ts_*(x,w)    trailing window of exactly w present values, else MISSING
///   ts_std/cov   population (divide by w); ts_rank in [0,1], average ties
///   rank         (average rank - 1)/(n - 1) per date, 0.5 for a lone value
///   zscore       (x - mean)/population std, MISSING when std == 0
///   nbr_mean     mean over present graph neighbours as of each date
/// Division by zero, log of x <= 0, non-finite results and MISSING operands
/// all give MISSING. Output at date t depends only on data at dates <= t.
Panel evaluate(const Expr& e, const DataView& data);

}  // namespace qf::factor
