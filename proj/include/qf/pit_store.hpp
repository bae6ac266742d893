#pragma once

// Point-in-time market data: bar panels, fundamentals, time-valid relation
// edges and universe memberships. Every date-parameterized read only looks at
// records dated <= the query date; forward_returns is the one label producer.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "qf/panel.hpp"

namespace qf {

struct BarRecord {
  Date date;
  std::string instrument;
  Cell open, high, low, close, volume;
  Cell vwap;  // defaults to close when absent
};

/// OHLCV(+vwap) panels sharing one calendar and instrument list.
struct BarPanel {
  Panel open, high, low, close, volume, vwap;

  const TradingCalendar& calendar() const { return close.calendar(); }
  const InstrumentSet& instruments() const { return close.instruments(); }
  std::size_t rows() const { return close.rows(); }
  std::size_t cols() const { return close.cols(); }

  /// Checks shared axes, low <= min(open, close) <= max(open, close) <= high
  /// and volume >= 0. Throws DataError naming the first violating cell.
  void validate() const;
};

BarPanel ingest_bars(std::vector<BarRecord> records);
/// CSV with header `date,instrument,open,high,low,close,volume[,vwap]`.
/// Empty value fields are MISSING. Errors report the 1-based line number.
BarPanel ingest_bars_csv(std::string_view text);
/// Writes one row per (date, instrument) having a present close.
std::string export_bars_csv(const BarPanel& bars);

/// close(t+h)/close(t) - 1; the last h dates are MISSING. Label producer only.
Panel forward_returns(const BarPanel& bars, int horizon);
/// close(t)/close(t-1) - 1 (backward-looking, usable as a feature).
Panel trailing_returns(const BarPanel& bars);

/// Published fundamental value: visible from `published` onward.
struct FundamentalRecord {
  Date published;
  std::string instrument;
  double value;
};

/// Forward-fills each instrument's latest published value onto the axes.
Panel fundamentals_as_of(const std::vector<FundamentalRecord>& records, CalendarPtr calendar,
                         InstrumentsPtr instruments);
std::vector<FundamentalRecord> parse_fundamentals_csv(std::string_view text);
std::string export_fundamentals_csv(const std::vector<FundamentalRecord>& records);

/// Long-format panel CSV `date,instrument,<value_name>`; absent cells omitted.
std::string export_panel_csv(const Panel& panel, std::string_view value_name);
/// Wide-format feature CSV `date,instrument,f1,f2,...` over shared axes.
std::string export_fields_csv(const std::vector<std::pair<std::string, const Panel*>>& fields);
std::map<std::string, Panel> parse_fields_csv(std::string_view text, CalendarPtr calendar,
                                              InstrumentsPtr instruments);

struct RelationEdge {
  std::string src;
  std::string dst;
  std::string relation;
  Date valid_from;
  std::optional<Date> valid_to;  // nullopt = OPEN

  bool active_at(Date t) const { return valid_from <= t && (!valid_to || t < *valid_to); }
};

struct Neighbor {
  std::string id;
  std::string relation;
  friend auto operator<=>(const Neighbor&, const Neighbor&) = default;
};

using Adjacency = std::map<std::string, std::set<Neighbor>>;

class GraphTimeline {
 public:
  GraphTimeline() = default;
  explicit GraphTimeline(std::vector<RelationEdge> edges);

  /// Validates valid_from < valid_to and src != dst.
  void add(RelationEdge edge);
  const std::vector<RelationEdge>& edges() const { return edges_; }
  bool empty() const { return edges_.empty(); }

 private:
  std::vector<RelationEdge> edges_;
};

/// Snapshot of edges valid at t (half-open intervals). Each edge links both
/// endpoints; relations are treated as undirected.
Adjacency graph_as_of(const GraphTimeline& timeline, Date t);
/// Same snapshot as neighbor index lists over `instruments` (self excluded,
/// unknown ids ignored, each neighbor listed once).
std::vector<std::vector<std::size_t>> graph_as_of_indexed(const GraphTimeline& timeline, Date t,
                                                          const InstrumentSet& instruments);

GraphTimeline parse_edges_jsonl(std::string_view text);
std::string export_edges_jsonl(const GraphTimeline& timeline);

struct Membership {
  Date from;
  std::optional<Date> to;  // nullopt = OPEN
  bool covers(Date t) const { return from <= t && (!to || t < *to); }
};

class UniverseTimeline {
 public:
  /// Appends an interval; must be disjoint from and after existing ones.
  void add(const std::string& instrument, Membership interval);
  std::set<std::string> at(Date t) const;
  bool contains(const std::string& instrument, Date t) const;
  const std::map<std::string, std::vector<Membership>>& memberships() const { return members_; }
  bool empty() const { return members_.empty(); }

 private:
  std::map<std::string, std::vector<Membership>> members_;
};

inline std::set<std::string> universe_at(const UniverseTimeline& u, Date t) { return u.at(t); }

/// `instrument,valid_from,valid_to` with empty valid_to meaning OPEN.
UniverseTimeline parse_universe_csv(std::string_view text);
std::string export_universe_csv(const UniverseTimeline& u);
/// Every instrument a member over the whole calendar.
UniverseTimeline full_universe(const InstrumentSet& instruments, Date from);

/// Everything the pipeline reads: bars, extra feature fields, fundamentals,
/// relation graph and universe.
struct MarketData {
  BarPanel bars;
  std::map<std::string, Panel> fields;  // e.g. x0, x1, ... and "fundamental"
  std::vector<FundamentalRecord> fundamental_records;
  GraphTimeline graph;
  UniverseTimeline universe;

  /// Loads bars.csv plus optional features.csv, fundamentals.csv,
  /// edges.jsonl and universe.csv from a bundle directory.
  static MarketData load(const std::string& dir);
  void write(const std::string& dir) const;
};

}  // namespace qf
