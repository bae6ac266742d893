#include "qf/pit_store.hpp"

#include <algorithm>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <sstream>

#include "qf/csv.hpp"
#include "qf/error.hpp"

namespace qf {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string line_msg(std::size_t line, const std::string& what) {
  return "line " + std::to_string(line) + ": " + what;
}

CalendarPtr make_calendar(std::set<Date> dates) {
  return std::make_shared<const TradingCalendar>(std::vector<Date>(dates.begin(), dates.end()));
}

InstrumentsPtr make_instruments(std::set<std::string> ids) {
  return std::make_shared<const InstrumentSet>(std::vector<std::string>(ids.begin(), ids.end()));
}

Cell parse_cell(std::string_view field, std::size_t line, const char* name) {
  if (field.empty()) return kMissing;
  double v = 0;
  if (!csv::parse_double(field, v))
    throw DataError(line_msg(line, std::string("bad ") + name + " value '" + std::string(field) + "'"));
  return v;
}

}  // namespace

void BarPanel::validate() const {
  const Panel* all[] = {&open, &high, &low, &close, &volume, &vwap};
  for (const Panel* p : all)
    if (!p->same_axes(close)) throw DataError("bar fields do not share axes");
  for (std::size_t t = 0; t < rows(); ++t) {
    for (std::size_t i = 0; i < cols(); ++i) {
      auto where = [&] { return calendar()[t].to_string() + "/" + instruments()[i]; };
      const Cell &o = open.at(t, i), &h = high.at(t, i), &l = low.at(t, i), &c = close.at(t, i);
      if (o && h && l && c) {
        if (*l > std::min(*o, *c) || *h < std::max(*o, *c))
          throw DataError("OHLC range violated at " + where());
      }
      if (auto v = volume.at(t, i); v && *v < 0) throw DataError("negative volume at " + where());
    }
  }
}

BarPanel ingest_bars(std::vector<BarRecord> records) {
  if (records.empty()) throw DataError("no bar records");
  std::set<Date> dates;
  std::set<std::string> ids;
  for (const auto& r : records) {
    dates.insert(r.date);
    ids.insert(r.instrument);
  }
  auto cal = make_calendar(std::move(dates));
  auto inst = make_instruments(std::move(ids));
  BarPanel bars{Panel(cal, inst), Panel(cal, inst), Panel(cal, inst),
                Panel(cal, inst), Panel(cal, inst), Panel(cal, inst)};
  std::vector<bool> seen(cal->size() * inst->size(), false);
  for (auto& r : records) {
    std::size_t t = *cal->index_of(r.date);
    std::size_t i = *inst->index_of(r.instrument);
    if (seen[t * inst->size() + i])
      throw DataError("duplicate bar key (" + r.date.to_string() + ", " + r.instrument + ")");
    seen[t * inst->size() + i] = true;
    bars.open.at(t, i) = r.open;
    bars.high.at(t, i) = r.high;
    bars.low.at(t, i) = r.low;
    bars.close.at(t, i) = r.close;
    bars.volume.at(t, i) = r.volume;
    bars.vwap.at(t, i) = r.vwap ? r.vwap : r.close;
  }
  bars.validate();
  return bars;
}

BarPanel ingest_bars_csv(std::string_view text) {
  auto ls = csv::lines(text);
  while (!ls.empty() && ls.back().empty()) ls.pop_back();
  if (ls.empty()) throw DataError("bar CSV is empty");
  auto header = csv::split(ls[0]);
  static const std::vector<std::string_view> base{"date", "instrument", "open", "high",
                                                  "low",  "close",      "volume"};
  bool has_vwap = header.size() == 8 && header[7] == "vwap";
  if (!(header.size() == 7 || has_vwap) ||
      !std::equal(base.begin(), base.end(), header.begin()))
    throw DataError(line_msg(1, "expected header date,instrument,open,high,low,close,volume[,vwap]"));
  std::vector<BarRecord> records;
  records.reserve(ls.size());
  for (std::size_t k = 1; k < ls.size(); ++k) {
    std::size_t line = k + 1;
    if (ls[k].empty()) continue;
    auto f = csv::split(ls[k]);
    if (f.size() != header.size())
      throw DataError(line_msg(line, "expected " + std::to_string(header.size()) + " fields"));
    BarRecord r;
    if (!Date::try_parse(f[0], r.date))
      throw DataError(line_msg(line, "bad date '" + std::string(f[0]) + "'"));
    if (f[1].empty()) throw DataError(line_msg(line, "empty instrument"));
    r.instrument = std::string(f[1]);
    r.open = parse_cell(f[2], line, "open");
    r.high = parse_cell(f[3], line, "high");
    r.low = parse_cell(f[4], line, "low");
    r.close = parse_cell(f[5], line, "close");
    r.volume = parse_cell(f[6], line, "volume");
    if (has_vwap) r.vwap = parse_cell(f[7], line, "vwap");
    records.push_back(std::move(r));
  }
  if (records.empty()) throw DataError("bar CSV has no data rows");
  return ingest_bars(std::move(records));
}

std::string export_bars_csv(const BarPanel& bars) {
  std::string out = "date,instrument,open,high,low,close,volume,vwap\n";
  auto cell = [](const Cell& c) { return c ? csv::format_double(*c) : std::string(); };
  for (std::size_t t = 0; t < bars.rows(); ++t) {
    std::string d = bars.calendar()[t].to_string();
    for (std::size_t i = 0; i < bars.cols(); ++i) {
      if (!bars.close.at(t, i)) continue;
      out += d + ',' + bars.instruments()[i] + ',' + cell(bars.open.at(t, i)) + ',' +
             cell(bars.high.at(t, i)) + ',' + cell(bars.low.at(t, i)) + ',' +
             cell(bars.close.at(t, i)) + ',' + cell(bars.volume.at(t, i)) + ',' +
             cell(bars.vwap.at(t, i)) + '\n';
    }
  }
  return out;
}

Panel forward_returns(const BarPanel& bars, int horizon) {
  if (horizon < 1) throw ValidationError("forward_returns: horizon must be >= 1");
  if (static_cast<std::size_t>(horizon) >= bars.rows())
    throw ValidationError("forward_returns: horizon must be shorter than the calendar");
  Panel out(bars.close.calendar_ptr(), bars.close.instruments_ptr());
  const std::size_t h = static_cast<std::size_t>(horizon);
  for (std::size_t t = 0; t + h < bars.rows(); ++t)
    for (std::size_t i = 0; i < bars.cols(); ++i) {
      const Cell& a = bars.close.at(t, i);
      const Cell& b = bars.close.at(t + h, i);
      if (a && b && *a != 0.0) out.at(t, i) = finite_or_missing(*b / *a - 1.0);
    }
  return out;
}

Panel trailing_returns(const BarPanel& bars) {
  Panel out(bars.close.calendar_ptr(), bars.close.instruments_ptr());
  for (std::size_t t = 1; t < bars.rows(); ++t)
    for (std::size_t i = 0; i < bars.cols(); ++i) {
      const Cell& a = bars.close.at(t - 1, i);
      const Cell& b = bars.close.at(t, i);
      if (a && b && *a != 0.0) out.at(t, i) = finite_or_missing(*b / *a - 1.0);
    }
  return out;
}

Panel fundamentals_as_of(const std::vector<FundamentalRecord>& records, CalendarPtr calendar,
                         InstrumentsPtr instruments) {
  Panel out(calendar, instruments);
  std::vector<std::vector<const FundamentalRecord*>> per(instruments->size());
  for (const auto& r : records)
    if (auto i = instruments->index_of(r.instrument)) per[*i].push_back(&r);
  for (std::size_t i = 0; i < per.size(); ++i) {
    auto& v = per[i];
    std::stable_sort(v.begin(), v.end(),
                     [](auto* a, auto* b) { return a->published < b->published; });
    std::size_t k = 0;
    Cell current;
    for (std::size_t t = 0; t < calendar->size(); ++t) {
      while (k < v.size() && v[k]->published <= (*calendar)[t]) current = v[k++]->value;
      out.at(t, i) = current;
    }
  }
  return out;
}

std::vector<FundamentalRecord> parse_fundamentals_csv(std::string_view text) {
  auto ls = csv::lines(text);
  if (ls.empty() || ls[0] != "date,instrument,value")
    throw DataError(line_msg(1, "expected header date,instrument,value"));
  std::vector<FundamentalRecord> out;
  for (std::size_t k = 1; k < ls.size(); ++k) {
    if (ls[k].empty()) continue;
    auto f = csv::split(ls[k]);
    FundamentalRecord r;
    if (f.size() != 3 || !Date::try_parse(f[0], r.published) || f[1].empty() ||
        !csv::parse_double(f[2], r.value))
      throw DataError(line_msg(k + 1, "malformed fundamental row"));
    r.instrument = std::string(f[1]);
    out.push_back(std::move(r));
  }
  return out;
}

std::string export_fundamentals_csv(const std::vector<FundamentalRecord>& records) {
  std::string out = "date,instrument,value\n";
  for (const auto& r : records)
    out += r.published.to_string() + ',' + r.instrument + ',' + csv::format_double(r.value) + '\n';
  return out;
}

std::string export_panel_csv(const Panel& panel, std::string_view value_name) {
  std::string out = "date,instrument," + std::string(value_name) + "\n";
  for (std::size_t t = 0; t < panel.rows(); ++t) {
    std::string d = panel.calendar()[t].to_string();
    for (std::size_t i = 0; i < panel.cols(); ++i)
      if (const Cell& c = panel.at(t, i))
        out += d + ',' + panel.instruments()[i] + ',' + csv::format_double(*c) + '\n';
  }
  return out;
}

std::string export_fields_csv(const std::vector<std::pair<std::string, const Panel*>>& fields) {
  if (fields.empty()) return "date,instrument\n";
  const Panel& ref = *fields.front().second;
  std::string out = "date,instrument";
  for (const auto& [name, p] : fields) {
    require_same_axes(ref, *p, "export_fields_csv");
    out += ',' + name;
  }
  out += '\n';
  for (std::size_t t = 0; t < ref.rows(); ++t) {
    std::string d = ref.calendar()[t].to_string();
    for (std::size_t i = 0; i < ref.cols(); ++i) {
      bool any = false;
      for (const auto& f : fields) any = any || f.second->at(t, i).has_value();
      if (!any) continue;
      out += d + ',' + ref.instruments()[i];
      for (const auto& f : fields) {
        out += ',';
        if (const Cell& c = f.second->at(t, i)) out += csv::format_double(*c);
      }
      out += '\n';
    }
  }
  return out;
}

std::map<std::string, Panel> parse_fields_csv(std::string_view text, CalendarPtr calendar,
                                              InstrumentsPtr instruments) {
  auto ls = csv::lines(text);
  if (ls.empty()) throw DataError("feature CSV is empty");
  auto header = csv::split(ls[0]);
  if (header.size() < 2 || header[0] != "date" || header[1] != "instrument")
    throw DataError(line_msg(1, "expected header date,instrument,..."));
  std::vector<std::string> names;
  std::map<std::string, Panel> out;
  for (std::size_t k = 2; k < header.size(); ++k) {
    names.emplace_back(header[k]);
    out.emplace(names.back(), Panel(calendar, instruments));
  }
  for (std::size_t k = 1; k < ls.size(); ++k) {
    if (ls[k].empty()) continue;
    auto f = csv::split(ls[k]);
    Date d;
    if (f.size() != header.size() || !Date::try_parse(f[0], d))
      throw DataError(line_msg(k + 1, "malformed feature row"));
    auto t = calendar->index_of(d);
    auto i = instruments->index_of(std::string(f[1]));
    if (!t || !i) throw DataError(line_msg(k + 1, "feature row outside bar axes"));
    for (std::size_t c = 0; c < names.size(); ++c) {
      Cell& cell = out.at(names[c]).at(*t, *i);
      if (cell) throw DataError(line_msg(k + 1, "duplicate feature key"));
      cell = parse_cell(f[c + 2], k + 1, names[c].c_str());
    }
  }
  return out;
}

GraphTimeline::GraphTimeline(std::vector<RelationEdge> edges) {
  edges_.reserve(edges.size());
  for (auto& e : edges) add(std::move(e));
}

void GraphTimeline::add(RelationEdge edge) {
  if (edge.src == edge.dst) throw DataError("relation edge with src == dst '" + edge.src + "'");
  if (edge.valid_to && !(edge.valid_from < *edge.valid_to))
    throw DataError("relation edge " + edge.src + "->" + edge.dst + " has empty validity interval");
  edges_.push_back(std::move(edge));
}

Adjacency graph_as_of(const GraphTimeline& timeline, Date t) {
  Adjacency adj;
  for (const auto& e : timeline.edges()) {
    if (!e.active_at(t)) continue;
    adj[e.src].insert({e.dst, e.relation});
    adj[e.dst].insert({e.src, e.relation});
  }
  return adj;
}

std::vector<std::vector<std::size_t>> graph_as_of_indexed(const GraphTimeline& timeline, Date t,
                                                          const InstrumentSet& instruments) {
  std::vector<std::vector<std::size_t>> nbrs(instruments.size());
  for (const auto& e : timeline.edges()) {
    if (!e.active_at(t)) continue;
    auto a = instruments.index_of(e.src);
    auto b = instruments.index_of(e.dst);
    if (!a || !b) continue;
    nbrs[*a].push_back(*b);
    nbrs[*b].push_back(*a);
  }
  for (auto& v : nbrs) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }
  return nbrs;
}

GraphTimeline parse_edges_jsonl(std::string_view text) {
  GraphTimeline out;
  auto ls = csv::lines(text);
  for (std::size_t k = 0; k < ls.size(); ++k) {
    if (ls[k].empty()) continue;
    try {
      json j = json::parse(ls[k]);
      RelationEdge e;
      e.src = j.at("src").get<std::string>();
      e.dst = j.at("dst").get<std::string>();
      e.relation = j.at("relation").get<std::string>();
      e.valid_from = Date::parse(j.at("valid_from").get<std::string>());
      const json& to = j.at("valid_to");
      if (!to.is_null()) e.valid_to = Date::parse(to.get<std::string>());
      out.add(std::move(e));
    } catch (const json::exception& ex) {
      throw DataError(line_msg(k + 1, std::string("malformed edge: ") + ex.what()));
    } catch (const DataError& ex) {
      throw DataError(line_msg(k + 1, ex.what()));
    }
  }
  return out;
}

std::string export_edges_jsonl(const GraphTimeline& timeline) {
  std::string out;
  for (const auto& e : timeline.edges()) {
    json j = {{"src", e.src},
              {"dst", e.dst},
              {"relation", e.relation},
              {"valid_from", e.valid_from.to_string()},
              {"valid_to", e.valid_to ? json(e.valid_to->to_string()) : json(nullptr)}};
    out += j.dump() + '\n';
  }
  return out;
}

void UniverseTimeline::add(const std::string& instrument, Membership interval) {
  if (interval.to && !(interval.from < *interval.to))
    throw DataError("empty membership interval for '" + instrument + "'");
  auto& v = members_[instrument];
  if (!v.empty()) {
    const auto& last = v.back();
    if (!last.to || interval.from < *last.to)
      throw DataError("membership intervals for '" + instrument + "' overlap or are unsorted");
  }
  v.push_back(interval);
}

std::set<std::string> UniverseTimeline::at(Date t) const {
  std::set<std::string> out;
  for (const auto& [id, intervals] : members_)
    for (const auto& m : intervals)
      if (m.covers(t)) {
        out.insert(id);
        break;
      }
  return out;
}

bool UniverseTimeline::contains(const std::string& instrument, Date t) const {
  auto it = members_.find(instrument);
  if (it == members_.end()) return false;
  return std::any_of(it->second.begin(), it->second.end(),
                     [&](const Membership& m) { return m.covers(t); });
}

UniverseTimeline parse_universe_csv(std::string_view text) {
  auto ls = csv::lines(text);
  if (ls.empty() || ls[0] != "instrument,valid_from,valid_to")
    throw DataError(line_msg(1, "expected header instrument,valid_from,valid_to"));
  std::vector<std::pair<std::string, Membership>> rows;
  for (std::size_t k = 1; k < ls.size(); ++k) {
    if (ls[k].empty()) continue;
    auto f = csv::split(ls[k]);
    Membership m;
    if (f.size() != 3 || f[0].empty() || !Date::try_parse(f[1], m.from))
      throw DataError(line_msg(k + 1, "malformed universe row"));
    if (!f[2].empty()) {
      Date to;
      if (!Date::try_parse(f[2], to)) throw DataError(line_msg(k + 1, "bad valid_to"));
      m.to = to;
    }
    rows.emplace_back(std::string(f[0]), m);
  }
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first < b.first : a.second.from < b.second.from;
  });
  UniverseTimeline u;
  for (const auto& [id, m] : rows) u.add(id, m);
  return u;
}

std::string export_universe_csv(const UniverseTimeline& u) {
  std::string out = "instrument,valid_from,valid_to\n";
  for (const auto& [id, intervals] : u.memberships())
    for (const auto& m : intervals)
      out += id + ',' + m.from.to_string() + ',' + (m.to ? m.to->to_string() : "") + '\n';
  return out;
}

UniverseTimeline full_universe(const InstrumentSet& instruments, Date from) {
  UniverseTimeline u;
  for (const auto& id : instruments.ids()) u.add(id, Membership{from, std::nullopt});
  return u;
}

MarketData MarketData::load(const std::string& dir) {
  if (!fs::is_directory(dir)) throw DataError("data directory '" + dir + "' does not exist");
  auto path = [&](const char* name) { return (fs::path(dir) / name).string(); };
  MarketData m;
  m.bars = ingest_bars_csv(csv::read_file(path("bars.csv")));
  const auto& cal = m.bars.close.calendar_ptr();
  const auto& inst = m.bars.close.instruments_ptr();
  if (fs::exists(path("features.csv"))) m.fields = parse_fields_csv(csv::read_file(path("features.csv")), cal, inst);
  if (fs::exists(path("fundamentals.csv"))) {
    m.fundamental_records = parse_fundamentals_csv(csv::read_file(path("fundamentals.csv")));
    m.fields.insert_or_assign("fundamental", fundamentals_as_of(m.fundamental_records, cal, inst));
  }
  if (fs::exists(path("edges.jsonl"))) m.graph = parse_edges_jsonl(csv::read_file(path("edges.jsonl")));
  if (fs::exists(path("universe.csv")))
    m.universe = parse_universe_csv(csv::read_file(path("universe.csv")));
  else
    m.universe = full_universe(*inst, cal->front());
  return m;
}

void MarketData::write(const std::string& dir) const {
  fs::create_directories(dir);
  auto path = [&](const char* name) { return (fs::path(dir) / name).string(); };
  csv::write_file(path("bars.csv"), export_bars_csv(bars));
  std::vector<std::pair<std::string, const Panel*>> cols;
  for (const auto& [name, p] : fields)
    if (name != "fundamental") cols.emplace_back(name, &p);
  if (!cols.empty()) csv::write_file(path("features.csv"), export_fields_csv(cols));
  if (!fundamental_records.empty())
    csv::write_file(path("fundamentals.csv"), export_fundamentals_csv(fundamental_records));
  csv::write_file(path("edges.jsonl"), export_edges_jsonl(graph));
  csv::write_file(path("universe.csv"), export_universe_csv(universe));
}

}  // namespace qf
