#include "qf/panel.hpp"

#include <algorithm>
#include <cmath>

#include "qf/error.hpp"

namespace qf {

Cell finite_or_missing(double v) {
  if (std::isfinite(v)) return v;
  return kMissing;
}

TradingCalendar::TradingCalendar(std::vector<Date> dates) : dates_(std::move(dates)) {
  if (dates_.empty()) throw DataError("trading calendar is empty");
  for (std::size_t k = 1; k < dates_.size(); ++k)
    if (!(dates_[k - 1] < dates_[k]))
      throw DataError("trading calendar not strictly increasing at " + dates_[k].to_string());
}

std::optional<std::size_t> TradingCalendar::index_of(Date d) const {
  auto it = std::lower_bound(dates_.begin(), dates_.end(), d);
  if (it == dates_.end() || *it != d) return std::nullopt;
  return static_cast<std::size_t>(it - dates_.begin());
}

std::size_t TradingCalendar::upper_index(Date d) const {
  return static_cast<std::size_t>(std::upper_bound(dates_.begin(), dates_.end(), d) -
                                  dates_.begin());
}

InstrumentSet::InstrumentSet(std::vector<std::string> ids) : ids_(std::move(ids)) {
  index_.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i)
    if (!index_.emplace(ids_[i], i).second)
      throw DataError("duplicate instrument id '" + ids_[i] + "'");
}

std::optional<std::size_t> InstrumentSet::index_of(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Panel::Panel(CalendarPtr calendar, InstrumentsPtr instruments)
    : calendar_(std::move(calendar)), instruments_(std::move(instruments)) {
  values_.assign(rows() * cols(), kMissing);
}

bool Panel::same_axes(const Panel& other) const {
  if (calendar_ != other.calendar_ && !(calendar_ && other.calendar_ && *calendar_ == *other.calendar_))
    return false;
  if (instruments_ != other.instruments_ &&
      !(instruments_ && other.instruments_ && *instruments_ == *other.instruments_))
    return false;
  return true;
}

std::size_t Panel::count_present() const {
  return static_cast<std::size_t>(
      std::count_if(values_.begin(), values_.end(), [](const Cell& c) { return c.has_value(); }));
}

void require_same_axes(const Panel& a, const Panel& b, const char* what) {
  if (!a.same_axes(b)) throw ValidationError(std::string(what) + ": panels do not share axes");
}

}  // namespace qf
