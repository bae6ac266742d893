#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "qf/date.hpp"

namespace qf {

/// A panel cell: either a finite real or MISSING (`std::nullopt`).
using Cell = std::optional<double>;
inline constexpr std::nullopt_t kMissing = std::nullopt;

/// Wraps a computed value, mapping non-finite results to MISSING.
Cell finite_or_missing(double v);

/// Strictly increasing, nonempty sequence of trading dates.
class TradingCalendar {
 public:
  explicit TradingCalendar(std::vector<Date> dates);

  std::size_t size() const { return dates_.size(); }
  const Date& operator[](std::size_t t) const { return dates_[t]; }
  const std::vector<Date>& dates() const { return dates_; }
  Date front() const { return dates_.front(); }
  Date back() const { return dates_.back(); }

  std::optional<std::size_t> index_of(Date d) const;
  /// Number of dates <= d (i.e. index of the first date after d).
  std::size_t upper_index(Date d) const;

  friend bool operator==(const TradingCalendar& a, const TradingCalendar& b) {
    return a.dates_ == b.dates_;
  }

 private:
  std::vector<Date> dates_;
};

/// Ordered unique instrument identifiers.
class InstrumentSet {
 public:
  explicit InstrumentSet(std::vector<std::string> ids);

  std::size_t size() const { return ids_.size(); }
  const std::string& operator[](std::size_t i) const { return ids_[i]; }
  const std::vector<std::string>& ids() const { return ids_; }
  std::optional<std::size_t> index_of(const std::string& id) const;

  friend bool operator==(const InstrumentSet& a, const InstrumentSet& b) { return a.ids_ == b.ids_; }

 private:
  std::vector<std::string> ids_;
  std::unordered_map<std::string, std::size_t> index_;
};

using CalendarPtr = std::shared_ptr<const TradingCalendar>;
using InstrumentsPtr = std::shared_ptr<const InstrumentSet>;

/// Dense date x instrument grid of cells. Rows are dates, columns instruments.
class Panel {
 public:
  Panel() = default;
  Panel(CalendarPtr calendar, InstrumentsPtr instruments);

  std::size_t rows() const { return calendar_ ? calendar_->size() : 0; }
  std::size_t cols() const { return instruments_ ? instruments_->size() : 0; }
  const TradingCalendar& calendar() const { return *calendar_; }
  const InstrumentSet& instruments() const { return *instruments_; }
  const CalendarPtr& calendar_ptr() const { return calendar_; }
  const InstrumentsPtr& instruments_ptr() const { return instruments_; }

  const Cell& at(std::size_t t, std::size_t i) const { return values_[t * cols() + i]; }
  Cell& at(std::size_t t, std::size_t i) { return values_[t * cols() + i]; }
  std::span<const Cell> row(std::size_t t) const {
    return {values_.data() + t * cols(), cols()};
  }
  std::span<Cell> row(std::size_t t) { return {values_.data() + t * cols(), cols()}; }
  const std::vector<Cell>& cells() const { return values_; }

  /// Same axes (by value) as `other`.
  bool same_axes(const Panel& other) const;
  std::size_t count_present() const;

  friend bool operator==(const Panel& a, const Panel& b) {
    return a.same_axes(b) && a.values_ == b.values_;
  }

 private:
  CalendarPtr calendar_;
  InstrumentsPtr instruments_;
  std::vector<Cell> values_;
};

/// Throws ValidationError unless both panels share axes.
void require_same_axes(const Panel& a, const Panel& b, const char* what);

}  // namespace qf
