#include "qf/date.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>

#include "qf/error.hpp"

namespace qf {

namespace chr = std::chrono;

Date Date::from_ymd(int year, unsigned month, unsigned day) {
  chr::year_month_day ymd{chr::year{year}, chr::month{month}, chr::day{day}};
  if (!ymd.ok()) throw DataError("invalid calendar date");
  return Date(static_cast<std::int32_t>(chr::sys_days{ymd}.time_since_epoch().count()));
}

bool Date::try_parse(std::string_view text, Date& out) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return false;
  auto num = [&](std::size_t pos, std::size_t len, int& v) {
    for (std::size_t k = pos; k < pos + len; ++k)
      if (text[k] < '0' || text[k] > '9') return false;
    auto r = std::from_chars(text.data() + pos, text.data() + pos + len, v);
    return r.ec == std::errc{};
  };
  int y = 0, m = 0, d = 0;
  if (!num(0, 4, y) || !num(5, 2, m) || !num(8, 2, d)) return false;
  chr::year_month_day ymd{chr::year{y}, chr::month{static_cast<unsigned>(m)},
                          chr::day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return false;
  out = Date(static_cast<std::int32_t>(chr::sys_days{ymd}.time_since_epoch().count()));
  return true;
}

Date Date::parse(std::string_view text) {
  Date d;
  if (!try_parse(text, d)) throw DataError("unparseable date '" + std::string(text) + "'");
  return d;
}

std::string Date::to_string() const {
  chr::year_month_day ymd{chr::sys_days{chr::days{days_}}};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

int Date::weekday() const {
  // 1970-01-01 was a Thursday.
  int w = (days_ + 3) % 7;
  return w < 0 ? w + 7 : w;
}

Date Date::next_business_day() const {
  Date d(days_ + 1);
  while (d.weekday() >= 5) d = Date(d.days_ + 1);
  return d;
}

}  // namespace qf
