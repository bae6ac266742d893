#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace qf {

/// Calendar day stored as days since 1970-01-01.
class Date {
 public:
  constexpr Date() = default;
  constexpr explicit Date(std::int32_t days_since_epoch) : days_(days_since_epoch) {}

  static Date from_ymd(int year, unsigned month, unsigned day);
  /// Parses strict `YYYY-MM-DD`; throws DataError on anything else.
  static Date parse(std::string_view text);
  static bool try_parse(std::string_view text, Date& out);

  std::string to_string() const;
  constexpr std::int32_t days() const { return days_; }
  /// 0 = Monday ... 6 = Sunday.
  int weekday() const;
  Date next_business_day() const;

  friend constexpr auto operator<=>(Date, Date) = default;

 private:
  std::int32_t days_ = 0;
};

}  // namespace qf
