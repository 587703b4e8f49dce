#include "ccdt/dates.hpp"

#include <chrono>
#include <cstdio>
#include <utility>

namespace ccdt {

namespace {

using namespace std::chrono;

year_month_day to_ymd(int days) { return year_month_day{sys_days{std::chrono::days{days}}}; }

}  // namespace

std::optional<int> parse_iso_date(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  auto digits = [&](std::size_t pos, std::size_t len, int& out) {
    out = 0;
    for (std::size_t i = pos; i < pos + len; ++i) {
      if (text[i] < '0' || text[i] > '9') return false;
      out = out * 10 + (text[i] - '0');
    }
    return true;
  };
  int y = 0, m = 0, d = 0;
  if (!digits(0, 4, y) || !digits(5, 2, m) || !digits(8, 2, d)) return std::nullopt;
  year_month_day ymd{year{y}, month{static_cast<unsigned>(m)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return std::nullopt;
  return static_cast<int>(sys_days{ymd}.time_since_epoch().count());
}

std::string format_iso_date(int days_since_epoch) {
  auto ymd = to_ymd(days_since_epoch);
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()));
  return buf;
}

int whole_years_between(int from_days, int to_days) {
  if (to_days < from_days) return -whole_years_between(to_days, from_days);
  auto a = to_ymd(from_days);
  auto b = to_ymd(to_days);
  int years = static_cast<int>(b.year()) - static_cast<int>(a.year());
  if (std::pair{static_cast<unsigned>(b.month()), static_cast<unsigned>(b.day())} <
      std::pair{static_cast<unsigned>(a.month()), static_cast<unsigned>(a.day())})
    --years;
  return years;
}

int year_of(int days_since_epoch) { return static_cast<int>(to_ymd(days_since_epoch).year()); }

}  // namespace ccdt
