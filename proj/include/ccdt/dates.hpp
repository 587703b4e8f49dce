#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace ccdt {

/// Days since 1970-01-01 for a strict "YYYY-MM-DD" string; nullopt otherwise.
std::optional<int> parse_iso_date(std::string_view text);

std::string format_iso_date(int days_since_epoch);

/// Completed calendar years from `from` to `to` (negative when `to` precedes `from`).
int whole_years_between(int from_days, int to_days);

int year_of(int days_since_epoch);

}  // namespace ccdt
