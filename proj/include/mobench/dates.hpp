#pragma once

#include <charconv>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

#include "mobench/error.hpp"

namespace mobench::dates {

inline constexpr std::int64_t seconds_per_day = 86400;

constexpr std::int64_t floor_div(std::int64_t a, std::int64_t b) {
	std::int64_t q = a / b;
	if ((a % b != 0) && ((a < 0) != (b < 0))) {
		--q;
	}
	return q;
}

constexpr std::int64_t floor_mod(std::int64_t a, std::int64_t b) {
	return a - floor_div(a, b) * b;
}

/// Day of week with Monday = 0 ... Sunday = 6, for a day count since 1970-01-01.
inline int weekday_monday0(std::int64_t epoch_day) {
	const std::chrono::weekday wd{std::chrono::sys_days{std::chrono::days{epoch_day}}};
	return static_cast<int>(wd.iso_encoding()) - 1;
}

/// Parses a strict `YYYY-MM-DD` string into days since 1970-01-01.
inline std::int64_t parse_iso_date(std::string_view text) {
	auto fail = [&]() -> std::int64_t {
		throw Error(ErrorKind::format, "invalid ISO-8601 date '" + std::string(text) + "'");
	};
	if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
		return fail();
	}
	int y = 0;
	unsigned m = 0, d = 0;
	auto ok = [](std::from_chars_result r, const char *end) { return r.ec == std::errc{} && r.ptr == end; };
	const char *p = text.data();
	if (!ok(std::from_chars(p, p + 4, y), p + 4) || !ok(std::from_chars(p + 5, p + 7, m), p + 7) ||
	    !ok(std::from_chars(p + 8, p + 10, d), p + 10)) {
		return fail();
	}
	const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
	if (!ymd.ok()) {
		return fail();
	}
	return std::chrono::sys_days{ymd}.time_since_epoch().count();
}

inline std::string format_iso_date(std::int64_t epoch_day) {
	const std::chrono::year_month_day ymd{std::chrono::sys_days{std::chrono::days{epoch_day}}};
	char buf[16];
	std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
	              static_cast<unsigned>(ymd.day()));
	return buf;
}

/// RFC-3339 UTC timestamp, e.g. `2012-03-01T00:05:00Z`.
inline std::string format_rfc3339(std::int64_t unix_seconds) {
	const std::int64_t day = floor_div(unix_seconds, seconds_per_day);
	const std::int64_t sod = floor_mod(unix_seconds, seconds_per_day);
	char buf[32];
	std::snprintf(buf, sizeof(buf), "%sT%02d:%02d:%02dZ", format_iso_date(day).c_str(), static_cast<int>(sod / 3600),
	              static_cast<int>((sod / 60) % 60), static_cast<int>(sod % 60));
	return buf;
}

} // namespace mobench::dates
