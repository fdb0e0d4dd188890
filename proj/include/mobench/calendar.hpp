#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "mobench/dates.hpp"
#include "mobench/error.hpp"
#include "mobench/panel.hpp"

namespace mobench {

struct WeeklyIndex {
	std::int64_t slots_per_day = 0;
	std::int64_t slots_per_week = 0;

	static WeeklyIndex from_granularity(std::int64_t granularity_s) {
		if (granularity_s <= 0 || dates::seconds_per_day % granularity_s != 0) {
			throw Error(ErrorKind::invalid_argument, "granularity_s must be a positive divisor of 86400");
		}
		const std::int64_t spd = dates::seconds_per_day / granularity_s;
		return {spd, 7 * spd};
	}
};

/// Maps timesteps of one dataset to weekly slots (Monday 00:00 = slot 0).
/// A holiday keeps its time of day but takes Sunday's day of week.
class WeeklyCalendar {
public:
	explicit WeeklyCalendar(const DatasetMeta &meta)
	    : meta_(meta), index_(WeeklyIndex::from_granularity(meta.granularity_s)) {
		holidays_.reserve(meta.holidays.size());
		for (const auto &h : meta.holidays) {
			holidays_.push_back(dates::parse_iso_date(h));
		}
		std::sort(holidays_.begin(), holidays_.end());
	}

	const WeeklyIndex &index() const { return index_; }

	bool is_holiday(std::int64_t epoch_day) const {
		return std::binary_search(holidays_.begin(), holidays_.end(), epoch_day);
	}

	std::int64_t slot(std::size_t timestep) const {
		if (timestep >= meta_.num_timesteps) {
			throw Error(ErrorKind::invalid_argument, "timestep " + std::to_string(timestep) + " out of range [0, " +
			                                             std::to_string(meta_.num_timesteps) + ")");
		}
		const auto [day, slot_of_day] = meta_.local_day_and_slot(timestep);
		const int dow = is_holiday(day) ? 6 : dates::weekday_monday0(day);
		return dow * index_.slots_per_day + slot_of_day;
	}

	/// Slot of every timestep, in order.
	std::vector<std::int64_t> slots() const {
		std::vector<std::int64_t> out(meta_.num_timesteps);
		for (std::size_t t = 0; t < out.size(); ++t) {
			out[t] = slot(t);
		}
		return out;
	}

private:
	DatasetMeta meta_;
	WeeklyIndex index_;
	std::vector<std::int64_t> holidays_;
};

inline std::int64_t weekly_slot(std::size_t timestep, const DatasetMeta &meta) {
	return WeeklyCalendar(meta).slot(timestep);
}

} // namespace mobench
