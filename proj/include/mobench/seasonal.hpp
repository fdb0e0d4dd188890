#pragma once

// Weekly recurrent pattern ("historical average"): per (weekly slot, location,
// channel) mean and population standard deviation of the fitting data, plus the
// transforms between the original domain and the residual domain.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "mobench/calendar.hpp"
#include "mobench/error.hpp"
#include "mobench/panel.hpp"
#include "mobench/tensor.hpp"

namespace mobench {

struct SeasonalProfile {
	std::int64_t granularity_s = 0;
	std::int64_t slots_per_week = 0;
	std::size_t locations = 0;
	std::size_t channels = 0;
	std::vector<double> mean;        // NaN where count == 0
	std::vector<double> std;         // population std, NaN where count == 0
	std::vector<std::int64_t> count; // observations per cell

	std::size_t index(std::int64_t slot, std::size_t n, std::size_t c) const {
		return (static_cast<std::size_t>(slot) * locations + n) * channels + c;
	}
	bool defined(std::size_t i) const { return count[i] > 0; }

	std::size_t empty_cells() const {
		return static_cast<std::size_t>(std::count(count.begin(), count.end(), std::int64_t{0}));
	}
};

/// Options of the residual transform. With `normalized`, residuals are divided
/// by max(std, s_floor).
struct ResidualScaling {
	bool normalized = false;
	double s_floor = 1e-3;

	void validate() const {
		if (!(s_floor > 0)) {
			throw Error(ErrorKind::invalid_argument, "s_floor must be > 0");
		}
	}
	double scale(double s) const { return normalized ? std::max(s, s_floor) : 1.0; }
};

inline SeasonalProfile fit_profile(const PanelDataset &fit_data) {
	if (fit_data.empty()) {
		throw Error(ErrorKind::invalid_argument, "fit_profile: empty fitting data");
	}
	const WeeklyCalendar calendar(fit_data.meta());
	SeasonalProfile p;
	p.granularity_s = fit_data.meta().granularity_s;
	p.slots_per_week = calendar.index().slots_per_week;
	p.locations = fit_data.num_locations();
	p.channels = fit_data.num_channels();
	const std::size_t cells = static_cast<std::size_t>(p.slots_per_week) * p.locations * p.channels;
	p.mean.assign(cells, 0.0);
	p.std.assign(cells, 0.0);
	p.count.assign(cells, 0);
	std::vector<double> m2(cells, 0.0);

	// Welford updates: identical samples leave the mean exactly unchanged and m2 at 0.
	const std::size_t stride = p.locations * p.channels;
	for (std::size_t t = 0; t < fit_data.num_timesteps(); ++t) {
		const std::size_t base = static_cast<std::size_t>(calendar.slot(t)) * stride;
		const std::size_t src = t * stride;
		for (std::size_t j = 0; j < stride; ++j) {
			if (!fit_data.mask()[src + j]) {
				continue;
			}
			const std::size_t i = base + j;
			const double x = fit_data.values()[src + j];
			const auto k = ++p.count[i];
			const double delta = x - p.mean[i];
			p.mean[i] += delta / static_cast<double>(k);
			m2[i] += delta * (x - p.mean[i]);
		}
	}
	const double nan = std::numeric_limits<double>::quiet_NaN();
	for (std::size_t i = 0; i < cells; ++i) {
		if (p.count[i] == 0) {
			p.mean[i] = nan;
			p.std[i] = nan;
		} else {
			p.std[i] = std::sqrt(std::max(0.0, m2[i] / static_cast<double>(p.count[i])));
		}
	}
	return p;
}

namespace detail {

inline void check_compatible(const SeasonalProfile &profile, std::int64_t granularity_s, std::size_t locations,
                             std::size_t channels) {
	if (profile.granularity_s != granularity_s) {
		throw Error(ErrorKind::granularity_mismatch, "profile granularity " + std::to_string(profile.granularity_s) +
		                                                 " s differs from data granularity " +
		                                                 std::to_string(granularity_s) + " s");
	}
	if (profile.locations != locations || profile.channels != channels) {
		throw Error(ErrorKind::shape_mismatch, "profile covers " + std::to_string(profile.locations) + "x" +
		                                           std::to_string(profile.channels) + " series, data has " +
		                                           std::to_string(locations) + "x" + std::to_string(channels));
	}
}

} // namespace detail

/// Residual panel y' = y - a (or (y - a) / max(s, s_floor)). Cells that are
/// unobserved or fall in a profile cell without observations are masked and
/// hold NaN.
inline PanelDataset residualize(const PanelDataset &panel, const SeasonalProfile &profile,
                                const ResidualScaling &scaling = {}) {
	scaling.validate();
	detail::check_compatible(profile, panel.meta().granularity_s, panel.num_locations(), panel.num_channels());
	DatasetMeta meta = panel.meta();
	meta.missing_sentinel.reset();
	if (panel.empty()) {
		return PanelDataset::empty_like(std::move(meta));
	}
	const WeeklyCalendar calendar(panel.meta());
	const std::size_t stride = panel.series_count();
	std::vector<double> out(panel.values().size(), std::numeric_limits<double>::quiet_NaN());
	std::vector<std::uint8_t> mask(out.size(), 0);
	for (std::size_t t = 0; t < panel.num_timesteps(); ++t) {
		const std::size_t base = static_cast<std::size_t>(calendar.slot(t)) * stride;
		for (std::size_t j = 0; j < stride; ++j) {
			const std::size_t i = t * stride + j;
			const std::size_t pi = base + j;
			if (!panel.mask()[i] || !profile.defined(pi)) {
				continue;
			}
			out[i] = (panel.values()[i] - profile.mean[pi]) / scaling.scale(profile.std[pi]);
			mask[i] = 1;
		}
	}
	return PanelDataset::from_values(std::move(meta), std::move(out), &mask);
}

/// Inverse of residualize for rows whose weekly slots are given: y = y' * scale + a.
inline MaskedTensor reconstruct(const MaskedTensor &residuals, const SeasonalProfile &profile,
                                std::span<const std::int64_t> row_slots, const ResidualScaling &scaling = {}) {
	scaling.validate();
	if (row_slots.size() != residuals.rows) {
		throw Error(ErrorKind::shape_mismatch, "reconstruct: one weekly slot per row required");
	}
	if (profile.locations != residuals.locations || profile.channels != residuals.channels) {
		throw Error(ErrorKind::shape_mismatch, "reconstruct: profile shape differs from residual shape");
	}
	MaskedTensor out(residuals.rows, residuals.locations, residuals.channels);
	const std::size_t stride = residuals.locations * residuals.channels;
	for (std::size_t r = 0; r < residuals.rows; ++r) {
		const std::size_t base = static_cast<std::size_t>(row_slots[r]) * stride;
		for (std::size_t j = 0; j < stride; ++j) {
			const std::size_t i = r * stride + j;
			const std::size_t pi = base + j;
			if (residuals.mask[i] && profile.defined(pi)) {
				out.set(i, residuals.values[i] * scaling.scale(profile.std[pi]) + profile.mean[pi]);
			}
		}
	}
	return out;
}

/// Convenience overload: rows are timesteps of the dataset described by `meta`.
inline MaskedTensor reconstruct(const MaskedTensor &residuals, const SeasonalProfile &profile, const DatasetMeta &meta,
                                std::span<const std::size_t> timesteps, const ResidualScaling &scaling = {}) {
	detail::check_compatible(profile, meta.granularity_s, residuals.locations, residuals.channels);
	const WeeklyCalendar calendar(meta);
	std::vector<std::int64_t> slots(timesteps.size());
	std::transform(timesteps.begin(), timesteps.end(), slots.begin(), [&](std::size_t t) { return calendar.slot(t); });
	return reconstruct(residuals, profile, slots, scaling);
}

/// Historical-average forecast for the given weekly slots: row r gets the profile
/// mean of slot row_slots[r]; zero-count cells stay masked.
inline MaskedTensor ha_forecast(const SeasonalProfile &profile, std::span<const std::int64_t> row_slots) {
	MaskedTensor out(row_slots.size(), profile.locations, profile.channels);
	const std::size_t stride = profile.locations * profile.channels;
	for (std::size_t r = 0; r < row_slots.size(); ++r) {
		const std::size_t base = static_cast<std::size_t>(row_slots[r]) * stride;
		for (std::size_t j = 0; j < stride; ++j) {
			if (profile.defined(base + j)) {
				out.set(r * stride + j, profile.mean[base + j]);
			}
		}
	}
	return out;
}

inline MaskedTensor ha_forecast(const SeasonalProfile &profile, const DatasetMeta &meta,
                                std::span<const std::size_t> timesteps) {
	detail::check_compatible(profile, meta.granularity_s, meta.num_locations, meta.num_channels);
	const WeeklyCalendar calendar(meta);
	std::vector<std::int64_t> slots(timesteps.size());
	std::transform(timesteps.begin(), timesteps.end(), slots.begin(), [&](std::size_t t) { return calendar.slot(t); });
	return ha_forecast(profile, slots);
}

// ---------------------------------------------------------------------------
// Export: profile.f32 holds mean, then std, then count, each a float32
// [slots_per_week, N, C] block; profile.json describes the shape.

inline void save_profile(const SeasonalProfile &p, const std::filesystem::path &dir) {
	detail::ensure_directory(dir);
	const nlohmann::json j{{"slots_per_week", p.slots_per_week},
	                       {"num_locations", p.locations},
	                       {"num_channels", p.channels},
	                       {"granularity_s", p.granularity_s},
	                       {"layout", "mean,std,count"},
	                       {"empty_cells", p.empty_cells()}};
	detail::write_text_file(dir / "profile.json", j.dump(2) + "\n");
	std::vector<float> raw;
	raw.reserve(p.mean.size() * 3);
	for (double v : p.mean) raw.push_back(static_cast<float>(v));
	for (double v : p.std) raw.push_back(static_cast<float>(v));
	for (auto k : p.count) raw.push_back(static_cast<float>(k));
	detail::write_f32_file(dir / "profile.f32", raw);
}

inline SeasonalProfile load_profile(const std::filesystem::path &dir) {
	const nlohmann::json j = detail::read_json_file(dir / "profile.json");
	SeasonalProfile p;
	try {
		j.at("slots_per_week").get_to(p.slots_per_week);
		j.at("num_locations").get_to(p.locations);
		j.at("num_channels").get_to(p.channels);
		j.at("granularity_s").get_to(p.granularity_s);
	} catch (const nlohmann::json::exception &e) {
		throw Error(ErrorKind::format, std::string("profile.json: ") + e.what());
	}
	if (p.slots_per_week != WeeklyIndex::from_granularity(p.granularity_s).slots_per_week) {
		throw Error(ErrorKind::format, "profile.json: slots_per_week inconsistent with granularity_s");
	}
	const std::size_t cells = static_cast<std::size_t>(p.slots_per_week) * p.locations * p.channels;
	const std::vector<float> raw = detail::read_f32_file(dir / "profile.f32");
	if (raw.size() != 3 * cells) {
		throw Error(ErrorKind::shape_mismatch, "profile.f32 holds " + std::to_string(raw.size()) + " floats, expected " +
		                                           std::to_string(3 * cells));
	}
	p.mean.assign(raw.begin(), raw.begin() + static_cast<std::ptrdiff_t>(cells));
	p.std.assign(raw.begin() + static_cast<std::ptrdiff_t>(cells), raw.begin() + static_cast<std::ptrdiff_t>(2 * cells));
	p.count.resize(cells);
	for (std::size_t i = 0; i < cells; ++i) {
		p.count[i] = static_cast<std::int64_t>(raw[2 * cells + i]);
	}
	return p;
}

} // namespace mobench
