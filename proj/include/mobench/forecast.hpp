#pragma once

// Rolling evaluation grid shared by all forecasters: a set of forecast origins
// (the last observed timestep) and a list of horizons. The forecast for origin
// o and horizon k targets timestep o + k.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mobench/calendar.hpp"
#include "mobench/error.hpp"
#include "mobench/panel.hpp"
#include "mobench/seasonal.hpp"
#include "mobench/tensor.hpp"

namespace mobench {

/// Which timesteps may serve as lags of a forecast made inside an evaluation range.
enum class LagWindow {
	within_range, // lags and targets all inside [begin, end)
	with_history, // lags may reach back before `begin`; targets inside
};

inline const char *to_string(LagWindow w) { return w == LagWindow::within_range ? "within_range" : "with_history"; }

inline LagWindow parse_lag_window(const std::string &s) {
	if (s == "within_range") return LagWindow::within_range;
	if (s == "with_history") return LagWindow::with_history;
	throw Error(ErrorKind::invalid_argument, "unknown lag window '" + s + "' (within_range | with_history)");
}

struct ForecastGrid {
	std::vector<int> horizons;         // ascending, >= 1
	std::vector<std::size_t> origins; // global timestep indices, ascending

	std::size_t target(std::size_t origin_idx, std::size_t horizon_idx) const {
		return origins[origin_idx] + static_cast<std::size_t>(horizons[horizon_idx]);
	}
};

inline void validate_horizons(const std::vector<int> &horizons) {
	if (horizons.empty()) {
		throw Error(ErrorKind::invalid_argument, "at least one horizon is required");
	}
	for (std::size_t i = 0; i < horizons.size(); ++i) {
		if (horizons[i] < 1 || (i > 0 && horizons[i] <= horizons[i - 1])) {
			throw Error(ErrorKind::invalid_argument, "horizons must be >= 1 and strictly ascending");
		}
	}
}

/// Every admissible origin for evaluating `horizons` over timesteps [begin, end)
/// with `lags` lag values per forecast. The same origins serve every horizon.
inline ForecastGrid make_grid(std::size_t begin, std::size_t end, int lags, std::vector<int> horizons,
                              LagWindow window = LagWindow::within_range) {
	validate_horizons(horizons);
	if (lags < 1) {
		throw Error(ErrorKind::invalid_argument, "lag order must be >= 1");
	}
	ForecastGrid grid;
	grid.horizons = std::move(horizons);
	const auto h = static_cast<std::size_t>(lags);
	const auto k_min = static_cast<std::size_t>(grid.horizons.front());
	const auto k_max = static_cast<std::size_t>(grid.horizons.back());
	std::size_t first = 0;
	if (window == LagWindow::within_range) {
		first = begin + h - 1;
	} else {
		first = std::max(h - 1, begin >= k_min ? begin - k_min : 0);
	}
	for (std::size_t o = first; o + k_max < end; ++o) {
		grid.origins.push_back(o);
	}
	return grid;
}

/// Forecasts (or truths) on a grid: one [origins, N, C] tensor per horizon.
struct ForecastSet {
	ForecastGrid grid;
	std::vector<MaskedTensor> per_horizon;
};

/// Observed values at the grid's target timesteps.
inline ForecastSet truth_on_grid(const PanelDataset &panel, const ForecastGrid &grid) {
	ForecastSet out{grid, {}};
	const std::size_t stride = panel.series_count();
	for (std::size_t hi = 0; hi < grid.horizons.size(); ++hi) {
		MaskedTensor m(grid.origins.size(), panel.num_locations(), panel.num_channels());
		for (std::size_t oi = 0; oi < grid.origins.size(); ++oi) {
			const std::size_t t = grid.target(oi, hi);
			if (t >= panel.num_timesteps()) {
				throw Error(ErrorKind::invalid_argument, "grid target beyond the end of the panel");
			}
			for (std::size_t j = 0; j < stride; ++j) {
				if (panel.mask()[t * stride + j]) {
					m.set(oi * stride + j, panel.values()[t * stride + j]);
				}
			}
		}
		out.per_horizon.push_back(std::move(m));
	}
	return out;
}

/// Historical-average forecasts on a grid; identical for every horizon that
/// targets the same timestep.
inline ForecastSet forecast_ha(const DatasetMeta &meta, const SeasonalProfile &profile, const ForecastGrid &grid) {
	ForecastSet out{grid, {}};
	for (std::size_t hi = 0; hi < grid.horizons.size(); ++hi) {
		std::vector<std::size_t> targets(grid.origins.size());
		for (std::size_t oi = 0; oi < targets.size(); ++oi) {
			targets[oi] = grid.target(oi, hi);
		}
		out.per_horizon.push_back(ha_forecast(profile, meta, targets));
	}
	return out;
}


// ---------------------------------------------------------------------------
// Forecast directory: forecast.json (grid + shape) and values.f32, float32
// [horizon, origin, location, channel] with NaN where no forecast exists.

inline void save_forecasts(const ForecastSet &f, const DatasetMeta &meta, const std::string &method,
                           const std::filesystem::path &dir) {
	detail::ensure_directory(dir);
	const nlohmann::json j{{"dataset", meta.name},
	                       {"method", method},
	                       {"granularity_s", meta.granularity_s},
	                       {"num_locations", meta.num_locations},
	                       {"num_channels", meta.num_channels},
	                       {"horizons", f.grid.horizons},
	                       {"origins", f.grid.origins},
	                       {"layout", "horizon,origin,location,channel"}};
	detail::write_text_file(dir / "forecast.json", j.dump(1) + "\n");
	std::vector<float> raw;
	for (const auto &m : f.per_horizon) {
		for (std::size_t i = 0; i < m.size(); ++i) {
			raw.push_back(m.mask[i] ? static_cast<float>(m.values[i]) : std::numeric_limits<float>::quiet_NaN());
		}
	}
	detail::write_f32_file(dir / "values.f32", raw);
}

inline ForecastSet load_forecasts(const std::filesystem::path &dir) {
	if (!std::filesystem::is_directory(dir)) {
		throw Error(ErrorKind::io, "forecast directory " + dir.string() + " does not exist");
	}
	const nlohmann::json j = detail::read_json_file(dir / "forecast.json");
	ForecastSet f;
	std::size_t N = 0, C = 0;
	try {
		j.at("horizons").get_to(f.grid.horizons);
		j.at("origins").get_to(f.grid.origins);
		j.at("num_locations").get_to(N);
		j.at("num_channels").get_to(C);
	} catch (const nlohmann::json::exception &e) {
		throw Error(ErrorKind::format, std::string("forecast.json: ") + e.what());
	}
	validate_horizons(f.grid.horizons);
	const std::vector<float> raw = detail::read_f32_file(dir / "values.f32");
	const std::size_t block = f.grid.origins.size() * N * C;
	if (raw.size() != block * f.grid.horizons.size()) {
		throw Error(ErrorKind::shape_mismatch, "values.f32 size does not match forecast.json");
	}
	for (std::size_t hi = 0; hi < f.grid.horizons.size(); ++hi) {
		MaskedTensor m(f.grid.origins.size(), N, C);
		for (std::size_t i = 0; i < block; ++i) {
			const float v = raw[hi * block + i];
			if (std::isfinite(v)) {
				m.set(i, v);
			}
		}
		f.per_horizon.push_back(std::move(m));
	}
	return f;
}

} // namespace mobench
