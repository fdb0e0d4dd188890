#pragma once

// Order-h linear autoregression on seasonal residuals (the "+LR" of HA+LR).
//
// A residual row for horizon k pairs target y'[t] with the h lags
// y'[t-k], y'[t-k-1], ..., y'[t-k-h+1] (most recent first) of the same series.
// `direct` fits one regression per horizon; `recursive` fits k = 1 only and
// rolls it forward at prediction time.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mobench/error.hpp"
#include "mobench/forecast.hpp"
#include "mobench/lstsq.hpp"
#include "mobench/panel.hpp"
#include "mobench/parallel.hpp"
#include "mobench/seasonal.hpp"
#include "mobench/tensor.hpp"

namespace mobench {

enum class Strategy { direct, recursive };
enum class Scope { pooled, per_location };

inline const char *to_string(Strategy s) { return s == Strategy::direct ? "direct" : "recursive"; }
inline const char *to_string(Scope s) { return s == Scope::pooled ? "pooled" : "per_location"; }

inline Strategy parse_strategy(const std::string &s) {
	if (s == "direct") return Strategy::direct;
	if (s == "recursive") return Strategy::recursive;
	throw Error(ErrorKind::invalid_argument, "unknown strategy '" + s + "' (direct | recursive)");
}

inline Scope parse_scope(const std::string &s) {
	if (s == "pooled") return Scope::pooled;
	if (s == "per_location") return Scope::per_location;
	throw Error(ErrorKind::invalid_argument, "unknown scope '" + s + "' (pooled | per_location)");
}

struct RegressionConfig {
	int h = 12;
	std::vector<int> horizons{1};
	Strategy strategy = Strategy::direct;
	Scope scope = Scope::pooled;
	double ridge = 1e-8;
	bool include_intercept = true;
	// Treat unobserved lags as residual 0 (the seasonal mean) instead of
	// dropping the row / masking the forecast.
	bool fill_missing_lags = false;

	void validate() const {
		if (h < 1) {
			throw Error(ErrorKind::invalid_argument, "lag order h must be >= 1");
		}
		validate_horizons(horizons);
		if (!(ridge >= 0.0)) {
			throw Error(ErrorKind::invalid_argument, "ridge must be >= 0");
		}
	}

	/// Horizons that get their own fitted regression.
	std::vector<int> fitted_horizons() const { return strategy == Strategy::direct ? horizons : std::vector<int>{1}; }

	bool operator==(const RegressionConfig &) const = default;
};

inline void to_json(nlohmann::json &j, const RegressionConfig &c) {
	j = nlohmann::json{{"h", c.h},
	                   {"horizons", c.horizons},
	                   {"strategy", to_string(c.strategy)},
	                   {"scope", to_string(c.scope)},
	                   {"ridge", c.ridge},
	                   {"include_intercept", c.include_intercept},
	                   {"fill_missing_lags", c.fill_missing_lags}};
}

inline void from_json(const nlohmann::json &j, RegressionConfig &c) {
	j.at("h").get_to(c.h);
	j.at("horizons").get_to(c.horizons);
	c.strategy = parse_strategy(j.at("strategy").get<std::string>());
	c.scope = parse_scope(j.at("scope").get<std::string>());
	j.at("ridge").get_to(c.ridge);
	j.at("include_intercept").get_to(c.include_intercept);
	c.fill_missing_lags = j.value("fill_missing_lags", false);
}

// ---------------------------------------------------------------------------
// Lag rows

namespace detail {

/// Calls fn(t, lags, target) for every admissible row of one series, where
/// `series`/`valid` are the residual values/mask of that series over time.
template <class Fn>
void for_each_series_row(std::span<const double> series, std::span<const std::uint8_t> valid, int h, int k,
                         bool fill_missing, std::vector<double> &lags, Fn &&fn) {
	const std::size_t T = series.size();
	const auto first = static_cast<std::size_t>(h + k - 1);
	lags.resize(static_cast<std::size_t>(h));
	// run[t] = number of consecutive valid entries ending at t
	std::vector<std::size_t> run;
	if (!fill_missing) {
		run.resize(T);
		std::size_t r = 0;
		for (std::size_t t = 0; t < T; ++t) {
			r = valid[t] ? r + 1 : 0;
			run[t] = r;
		}
	}
	for (std::size_t t = first; t < T; ++t) {
		if (!valid[t]) {
			continue;
		}
		const std::size_t last_lag = t - static_cast<std::size_t>(k);
		if (!fill_missing && run[last_lag] < static_cast<std::size_t>(h)) {
			continue;
		}
		for (int l = 0; l < h; ++l) {
			const std::size_t s = last_lag - static_cast<std::size_t>(l);
			lags[static_cast<std::size_t>(l)] = valid[s] ? series[s] : 0.0;
		}
		fn(t, std::span<const double>(lags), series[t]);
	}
}

/// Copies series j of a panel into contiguous buffers.
inline void gather_series(const PanelDataset &panel, std::size_t j, std::vector<double> &values,
                          std::vector<std::uint8_t> &valid) {
	const std::size_t T = panel.num_timesteps();
	const std::size_t stride = panel.series_count();
	values.resize(T);
	valid.resize(T);
	for (std::size_t t = 0; t < T; ++t) {
		values[t] = panel.values()[t * stride + j];
		valid[t] = panel.mask()[t * stride + j];
	}
}

} // namespace detail

struct RowIndex {
	std::size_t t = 0;
	std::size_t n = 0;
	std::size_t c = 0;
	bool operator==(const RowIndex &) const = default;
};

struct LagDesign {
	DesignMatrix X;
	std::vector<double> y;
	std::vector<RowIndex> rows;
};

/// Materialized lag design for horizon k. Rows are ordered by series (location,
/// then channel) and by time within a series. `location` restricts the rows to
/// one location.
inline LagDesign build_lag_matrix(const PanelDataset &residuals, int h, int k,
                                  std::optional<std::size_t> location = std::nullopt, bool fill_missing = false) {
	if (h < 1 || k < 1) {
		throw Error(ErrorKind::invalid_argument, "build_lag_matrix: h and k must be >= 1");
	}
	if (residuals.num_timesteps() <= static_cast<std::size_t>(h + k - 1)) {
		throw Error(ErrorKind::empty_design, "build_lag_matrix: series of length " +
		                                         std::to_string(residuals.num_timesteps()) + " too short for h=" +
		                                         std::to_string(h) + ", k=" + std::to_string(k));
	}
	LagDesign d;
	d.X.cols = static_cast<std::size_t>(h);
	std::vector<double> values, lags;
	std::vector<std::uint8_t> valid;
	const std::size_t C = residuals.num_channels();
	for (std::size_t j = 0; j < residuals.series_count(); ++j) {
		const std::size_t n = j / C, c = j % C;
		if (location && n != *location) {
			continue;
		}
		detail::gather_series(residuals, j, values, valid);
		detail::for_each_series_row(values, valid, h, k, fill_missing, lags,
		                            [&](std::size_t t, std::span<const double> x, double target) {
			                            d.X.data.insert(d.X.data.end(), x.begin(), x.end());
			                            d.y.push_back(target);
			                            d.rows.push_back({t, n, c});
		                            });
	}
	if (d.y.empty()) {
		throw Error(ErrorKind::empty_design, "build_lag_matrix: no row has an observed target and " +
		                                         std::to_string(h) + " observed lags");
	}
	return d;
}

// ---------------------------------------------------------------------------
// Model

struct ResidualRegressionModel {
	RegressionConfig config;
	std::size_t locations = 0;
	// fits[i][g]: i indexes config.fitted_horizons(), g the location (per_location)
	// or 0 (pooled).
	std::vector<std::vector<OlsFit>> fits;

	const OlsFit &fit_for(std::size_t fitted_idx, std::size_t location) const {
		return fits.at(fitted_idx).at(config.scope == Scope::pooled ? 0 : location);
	}

	/// Residual forecasts, one per configured horizon, from `lags` ordered most
	/// recent first (lags[0] = y' at the origin).
	std::vector<double> predict(std::span<const double> lags, std::size_t location = 0) const {
		const auto h = static_cast<std::size_t>(config.h);
		if (lags.size() < h) {
			throw Error(ErrorKind::invalid_argument, "predict: " + std::to_string(h) + " lags required");
		}
		std::vector<double> out(config.horizons.size());
		if (config.strategy == Strategy::direct) {
			for (std::size_t i = 0; i < out.size(); ++i) {
				out[i] = fit_for(i, location).predict(lags.first(h));
			}
			return out;
		}
		const OlsFit &one_step = fit_for(0, location);
		std::vector<double> window(lags.begin(), lags.begin() + static_cast<std::ptrdiff_t>(h));
		std::size_t next = 0;
		for (int step = 1; step <= config.horizons.back(); ++step) {
			const double yhat = one_step.predict(window);
			window.insert(window.begin(), yhat);
			window.pop_back();
			if (step == config.horizons[next]) {
				out[next++] = yhat;
			}
		}
		return out;
	}
};

/// Fits the residual regression on a residual panel (typically train + val).
inline ResidualRegressionModel fit_halr(const PanelDataset &residuals, const RegressionConfig &config,
                                        std::size_t jobs = 1) {
	config.validate();
	if (residuals.empty()) {
		throw Error(ErrorKind::empty_design, "fit_halr: empty residual panel");
	}
	ResidualRegressionModel model;
	model.config = config;
	model.locations = residuals.num_locations();
	const std::vector<int> ks = config.fitted_horizons();
	const std::size_t groups = config.scope == Scope::pooled ? 1 : residuals.num_locations();
	model.fits.assign(ks.size(), std::vector<OlsFit>(groups));
	const std::size_t C = residuals.num_channels();

	parallel_for(ks.size() * groups, jobs, [&](std::size_t task) {
		const std::size_t ki = task / groups, g = task % groups;
		const int k = ks[ki];
		LeastSquaresAccumulator acc(static_cast<std::size_t>(config.h), config.include_intercept);
		std::vector<double> values, lags;
		std::vector<std::uint8_t> valid;
		const std::size_t j_begin = groups == 1 ? 0 : g * C;
		const std::size_t j_end = groups == 1 ? residuals.series_count() : (g + 1) * C;
		for (std::size_t j = j_begin; j < j_end; ++j) {
			detail::gather_series(residuals, j, values, valid);
			detail::for_each_series_row(values, valid, config.h, k, config.fill_missing_lags, lags,
			                            [&](std::size_t, std::span<const double> x, double y) { acc.add_row(x, y); });
		}
		try {
			model.fits[ki][g] = acc.solve(config.ridge);
		} catch (const Error &e) {
			std::string where = "horizon " + std::to_string(k);
			if (groups > 1) {
				where += ", location " + std::to_string(g);
			}
			throw Error(e.kind(), std::string(e.what()) + " [" + where + "]");
		}
	});
	return model;
}

/// HA+LR forecasts over a grid: residualize the panel with the profile,
/// predict residuals from observed lags at each origin and add the seasonal
/// pattern back at each target.
inline ForecastSet forecast_halr(const PanelDataset &panel, const SeasonalProfile &profile,
                                 const ResidualRegressionModel &model, const ForecastGrid &grid,
                                 const ResidualScaling &scaling = {}) {
	const auto &cfg = model.config;
	if (grid.horizons != cfg.horizons) {
		throw Error(ErrorKind::invalid_argument, "forecast_halr: grid horizons differ from the model horizons");
	}
	if (model.locations != panel.num_locations()) {
		throw Error(ErrorKind::shape_mismatch, "forecast_halr: model fitted for a different number of locations");
	}
	const PanelDataset residuals = residualize(panel, profile, scaling);
	const WeeklyCalendar calendar(panel.meta());
	const std::size_t stride = panel.series_count();
	const std::size_t C = panel.num_channels();
	const auto h = static_cast<std::size_t>(cfg.h);

	std::vector<MaskedTensor> resid_pred(grid.horizons.size(),
	                                     MaskedTensor(grid.origins.size(), panel.num_locations(), C));
	std::vector<double> lags(h);
	for (std::size_t oi = 0; oi < grid.origins.size(); ++oi) {
		const std::size_t o = grid.origins[oi];
		if (o + 1 < h || o >= panel.num_timesteps()) {
			throw Error(ErrorKind::invalid_argument, "forecast_halr: origin " + std::to_string(o) + " lacks " +
			                                             std::to_string(h) + " lags");
		}
		for (std::size_t j = 0; j < stride; ++j) {
			bool ok = true;
			for (std::size_t l = 0; l < h; ++l) {
				const std::size_t i = (o - l) * stride + j;
				if (residuals.mask()[i]) {
					lags[l] = residuals.values()[i];
				} else if (cfg.fill_missing_lags) {
					lags[l] = 0.0;
				} else {
					ok = false;
					break;
				}
			}
			if (!ok) {
				continue;
			}
			const std::vector<double> yhat = model.predict(lags, j / C);
			for (std::size_t hi = 0; hi < yhat.size(); ++hi) {
				resid_pred[hi].set(oi * stride + j, yhat[hi]);
			}
		}
	}

	ForecastSet out{grid, {}};
	for (std::size_t hi = 0; hi < grid.horizons.size(); ++hi) {
		std::vector<std::int64_t> slots(grid.origins.size());
		for (std::size_t oi = 0; oi < slots.size(); ++oi) {
			slots[oi] = calendar.slot(grid.target(oi, hi));
		}
		out.per_horizon.push_back(reconstruct(resid_pred[hi], profile, slots, scaling));
	}
	return out;
}

// ---------------------------------------------------------------------------
// Model export (decimal float64 JSON)

inline nlohmann::json model_to_json(const ResidualRegressionModel &m) {
	nlohmann::json fitted = nlohmann::json::array();
	const auto ks = m.config.fitted_horizons();
	for (std::size_t i = 0; i < ks.size(); ++i) {
		nlohmann::json groups = nlohmann::json::array();
		for (std::size_t g = 0; g < m.fits[i].size(); ++g) {
			const OlsFit &f = m.fits[i][g];
			groups.push_back({{"location", m.config.scope == Scope::pooled ? nlohmann::json(nullptr) : nlohmann::json(g)},
			                  {"coef", f.coef},
			                  {"intercept", f.intercept},
			                  {"rows", f.rows},
			                  {"rss", f.rss},
			                  {"rmse", f.rmse()}});
		}
		fitted.push_back({{"horizon", ks[i]}, {"fits", groups}});
	}
	return {{"config", m.config}, {"locations", m.locations}, {"models", fitted}};
}

inline ResidualRegressionModel model_from_json(const nlohmann::json &j) {
	try {
		ResidualRegressionModel m;
		m.config = j.at("config").get<RegressionConfig>();
		m.config.validate();
		j.at("locations").get_to(m.locations);
		const auto ks = m.config.fitted_horizons();
		const auto &models = j.at("models");
		if (models.size() != ks.size()) {
			throw Error(ErrorKind::format, "model JSON: expected " + std::to_string(ks.size()) + " fitted horizons");
		}
		const std::size_t groups = m.config.scope == Scope::pooled ? 1 : m.locations;
		for (const auto &entry : models) {
			std::vector<OlsFit> fits;
			for (const auto &g : entry.at("fits")) {
				OlsFit f;
				g.at("coef").get_to(f.coef);
				g.at("intercept").get_to(f.intercept);
				g.at("rows").get_to(f.rows);
				g.at("rss").get_to(f.rss);
				if (f.coef.size() != static_cast<std::size_t>(m.config.h)) {
					throw Error(ErrorKind::format, "model JSON: coefficient vector length differs from h");
				}
				fits.push_back(std::move(f));
			}
			if (fits.size() != groups) {
				throw Error(ErrorKind::format, "model JSON: expected " + std::to_string(groups) + " fits per horizon");
			}
			m.fits.push_back(std::move(fits));
		}
		return m;
	} catch (const nlohmann::json::exception &e) {
		throw Error(ErrorKind::format, std::string("model JSON: ") + e.what());
	}
}

inline void save_model(const ResidualRegressionModel &m, const std::filesystem::path &path) {
	detail::write_text_file(path, model_to_json(m).dump(2) + "\n");
}

inline ResidualRegressionModel load_model(const std::filesystem::path &path) {
	return model_from_json(detail::read_json_file(path));
}

} // namespace mobench
