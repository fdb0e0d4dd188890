#pragma once

// Benchmark registry (nine public spatio-temporal transport datasets with their
// published experimental setups) and the HA / HA+LR experiment runner.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mobench/arres.hpp"
#include "mobench/error.hpp"
#include "mobench/forecast.hpp"
#include "mobench/metrics.hpp"
#include "mobench/panel.hpp"
#include "mobench/seasonal.hpp"

namespace mobench {

enum class Method { ha, ha_lr };

inline const char *to_string(Method m) { return m == Method::ha ? "HA" : "HA+LR"; }
inline const char *file_stem(Method m) { return m == Method::ha ? "ha" : "ha_lr"; }

inline Method parse_method(const std::string &s) {
	if (s == "HA" || s == "ha") return Method::ha;
	if (s == "HA+LR" || s == "ha+lr" || s == "ha_lr" || s == "halr") return Method::ha_lr;
	throw Error(ErrorKind::invalid_argument, "unknown method '" + s + "' (HA | HA+LR)");
}

/// metric name ("MAE", "MAPE", "RMSE") -> values; one value compares against
/// the horizon-averaged metric, otherwise one value per horizon.
using MetricTargets = std::map<std::string, std::vector<double>>;

struct BenchmarkSpec {
	std::string id;
	std::string title;
	std::string dataset_dir; // relative to the data root unless absolute
	std::string timespan;    // as published; informational
	std::int64_t granularity_s = 300;
	SplitSpec split;
	std::vector<int> horizons; // steps ahead
	bool seq2seq = false;
	int lag_h = 12;
	double mape_floor = 0.0;
	AggregateMode aggregate_mode = AggregateMode::pool_cells;
	std::vector<std::size_t> channels; // channel subset; empty = all
	std::vector<std::string> holidays; // used when the dataset meta lists none
	std::optional<double> missing_sentinel; // used when the dataset meta declares none
	std::optional<std::size_t> expected_timesteps;
	std::optional<std::size_t> expected_locations;
	std::map<Method, MetricTargets> paper_targets;
	std::map<Method, double> tolerance{{Method::ha, 0.02}, {Method::ha_lr, 0.05}};
	std::string notes;

	// Run options.
	Strategy strategy = Strategy::direct;
	Scope scope = Scope::pooled;
	double ridge = 1e-8;
	bool include_intercept = true;
	bool fill_missing_lags = false;
	bool normalized = false;
	double s_floor = 1e-3;
	bool lr_fit_on_val = true; // fit the regression on train + val (else train only)
	LagWindow lag_window = LagWindow::within_range;

	RegressionConfig regression() const {
		RegressionConfig c;
		c.h = lag_h;
		c.horizons = horizons;
		c.strategy = strategy;
		c.scope = scope;
		c.ridge = ridge;
		c.include_intercept = include_intercept;
		c.fill_missing_lags = fill_missing_lags;
		return c;
	}
	ResidualScaling scaling() const { return {normalized, s_floor}; }

	/// Human label of a horizon, e.g. "15 min" or "2 h".
	std::string horizon_label(int steps) const {
		const std::int64_t s = steps * granularity_s;
		if (s % 3600 == 0) return std::to_string(s / 3600) + " h";
		if (s % 60 == 0) return std::to_string(s / 60) + " min";
		return std::to_string(s) + " s";
	}
};

inline std::vector<int> steps_range(int first, int last) {
	std::vector<int> out;
	for (int k = first; k <= last; ++k) out.push_back(k);
	return out;
}

/// The nine benchmark setups. Targets are the published HA and HA+LR results.
inline std::vector<BenchmarkSpec> registry() {
	std::vector<BenchmarkSpec> r;
	{
		BenchmarkSpec b;
		b.id = "pemsd7m";
		b.title = "PeMSD7(M) - traffic speeds, California";
		b.timespan = "01/04/2016 - 30/06/2016";
		b.granularity_s = 300;
		b.split = SplitSpec::days(34, 5, 5);
		b.horizons = {3, 6, 9};
		b.expected_timesteps = 12672;
		b.expected_locations = 228;
		b.holidays = {"2012-05-28"};
		b.paper_targets[Method::ha] = {{"MAE", {3.90}}, {"MAPE", {10.14}}, {"RMSE", {7.09}}};
		b.paper_targets[Method::ha_lr] = {
		    {"MAE", {2.48, 3.13, 3.45}}, {"MAPE", {5.81, 7.65, 8.57}}, {"RMSE", {4.22, 5.50, 6.10}}};
		b.notes = "Upstream V_228.csv covers the 44 weekdays of May-June 2012 (12672 x 228), not the published "
		          "timespan; the converter writes day_dates so weekly slots follow the real calendar.";
		r.push_back(b);
	}
	{
		BenchmarkSpec b;
		b.id = "urban1";
		b.title = "Urban1 - traffic speeds, South Korea";
		b.timespan = "01/04/2018 - 30/04/2018";
		b.granularity_s = 300;
		b.split = SplitSpec::fractions(0.7, 0.1, 0.2);
		b.horizons = {6, 9, 12};
		b.paper_targets[Method::ha] = {{"MAE", {3.18}}, {"MAPE", {14.19}}, {"RMSE", {4.79}}};
		b.paper_targets[Method::ha_lr] = {
		    {"MAE", {3.04, 3.10, 3.13}}, {"MAPE", {13.39, 13.73, 13.87}}, {"RMSE", {4.60, 4.67, 4.71}}};
		b.notes = "No South Korean public holiday falls in April 2018.";
		r.push_back(b);
	}
	{
		BenchmarkSpec b;
		b.id = "nyc-citibike-pickdrop";
		b.title = "NYC Citi Bike - pickups and dropoffs";
		b.timespan = "01/04/2016 - 01/04/2016";
		b.granularity_s = 1800;
		b.split = SplitSpec::days(63, 14, 14);
		b.horizons = steps_range(1, 12);
		b.seq2seq = true;
		b.expected_timesteps = 4368;
		b.expected_locations = 250;
		b.holidays = {"2016-05-30"};
		b.paper_targets[Method::ha] = {{"MAE", {1.726}}, {"RMSE", {2.871}}};
		b.paper_targets[Method::ha_lr] = {{"MAE", {1.738}}, {"RMSE", {2.758}}};
		b.notes = "The published timespan reads 01/04/2016 - 01/04/2016; the 63/14/14-day split implies "
		          "91 days (April-June 2016), which the upstream tensor (4368 half-hours) confirms.";
		r.push_back(b);
	}
	{
		BenchmarkSpec b;
		b.id = "pemsd4";
		b.title = "PeMSD4 - traffic volumes, California";
		b.timespan = "01/01/2018 - 28/02/2018";
		b.granularity_s = 300;
		b.split = SplitSpec::fractions(0.6, 0.2, 0.2);
		b.horizons = steps_range(1, 12);
		b.seq2seq = true;
		b.channels = {0};
		b.expected_timesteps = 16992;
		b.expected_locations = 307;
		b.holidays = {"2018-01-01", "2018-01-15", "2018-02-19"};
		b.paper_targets[Method::ha] = {{"MAE", {26.26}}, {"MAPE", {17.07}}, {"RMSE", {42.87}}};
		b.paper_targets[Method::ha_lr] = {{"MAE", {20.03}}, {"MAPE", {13.39}}, {"RMSE", {32.73}}};
		b.notes = "Channel 0 (flow) of the upstream [T, 307, 3] tensor.";
		r.push_back(b);
	}
	{
		BenchmarkSpec b;
		b.id = "sz-taxi";
		b.title = "SZ-taxi - traffic speeds, Shenzhen";
		b.timespan = "01/01/2015 - 31/01/2015";
		b.granularity_s = 900;
		b.split = SplitSpec::fractions(0.8, 0.0, 0.2);
		b.horizons = {1, 2, 3, 4};
		b.expected_timesteps = 2976;
		b.expected_locations = 156;
		b.holidays = {"2015-01-01", "2015-01-02", "2015-01-03"};
		b.paper_targets[Method::ha] = {{"MAE", {4.630}}, {"RMSE", {6.463}}};
		b.paper_targets[Method::ha_lr] = {{"MAE", {3.464, 3.507, 3.534, 3.554}},
		                                  {"RMSE", {4.998, 5.057, 5.091, 5.115}}};
		r.push_back(b);
	}
	{
		BenchmarkSpec b;
		b.id = "metr-la";
		b.title = "METR-LA - traffic speeds, Los Angeles";
		b.timespan = "01/03/2012 - 30/06/2012";
		b.granularity_s = 300;
		b.split = SplitSpec::fractions(0.7, 0.1, 0.2);
		b.horizons = {3, 6, 12};
		b.missing_sentinel = 0.0;
		b.expected_timesteps = 34272;
		b.expected_locations = 207;
		b.holidays = {"2012-05-28"};
		b.paper_targets[Method::ha] = {{"MAE", {4.19}}, {"MAPE", {13.0}}, {"RMSE", {7.84}}};
		b.paper_targets[Method::ha_lr] = {
		    {"MAE", {3.28, 3.68, 4.02}}, {"MAPE", {8.8, 10.4, 11.9}}, {"RMSE", {5.71, 6.60, 7.32}}};
		b.notes = "Zero readings are missing values and are masked.";
		r.push_back(b);
	}
	{
		BenchmarkSpec b;
		b.id = "pems-bay";
		b.title = "PEMS-BAY - traffic speeds, California";
		b.timespan = "01/01/2017 - 31/05/2017";
		b.granularity_s = 300;
		b.split = SplitSpec::fractions(0.7, 0.1, 0.2);
		b.horizons = {3, 6, 12};
		b.missing_sentinel = 0.0;
		b.expected_timesteps = 52116;
		b.expected_locations = 325;
		b.holidays = {"2017-01-02", "2017-01-16", "2017-02-20", "2017-05-29"};
		b.paper_targets[Method::ha] = {{"MAE", {2.58}}, {"MAPE", {6.1}}, {"RMSE", {5.04}}};
		b.paper_targets[Method::ha_lr] = {
		    {"MAE", {1.54, 1.91, 2.22}}, {"MAPE", {3.2, 4.3, 5.1}}, {"RMSE", {2.93, 3.83, 4.45}}};
		r.push_back(b);
	}
	{
		BenchmarkSpec b;
		b.id = "nyc-bike-inout";
		b.title = "NYC Citi Bike - in- and out-flows";
		b.timespan = "01/07/2017 - 30/09/2017";
		b.granularity_s = 3600;
		b.split = SplitSpec::fractions(0.8, 0.1, 0.1);
		b.horizons = {1, 2, 3};
		b.expected_timesteps = 2208;
		b.holidays = {"2017-07-04", "2017-09-04"};
		b.paper_targets[Method::ha] = {{"MAE", {5.97}}, {"RMSE", {11.04}}};
		b.paper_targets[Method::ha_lr] = {{"MAE", {5.10, 5.45, 5.56}}, {"RMSE", {8.72, 9.69, 10.04}}};
		r.push_back(b);
	}
	{
		BenchmarkSpec b;
		b.id = "seattle";
		b.title = "Seattle loop data - traffic speeds";
		b.timespan = "01/11/2015 - 31/12/2015";
		b.granularity_s = 300;
		b.split = SplitSpec::days(56, 0, 5);
		b.horizons = {1};
		b.expected_timesteps = 17568;
		b.expected_locations = 323;
		b.holidays = {"2015-11-11", "2015-11-26", "2015-12-25"};
		b.paper_targets[Method::ha] = {{"MAPE", {12.5}}, {"RMSE", {9.82}}};
		b.paper_targets[Method::ha_lr] = {{"MAPE", {5.5}}, {"RMSE", {3.95}}};
		b.notes = "Evaluated without injected missing data.";
		r.push_back(b);
	}
	for (auto &b : r) {
		b.dataset_dir = b.id;
	}
	return r;
}

inline BenchmarkSpec find_benchmark(const std::string &id) {
	for (auto &b : registry()) {
		if (b.id == id) {
			return b;
		}
	}
	throw Error(ErrorKind::invalid_argument, "unknown benchmark id '" + id + "'");
}

// ---------------------------------------------------------------------------
// JSON form of a spec (for fingerprints, reports and config overrides)

inline SplitSpec parse_split(const std::string &text) {
	const auto colon = text.find(':');
	if (colon == std::string::npos) {
		throw Error(ErrorKind::invalid_argument, "split must look like 'fractions:0.7,0.1,0.2' or 'days:34,5,5'");
	}
	const std::string kind = text.substr(0, colon);
	std::vector<double> parts;
	std::stringstream ss(text.substr(colon + 1));
	std::string item;
	while (std::getline(ss, item, ',')) {
		try {
			std::size_t used = 0;
			parts.push_back(std::stod(item, &used));
			if (used != item.size()) throw std::invalid_argument(item);
		} catch (const std::exception &) {
			throw Error(ErrorKind::invalid_argument, "split: bad number '" + item + "'");
		}
	}
	if (parts.size() != 3) {
		throw Error(ErrorKind::invalid_argument, "split needs three components (train, val, test)");
	}
	if (kind == "fractions") return SplitSpec::fractions(parts[0], parts[1], parts[2]);
	if (kind == "days") {
		SplitSpec s{SplitSpec::Kind::days, parts[0], parts[1], parts[2]};
		return s;
	}
	throw Error(ErrorKind::invalid_argument, "split kind must be 'fractions' or 'days'");
}

inline nlohmann::json targets_to_json(const std::map<Method, MetricTargets> &t) {
	nlohmann::json j = nlohmann::json::object();
	for (const auto &[m, metrics] : t) {
		j[to_string(m)] = metrics;
	}
	return j;
}

inline nlohmann::json spec_to_json(const BenchmarkSpec &b) {
	nlohmann::json tol = nlohmann::json::object();
	for (const auto &[m, v] : b.tolerance) tol[to_string(m)] = v;
	return {{"id", b.id},
	        {"title", b.title},
	        {"dataset_dir", b.dataset_dir},
	        {"timespan", b.timespan},
	        {"granularity_s", b.granularity_s},
	        {"split", to_string(b.split)},
	        {"horizons", b.horizons},
	        {"seq2seq", b.seq2seq},
	        {"lag_h", b.lag_h},
	        {"mape_floor", b.mape_floor},
	        {"aggregate_mode", to_string(b.aggregate_mode)},
	        {"channels", b.channels},
	        {"holidays", b.holidays},
	        {"missing_sentinel", b.missing_sentinel ? nlohmann::json(*b.missing_sentinel) : nlohmann::json(nullptr)},
	        {"expected_timesteps", b.expected_timesteps ? nlohmann::json(*b.expected_timesteps) : nlohmann::json(nullptr)},
	        {"expected_locations", b.expected_locations ? nlohmann::json(*b.expected_locations) : nlohmann::json(nullptr)},
	        {"paper_targets", targets_to_json(b.paper_targets)},
	        {"tolerance", tol},
	        {"strategy", to_string(b.strategy)},
	        {"scope", to_string(b.scope)},
	        {"ridge", b.ridge},
	        {"include_intercept", b.include_intercept},
	        {"fill_missing_lags", b.fill_missing_lags},
	        {"normalized", b.normalized},
	        {"s_floor", b.s_floor},
	        {"lr_fit_on_val", b.lr_fit_on_val},
	        {"lag_window", to_string(b.lag_window)}};
}

/// Applies a JSON object of field overrides (keys as in spec_to_json).
inline void apply_overrides(BenchmarkSpec &b, const nlohmann::json &o) {
	if (!o.is_object()) {
		throw Error(ErrorKind::format, "benchmark overrides must be a JSON object");
	}
	try {
		for (const auto &[key, v] : o.items()) {
			if (key == "dataset_dir") v.get_to(b.dataset_dir);
			else if (key == "title") v.get_to(b.title);
			else if (key == "timespan") v.get_to(b.timespan);
			else if (key == "granularity_s") v.get_to(b.granularity_s);
			else if (key == "split") b.split = parse_split(v.get<std::string>());
			else if (key == "horizons") v.get_to(b.horizons);
			else if (key == "seq2seq") v.get_to(b.seq2seq);
			else if (key == "lag_h") v.get_to(b.lag_h);
			else if (key == "mape_floor") v.get_to(b.mape_floor);
			else if (key == "aggregate_mode") b.aggregate_mode = parse_aggregate_mode(v.get<std::string>());
			else if (key == "channels") v.get_to(b.channels);
			else if (key == "holidays") v.get_to(b.holidays);
			else if (key == "missing_sentinel")
				b.missing_sentinel = v.is_null() ? std::nullopt : std::optional<double>(v.get<double>());
			else if (key == "expected_timesteps")
				b.expected_timesteps = v.is_null() ? std::nullopt : std::optional<std::size_t>(v.get<std::size_t>());
			else if (key == "expected_locations")
				b.expected_locations = v.is_null() ? std::nullopt : std::optional<std::size_t>(v.get<std::size_t>());
			else if (key == "strategy") b.strategy = parse_strategy(v.get<std::string>());
			else if (key == "scope") b.scope = parse_scope(v.get<std::string>());
			else if (key == "ridge") v.get_to(b.ridge);
			else if (key == "include_intercept") v.get_to(b.include_intercept);
			else if (key == "fill_missing_lags") v.get_to(b.fill_missing_lags);
			else if (key == "normalized") v.get_to(b.normalized);
			else if (key == "s_floor") v.get_to(b.s_floor);
			else if (key == "lr_fit_on_val") v.get_to(b.lr_fit_on_val);
			else if (key == "lag_window") b.lag_window = parse_lag_window(v.get<std::string>());
			else if (key == "tolerance") {
				for (const auto &[m, t] : v.items()) b.tolerance[parse_method(m)] = t.get<double>();
			} else if (key == "paper_targets") {
				b.paper_targets.clear();
				for (const auto &[m, t] : v.items()) b.paper_targets[parse_method(m)] = t.get<MetricTargets>();
			} else {
				throw Error(ErrorKind::format, "unknown benchmark field '" + key + "'");
			}
		}
	} catch (const nlohmann::json::exception &e) {
		throw Error(ErrorKind::format, std::string("benchmark overrides: ") + e.what());
	}
	validate_horizons(b.horizons);
}

/// Config file layout: {"defaults": {...}, "benchmarks": {"<id>": {...}}}.
/// Defaults apply to every benchmark, then the per-id block.
inline void apply_config(BenchmarkSpec &b, const nlohmann::json &config) {
	if (!config.is_object()) {
		throw Error(ErrorKind::format, "config must be a JSON object");
	}
	for (const auto &[key, _] : config.items()) {
		if (key != "defaults" && key != "benchmarks") {
			throw Error(ErrorKind::format, "config: unknown top-level key '" + key + "'");
		}
	}
	if (config.contains("defaults")) {
		apply_overrides(b, config.at("defaults"));
	}
	if (config.contains("benchmarks") && config.at("benchmarks").contains(b.id)) {
		apply_overrides(b, config.at("benchmarks").at(b.id));
	}
}

// ---------------------------------------------------------------------------
// Runner

enum class TargetStatus { pass, near, fail };

inline const char *to_string(TargetStatus s) {
	switch (s) {
	case TargetStatus::pass: return "PASS";
	case TargetStatus::near: return "NEAR";
	case TargetStatus::fail: return "FAIL";
	}
	return "?";
}

struct TargetCheck {
	std::string metric;
	std::optional<int> horizon; // empty = horizon-averaged
	double target = 0.0;
	std::optional<double> achieved;
	double rel_delta = 0.0;
	double tolerance = 0.0;
	TargetStatus status = TargetStatus::fail;
};

struct MethodResult {
	Method method = Method::ha;
	EvalReport report;
	std::vector<TargetCheck> checks;

	bool all_pass() const {
		return std::all_of(checks.begin(), checks.end(), [](const TargetCheck &c) { return c.status == TargetStatus::pass; });
	}
};

struct BenchmarkResult {
	BenchmarkSpec spec;
	std::vector<MethodResult> methods;
	std::size_t num_timesteps = 0;
	std::size_t num_locations = 0;
	std::size_t num_channels = 0;
	SplitBounds bounds;
};

inline std::optional<double> metric_value(const Metrics &m, const std::string &metric) {
	if (metric == "MAE") return m.mae;
	if (metric == "RMSE") return m.rmse;
	if (metric == "MAPE") return m.mape_pct;
	throw Error(ErrorKind::invalid_argument, "unknown metric '" + metric + "'");
}

/// PASS within tolerance (relative), NEAR within twice the tolerance, else FAIL.
inline std::vector<TargetCheck> compare_targets(const EvalReport &report, const MetricTargets &targets,
                                                double tolerance) {
	std::vector<TargetCheck> out;
	for (const auto &[metric, values] : targets) {
		for (std::size_t i = 0; i < values.size(); ++i) {
			TargetCheck c;
			c.metric = metric;
			c.target = values[i];
			c.tolerance = tolerance;
			if (values.size() == 1) {
				c.achieved = metric_value(report.averaged, metric);
			} else {
				if (values.size() != report.per_horizon.size()) {
					throw Error(ErrorKind::invalid_argument, "target for " + metric + " lists " +
					                                             std::to_string(values.size()) + " horizons, report has " +
					                                             std::to_string(report.per_horizon.size()));
				}
				auto it = std::next(report.per_horizon.begin(), static_cast<std::ptrdiff_t>(i));
				c.horizon = it->first;
				c.achieved = metric_value(it->second, metric);
			}
			if (c.achieved) {
				c.rel_delta = (*c.achieved - c.target) / c.target;
				const double a = std::abs(c.rel_delta);
				c.status = a <= tolerance ? TargetStatus::pass : a <= 2 * tolerance ? TargetStatus::near : TargetStatus::fail;
			}
			out.push_back(c);
		}
	}
	return out;
}

namespace detail {

inline PanelDataset select_channels(const PanelDataset &ds, const std::vector<std::size_t> &channels) {
	if (channels.empty()) {
		return ds;
	}
	DatasetMeta meta = ds.meta();
	meta.num_channels = channels.size();
	meta.channel_names.clear();
	for (auto c : channels) {
		if (c >= ds.num_channels()) {
			throw Error(ErrorKind::shape_mismatch, "channel " + std::to_string(c) + " not in dataset with " +
			                                           std::to_string(ds.num_channels()) + " channels");
		}
		meta.channel_names.push_back(ds.meta().channel_names[c]);
	}
	std::vector<double> values;
	std::vector<std::uint8_t> mask;
	values.reserve(ds.num_timesteps() * ds.num_locations() * channels.size());
	mask.reserve(values.capacity());
	for (std::size_t t = 0; t < ds.num_timesteps(); ++t) {
		for (std::size_t n = 0; n < ds.num_locations(); ++n) {
			for (auto c : channels) {
				values.push_back(ds.value(t, n, c));
				mask.push_back(ds.observed(t, n, c));
			}
		}
	}
	return PanelDataset::from_values(std::move(meta), std::move(values), &mask);
}

} // namespace detail

/// Resolves and loads the dataset of a benchmark, applying the registry's
/// channel selection and default holidays / sentinel.
inline PanelDataset load_benchmark_data(const BenchmarkSpec &spec, const std::filesystem::path &data_root) {
	const std::filesystem::path dir =
	    std::filesystem::path(spec.dataset_dir).is_absolute() ? std::filesystem::path(spec.dataset_dir)
	                                                          : data_root / spec.dataset_dir;
	if (!std::filesystem::exists(dir / "meta.json") || !std::filesystem::exists(dir / "values.f32")) {
		throw Error(ErrorKind::dataset_missing, "dataset missing for benchmark '" + spec.id + "': expected " +
		                                            (dir / "meta.json").string() +
		                                            " and values.f32; convert the upstream data into that layout first");
	}
	PanelDataset ds = load_dataset(dir);
	if (ds.meta().granularity_s != spec.granularity_s) {
		throw Error(ErrorKind::shape_mismatch, "benchmark '" + spec.id + "' expects granularity " +
		                                           std::to_string(spec.granularity_s) + " s, dataset has " +
		                                           std::to_string(ds.meta().granularity_s) + " s");
	}
	if (spec.expected_timesteps && ds.num_timesteps() != *spec.expected_timesteps) {
		throw Error(ErrorKind::shape_mismatch, "benchmark '" + spec.id + "' expects T=" +
		                                           std::to_string(*spec.expected_timesteps) + ", dataset has T=" +
		                                           std::to_string(ds.num_timesteps()));
	}
	if (spec.expected_locations && ds.num_locations() != *spec.expected_locations) {
		throw Error(ErrorKind::shape_mismatch, "benchmark '" + spec.id + "' expects N=" +
		                                           std::to_string(*spec.expected_locations) + ", dataset has N=" +
		                                           std::to_string(ds.num_locations()));
	}
	DatasetMeta meta = ds.meta();
	bool rebuild = false;
	if (meta.holidays.empty() && !spec.holidays.empty()) {
		meta.holidays = spec.holidays;
		rebuild = true;
	}
	if (!meta.missing_sentinel && spec.missing_sentinel) {
		meta.missing_sentinel = spec.missing_sentinel;
		rebuild = true;
	}
	if (rebuild) {
		std::vector<double> values = ds.values();
		std::vector<std::uint8_t> mask = ds.mask();
		ds = PanelDataset::from_values(std::move(meta), std::move(values), &mask);
	}
	return detail::select_channels(ds, spec.channels);
}

/// Runs the requested methods on an already-loaded panel.
inline BenchmarkResult run_benchmark_on(const BenchmarkSpec &spec, const PanelDataset &panel,
                                        const std::vector<Method> &methods, std::size_t jobs = 1) {
	validate_horizons(spec.horizons);
	BenchmarkResult result;
	result.spec = spec;
	result.num_timesteps = panel.num_timesteps();
	result.num_locations = panel.num_locations();
	result.num_channels = panel.num_channels();
	const SplitBounds b = split_bounds(panel.meta(), spec.split);
	result.bounds = b;

	const SeasonalProfile profile = fit_profile(slice_time(panel, 0, b.val_end));
	const ForecastGrid grid = make_grid(b.val_end, b.test_end, spec.lag_h, spec.horizons, spec.lag_window);
	if (grid.origins.empty()) {
		throw Error(ErrorKind::invalid_argument, "benchmark '" + spec.id + "': test range too short for h=" +
		                                             std::to_string(spec.lag_h) + " and the requested horizons");
	}
	const ForecastSet truth = truth_on_grid(panel, grid);
	const nlohmann::json spec_json = spec_to_json(spec);

	for (Method m : methods) {
		MethodResult mr;
		mr.method = m;
		nlohmann::json cfg{{"benchmark", spec_json}, {"method", to_string(m)}};
		if (m == Method::ha) {
			mr.report = evaluate_forecasts(truth, forecast_ha(panel.meta(), profile, grid), spec.mape_floor,
			                               spec.aggregate_mode, to_string(m), cfg);
		} else {
			const std::size_t fit_end = spec.lr_fit_on_val ? b.val_end : b.train_end;
			const PanelDataset resid = residualize(slice_time(panel, 0, fit_end), profile, spec.scaling());
			const ResidualRegressionModel model = fit_halr(resid, spec.regression(), jobs);
			cfg["model"] = model_to_json(model);
			mr.report = evaluate_forecasts(truth, forecast_halr(panel, profile, model, grid, spec.scaling()),
			                               spec.mape_floor, spec.aggregate_mode, to_string(m), cfg);
		}
		if (auto it = spec.paper_targets.find(m); it != spec.paper_targets.end()) {
			mr.checks = compare_targets(mr.report, it->second, spec.tolerance.at(m));
		}
		result.methods.push_back(std::move(mr));
	}
	return result;
}

inline BenchmarkResult run_benchmark(const BenchmarkSpec &spec, const std::vector<Method> &methods,
                                     const std::filesystem::path &data_root, std::size_t jobs = 1) {
	return run_benchmark_on(spec, load_benchmark_data(spec, data_root), methods, jobs);
}

// ---------------------------------------------------------------------------
// Result emission

enum class OutputFormat { text, csv, json };

inline OutputFormat parse_output_format(const std::string &s) {
	if (s == "text" || s == "txt") return OutputFormat::text;
	if (s == "csv") return OutputFormat::csv;
	if (s == "json") return OutputFormat::json;
	throw Error(ErrorKind::invalid_argument, "unknown format '" + s + "' (text | csv | json)");
}

inline const char *extension(OutputFormat f) {
	switch (f) {
	case OutputFormat::text: return "txt";
	case OutputFormat::csv: return "csv";
	case OutputFormat::json: return "json";
	}
	return "";
}

inline std::string format_results_csv(const MethodResult &mr) {
	std::ostringstream os;
	os << "method,horizon,mae,mape_pct,rmse,n_evaluated,n_masked\n";
	auto row = [&](const std::string &h, const Metrics &m) {
		char buf[256];
		std::snprintf(buf, sizeof(buf), "%s,%s,%.17g,%s,%.17g,%zu,%zu\n", to_string(mr.method), h.c_str(), m.mae,
		              m.mape_pct ? nlohmann::json(*m.mape_pct).dump().c_str() : "", m.rmse, m.n_evaluated, m.n_masked);
		os << buf;
	};
	for (const auto &[k, m] : mr.report.per_horizon) {
		row(std::to_string(k), m);
	}
	row("avg", mr.report.averaged);
	return os.str();
}

inline nlohmann::json checks_to_json(const std::vector<TargetCheck> &checks) {
	nlohmann::json arr = nlohmann::json::array();
	for (const auto &c : checks) {
		arr.push_back({{"metric", c.metric},
		               {"horizon", c.horizon ? nlohmann::json(*c.horizon) : nlohmann::json("avg")},
		               {"target", c.target},
		               {"achieved", c.achieved ? nlohmann::json(*c.achieved) : nlohmann::json(nullptr)},
		               {"rel_delta", c.rel_delta},
		               {"tolerance", c.tolerance},
		               {"status", to_string(c.status)}});
	}
	return arr;
}

inline nlohmann::json result_to_json(const BenchmarkResult &r, const MethodResult &mr) {
	nlohmann::json j = report_to_json(mr.report);
	j["benchmark"] = r.spec.id;
	j["shape"] = {r.num_timesteps, r.num_locations, r.num_channels};
	j["split_bounds"] = {r.bounds.train_end, r.bounds.val_end, r.bounds.test_end};
	j["paper_comparison"] = checks_to_json(mr.checks);
	return j;
}

/// Table in the layout of published results: metric columns whose cells list
/// the horizons separated by slashes, one row per method, then the published row.
inline std::string format_results_table(const BenchmarkResult &r) {
	const auto &spec = r.spec;
	std::vector<std::string> metrics;
	for (const char *m : {"MAE", "MAPE", "RMSE"}) {
		bool reported = spec.paper_targets.empty();
		for (const auto &[_, t] : spec.paper_targets) reported = reported || t.contains(m);
		if (reported) metrics.emplace_back(m);
	}
	std::string horizons;
	if (spec.seq2seq) {
		horizons = "avg " + std::to_string(spec.horizons.size()) + " steps";
	} else {
		for (std::size_t i = 0; i < spec.horizons.size(); ++i) {
			horizons += (i ? "/ " : "") + spec.horizon_label(spec.horizons[i]);
		}
	}
	std::ostringstream os;
	os << spec.title << " [" << spec.id << "]  T=" << r.num_timesteps << " N=" << r.num_locations
	   << " C=" << r.num_channels << "  split " << to_string(spec.split) << "\n";
	char buf[512];
	std::snprintf(buf, sizeof(buf), "%-18s", "Model");
	os << buf;
	for (const auto &m : metrics) {
		std::snprintf(buf, sizeof(buf), " | %-28s", (m + " " + horizons).c_str());
		os << buf;
	}
	os << "\n";
	auto cell_for = [&](const Metrics &avg, const std::map<int, Metrics> &per, const std::string &metric, bool single) {
		std::string cell;
		if (single || spec.seq2seq) {
			const auto v = metric_value(avg, metric);
			return v ? format_number(*v, 3) : std::string("-");
		}
		for (const auto &[k, m] : per) {
			const auto v = metric_value(m, metric);
			cell += (cell.empty() ? "" : "/ ") + (v ? format_number(*v, 3) : std::string("-"));
		}
		return cell;
	};
	for (const auto &mr : r.methods) {
		std::snprintf(buf, sizeof(buf), "%-18s", to_string(mr.method));
		os << buf;
		for (const auto &m : metrics) {
			std::snprintf(buf, sizeof(buf), " | %-28s",
			              cell_for(mr.report.averaged, mr.report.per_horizon, m, mr.method == Method::ha).c_str());
			os << buf;
		}
		os << "\n";
	}
	for (const auto &mr : r.methods) {
		auto it = spec.paper_targets.find(mr.method);
		if (it == spec.paper_targets.end()) continue;
		std::snprintf(buf, sizeof(buf), "%-18s", (std::string(to_string(mr.method)) + " (published)").c_str());
		os << buf;
		for (const auto &m : metrics) {
			std::string cell = "-";
			if (auto t = it->second.find(m); t != it->second.end()) {
				cell.clear();
				for (double v : t->second) cell += (cell.empty() ? "" : "/ ") + format_number(v, 3);
			}
			std::snprintf(buf, sizeof(buf), " | %-28s", cell.c_str());
			os << buf;
		}
		os << "\n";
	}
	for (const auto &mr : r.methods) {
		for (const auto &c : mr.checks) {
			std::snprintf(buf, sizeof(buf), "  %-6s %-5s %-9s target %9.3f  got %9s  delta %+7.2f%%  (tol %.0f%%)\n",
			              to_string(mr.method), c.metric.c_str(),
			              c.horizon ? spec.horizon_label(*c.horizon).c_str() : "avg", c.target,
			              c.achieved ? format_number(*c.achieved, 3).c_str() : "-", 100 * c.rel_delta,
			              100 * c.tolerance);
			os << to_string(c.status) << buf;
		}
	}
	return os.str();
}

inline std::string format_method_text(const BenchmarkResult &r, const MethodResult &mr) {
	return format_results_table(r) + "\n" + to_text(mr.report);
}

/// Writes results/<benchmark-id>/<method>.<ext> for every method and format.
inline std::vector<std::filesystem::path> emit_results(const BenchmarkResult &r,
                                                       const std::vector<OutputFormat> &formats,
                                                       const std::filesystem::path &out_root) {
	const auto dir = out_root / r.spec.id;
	detail::ensure_directory(dir);
	std::vector<std::filesystem::path> written;
	for (const auto &mr : r.methods) {
		for (OutputFormat f : formats) {
			const auto path = dir / (std::string(file_stem(mr.method)) + "." + extension(f));
			std::string text;
			switch (f) {
			case OutputFormat::text: text = format_method_text(r, mr); break;
			case OutputFormat::csv: text = format_results_csv(mr); break;
			case OutputFormat::json: text = result_to_json(r, mr).dump(2) + "\n"; break;
			}
			detail::write_text_file(path, text);
			written.push_back(path);
		}
	}
	return written;
}

} // namespace mobench
