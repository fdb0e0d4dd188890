#pragma once

// Masked forecast-error metrics (MAE, RMSE, MAPE in percent).

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mobench/error.hpp"
#include "mobench/forecast.hpp"
#include "mobench/tensor.hpp"

namespace mobench {

enum class AggregateMode { pool_cells, mean_of_metrics };

inline const char *to_string(AggregateMode m) { return m == AggregateMode::pool_cells ? "pool_cells" : "mean_of_metrics"; }

inline AggregateMode parse_aggregate_mode(const std::string &s) {
	if (s == "pool_cells") return AggregateMode::pool_cells;
	if (s == "mean_of_metrics") return AggregateMode::mean_of_metrics;
	throw Error(ErrorKind::invalid_argument, "unknown aggregate mode '" + s + "' (pool_cells | mean_of_metrics)");
}

/// Sufficient statistics of an error sample.
struct ErrorStats {
	double sum_abs = 0.0;
	double sum_sq = 0.0;
	double sum_ape = 0.0;
	std::size_t n_evaluated = 0;
	std::size_t n_mape = 0; // cells with |y| > mape_floor
	std::size_t n_masked = 0;

	void add(double y, double yhat, double mape_floor) {
		const double e = y - yhat;
		sum_abs += std::abs(e);
		sum_sq += e * e;
		++n_evaluated;
		if (std::abs(y) > mape_floor) {
			sum_ape += std::abs(e) / std::abs(y);
			++n_mape;
		}
	}

	ErrorStats &operator+=(const ErrorStats &o) {
		sum_abs += o.sum_abs;
		sum_sq += o.sum_sq;
		sum_ape += o.sum_ape;
		n_evaluated += o.n_evaluated;
		n_mape += o.n_mape;
		n_masked += o.n_masked;
		return *this;
	}
};

struct Metrics {
	double mae = 0.0;
	double rmse = 0.0;
	std::optional<double> mape_pct; // empty when no target exceeds the MAPE floor
	std::size_t n_evaluated = 0;
	std::size_t n_masked = 0;

	bool operator==(const Metrics &) const = default;
};

inline Metrics metrics_from(const ErrorStats &s) {
	if (s.n_evaluated == 0) {
		throw Error(ErrorKind::no_evaluable_cells, "evaluate: no cell is observed in both truth and prediction");
	}
	Metrics m;
	const auto n = static_cast<double>(s.n_evaluated);
	m.mae = s.sum_abs / n;
	m.rmse = std::sqrt(s.sum_sq / n);
	if (s.n_mape > 0) {
		m.mape_pct = 100.0 * s.sum_ape / static_cast<double>(s.n_mape);
	}
	m.n_evaluated = s.n_evaluated;
	m.n_masked = s.n_masked;
	return m;
}

inline ErrorStats error_stats(const MaskedTensor &y_true, const MaskedTensor &y_pred, double mape_floor = 0.0) {
	if (!y_true.same_shape(y_pred)) {
		throw Error(ErrorKind::shape_mismatch, "evaluate: truth and prediction shapes differ");
	}
	if (!(mape_floor >= 0.0)) {
		throw Error(ErrorKind::invalid_argument, "evaluate: mape_floor must be >= 0");
	}
	ErrorStats s;
	for (std::size_t i = 0; i < y_true.size(); ++i) {
		if (y_true.mask[i] && y_pred.mask[i]) {
			s.add(y_true.values[i], y_pred.values[i], mape_floor);
		} else {
			++s.n_masked;
		}
	}
	return s;
}

/// Metrics over cells observed in both tensors.
inline Metrics evaluate(const MaskedTensor &y_true, const MaskedTensor &y_pred, double mape_floor = 0.0) {
	return metrics_from(error_stats(y_true, y_pred, mape_floor));
}

/// Reduces per-horizon error samples to one set of metrics: `pool_cells`
/// concatenates all (horizon, cell) errors, `mean_of_metrics` averages the
/// per-horizon metric values.
inline Metrics aggregate_horizons(const std::vector<ErrorStats> &per_horizon, AggregateMode mode) {
	if (per_horizon.empty()) {
		throw Error(ErrorKind::no_evaluable_cells, "aggregate_horizons: no horizons");
	}
	if (mode == AggregateMode::pool_cells) {
		ErrorStats total;
		for (const auto &s : per_horizon) {
			total += s;
		}
		return metrics_from(total);
	}
	Metrics out;
	double mape_sum = 0.0;
	std::size_t mape_k = 0;
	for (const auto &s : per_horizon) {
		const Metrics m = metrics_from(s);
		out.mae += m.mae;
		out.rmse += m.rmse;
		if (m.mape_pct) {
			mape_sum += *m.mape_pct;
			++mape_k;
		}
		out.n_evaluated += m.n_evaluated;
		out.n_masked += m.n_masked;
	}
	const auto k = static_cast<double>(per_horizon.size());
	out.mae /= k;
	out.rmse /= k;
	if (mape_k == per_horizon.size()) {
		out.mape_pct = mape_sum / k;
	}
	return out;
}

inline std::uint64_t fnv1a64(std::string_view text) {
	std::uint64_t h = 0xcbf29ce484222325ULL;
	for (unsigned char ch : text) {
		h ^= ch;
		h *= 0x100000001b3ULL;
	}
	return h;
}

inline std::string fingerprint(const nlohmann::json &config) {
	char buf[17];
	std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(config.dump())));
	return buf;
}

struct EvalReport {
	std::string method;
	std::map<int, Metrics> per_horizon; // horizon in steps
	Metrics averaged;
	AggregateMode aggregate = AggregateMode::pool_cells;
	nlohmann::json config = nlohmann::json::object();
	std::string config_fingerprint;
};

/// Evaluates forecasts against truths on the same grid.
inline EvalReport evaluate_forecasts(const ForecastSet &truth, const ForecastSet &pred, double mape_floor,
                                     AggregateMode mode, std::string method = {},
                                     nlohmann::json config = nlohmann::json::object()) {
	if (truth.grid.horizons != pred.grid.horizons || truth.grid.origins != pred.grid.origins ||
	    truth.per_horizon.size() != pred.per_horizon.size()) {
		throw Error(ErrorKind::shape_mismatch, "evaluate: truth and prediction grids differ");
	}
	EvalReport r;
	r.method = std::move(method);
	r.aggregate = mode;
	std::vector<ErrorStats> stats;
	for (std::size_t hi = 0; hi < truth.per_horizon.size(); ++hi) {
		stats.push_back(error_stats(truth.per_horizon[hi], pred.per_horizon[hi], mape_floor));
		r.per_horizon[truth.grid.horizons[hi]] = metrics_from(stats.back());
	}
	r.averaged = aggregate_horizons(stats, mode);
	config["mape_floor"] = mape_floor;
	config["aggregate"] = to_string(mode);
	r.config = std::move(config);
	r.config_fingerprint = fingerprint(r.config);
	return r;
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::json metrics_to_json(const Metrics &m) {
	return {{"mae", m.mae},
	        {"rmse", m.rmse},
	        {"mape_pct", m.mape_pct ? nlohmann::json(*m.mape_pct) : nlohmann::json(nullptr)},
	        {"n_evaluated", m.n_evaluated},
	        {"n_masked", m.n_masked}};
}

inline Metrics metrics_from_json(const nlohmann::json &j) {
	Metrics m;
	j.at("mae").get_to(m.mae);
	j.at("rmse").get_to(m.rmse);
	if (!j.at("mape_pct").is_null()) {
		m.mape_pct = j.at("mape_pct").get<double>();
	}
	j.at("n_evaluated").get_to(m.n_evaluated);
	j.at("n_masked").get_to(m.n_masked);
	return m;
}

inline nlohmann::json report_to_json(const EvalReport &r) {
	nlohmann::json per = nlohmann::json::array();
	for (const auto &[k, m] : r.per_horizon) {
		auto j = metrics_to_json(m);
		j["horizon"] = k;
		per.push_back(std::move(j));
	}
	return {{"method", r.method},
	        {"per_horizon", per},
	        {"averaged", metrics_to_json(r.averaged)},
	        {"aggregate", to_string(r.aggregate)},
	        {"config", r.config},
	        {"config_fingerprint", r.config_fingerprint}};
}

inline std::string format_number(double v, int precision = 4) {
	char buf[64];
	std::snprintf(buf, sizeof(buf), "%.*f", precision, v);
	return buf;
}

/// Aligned plain-text table: one row per horizon plus the averaged row.
inline std::string to_text(const EvalReport &r) {
	std::ostringstream os;
	char line[160];
	std::snprintf(line, sizeof(line), "%-10s %12s %12s %12s %12s %10s\n", "horizon", "MAE", "MAPE(%)", "RMSE",
	              "evaluated", "masked");
	os << "method: " << (r.method.empty() ? "-" : r.method) << "  (config " << r.config_fingerprint << ")\n" << line;
	auto row = [&](const std::string &label, const Metrics &m) {
		const std::string mape = m.mape_pct ? format_number(*m.mape_pct) : "-";
		std::snprintf(line, sizeof(line), "%-10s %12s %12s %12s %12zu %10zu\n", label.c_str(),
		              format_number(m.mae).c_str(), mape.c_str(), format_number(m.rmse).c_str(), m.n_evaluated,
		              m.n_masked);
		os << line;
	};
	for (const auto &[k, m] : r.per_horizon) {
		row(std::to_string(k), m);
	}
	row(std::string("avg:") + (r.aggregate == AggregateMode::pool_cells ? "pool" : "mean"), r.averaged);
	return os.str();
}

} // namespace mobench
