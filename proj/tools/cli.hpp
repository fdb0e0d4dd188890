#pragma once

// Command-line front end. Every subcommand is a thin adapter over the library.
//
//   mobench inspect <dir>
//   mobench fit-ha <dir> --out profile/ [--split fractions:0.7,0.1,0.2]
//   mobench forecast <dir> [--profile p/] --h 12 --horizons 3,6,9 --out preds/
//   mobench eval --true <dir> --pred preds/ [--mape-floor 0]
//   mobench bench list
//   mobench bench run (--id metr-la | --all) [--config c.json] [--out results/]

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mobench/mobench.hpp"

namespace mobench::cli {

namespace detail {

inline std::vector<int> parse_int_list(const std::string &text, const char *what) {
	std::vector<int> out;
	std::stringstream ss(text);
	std::string item;
	while (std::getline(ss, item, ',')) {
		try {
			std::size_t used = 0;
			out.push_back(std::stoi(item, &used));
			if (used != item.size()) throw std::invalid_argument(item);
		} catch (const std::exception &) {
			throw Error(ErrorKind::invalid_argument, std::string("bad ") + what + " '" + item + "'");
		}
	}
	return out;
}

inline std::vector<int> minutes_to_steps(const std::vector<int> &minutes, std::int64_t granularity_s) {
	std::vector<int> steps;
	for (int m : minutes) {
		if ((m * 60) % granularity_s != 0) {
			throw Error(ErrorKind::invalid_argument, std::to_string(m) + " min is not a whole number of " +
			                                             std::to_string(granularity_s) + " s steps");
		}
		steps.push_back(static_cast<int>(m * 60 / granularity_s));
	}
	return steps;
}

inline std::filesystem::path data_root(const std::string &flag) {
	if (!flag.empty()) return flag;
	if (const char *env = std::getenv("MOBENCH_DATA_DIR"); env && *env) return env;
	return "data";
}

inline std::string percent(std::size_t part, std::size_t whole) {
	return whole ? format_number(100.0 * static_cast<double>(part) / static_cast<double>(whole), 2) + "%" : "-";
}

} // namespace detail

/// Runs the CLI; returns the process exit code.
inline int run(int argc, const char *const *argv, std::ostream &out, std::ostream &err) {
	CLI::App app{"Historical-average and HA+LR baselines for spatio-temporal transport forecasting", "mobench"};
	app.require_subcommand(1);

	// inspect
	auto *inspect = app.add_subcommand("inspect", "Print dataset meta and mask statistics");
	std::string inspect_dir;
	inspect->add_option("dir", inspect_dir, "Dataset directory")->required();

	// fit-ha
	auto *fit_ha = app.add_subcommand("fit-ha", "Fit the weekly profile and write it out");
	std::string fit_dir, fit_out, fit_split;
	fit_ha->add_option("dir", fit_dir, "Dataset directory")->required();
	fit_ha->add_option("--out", fit_out, "Profile output directory")->required();
	fit_ha->add_option("--split", fit_split,
	                   "Fit on train+val of this split (e.g. days:34,5,5); default: whole dataset");

	// forecast
	auto *forecast = app.add_subcommand("forecast", "Rolling HA or HA+LR forecasts over the test part");
	std::string fc_dir, fc_profile, fc_out, fc_horizons, fc_minutes, fc_strategy = "direct", fc_scope = "pooled",
	                                                                  fc_split = "fractions:0.7,0.1,0.2",
	                                                                  fc_method = "HA+LR", fc_window = "within_range",
	                                                                  fc_model_out;
	int fc_h = 12;
	double fc_ridge = 1e-8, fc_s_floor = 1e-3;
	bool fc_no_intercept = false, fc_normalized = false, fc_fill = false, fc_train_only = false;
	std::size_t fc_jobs = default_jobs();
	forecast->set_help_flag("--help", "Print this help message and exit"); // frees -h for the lag order
	forecast->add_option("dir", fc_dir, "Dataset directory")->required();
	forecast->add_option("--profile", fc_profile, "Profile directory from fit-ha (default: fit on train+val)");
	forecast->add_option("--h", fc_h, "Lag order")->capture_default_str();
	auto *hz = forecast->add_option("--horizons", fc_horizons, "Horizons in steps, e.g. 3,6,9");
	auto *mz = forecast->add_option("--minutes", fc_minutes, "Horizons in minutes, e.g. 15,30,45");
	hz->excludes(mz);
	forecast->add_option("--strategy", fc_strategy, "direct | recursive")->capture_default_str();
	forecast->add_option("--scope", fc_scope, "pooled | per_location")->capture_default_str();
	forecast->add_option("--ridge", fc_ridge, "Ridge penalty")->capture_default_str();
	forecast->add_flag("--no-intercept", fc_no_intercept, "Fit without intercept");
	forecast->add_flag("--normalized", fc_normalized, "Divide residuals by the profile std");
	forecast->add_option("--s-floor", fc_s_floor, "Lower clamp of the profile std")->capture_default_str();
	forecast->add_flag("--fill-missing-lags", fc_fill, "Use residual 0 for unobserved lags");
	forecast->add_flag("--train-only", fc_train_only, "Fit the regression on train only (default train+val)");
	forecast->add_option("--split", fc_split, "Split spec")->capture_default_str();
	forecast->add_option("--method", fc_method, "HA | HA+LR")->capture_default_str();
	forecast->add_option("--lag-window", fc_window, "within_range | with_history")->capture_default_str();
	forecast->add_option("--model-out", fc_model_out, "Write the fitted regression as JSON");
	forecast->add_option("--jobs", fc_jobs, "Parallel least-squares fits");
	forecast->add_option("--out", fc_out, "Forecast output directory")->required();

	// eval
	auto *eval = app.add_subcommand("eval", "Evaluate a forecast directory against a dataset");
	std::string ev_true, ev_pred, ev_aggregate = "pool_cells", ev_format = "text";
	double ev_floor = 0.0;
	eval->add_option("--true", ev_true, "Dataset directory")->required();
	eval->add_option("--pred", ev_pred, "Forecast directory")->required();
	eval->add_option("--mape-floor", ev_floor, "Targets with |y| <= floor are left out of MAPE")->capture_default_str();
	eval->add_option("--aggregate", ev_aggregate, "pool_cells | mean_of_metrics")->capture_default_str();
	eval->add_option("--format", ev_format, "text | json")->capture_default_str();

	// bench
	auto *bench = app.add_subcommand("bench", "Benchmark registry and runner");
	bench->require_subcommand(1);
	auto *bench_list = bench->add_subcommand("list", "List the registered benchmarks");
	auto *bench_run = bench->add_subcommand("run", "Run benchmarks");
	std::string br_id, br_config, br_out = "results", br_data, br_methods = "HA,HA+LR", br_formats = "text,csv,json";
	bool br_all = false, br_strict = false;
	std::size_t br_jobs = default_jobs();
	auto *id_opt = bench_run->add_option("--id", br_id, "Benchmark id");
	auto *all_opt = bench_run->add_flag("--all", br_all, "Run every registered benchmark");
	id_opt->excludes(all_opt);
	bench_run->add_option("--config", br_config, "JSON overrides of benchmark fields");
	bench_run->add_option("--out", br_out, "Results root directory")->capture_default_str();
	bench_run->add_option("--data-dir", br_data, "Dataset root (default $MOBENCH_DATA_DIR or ./data)");
	bench_run->add_option("--methods", br_methods, "Comma-separated methods")->capture_default_str();
	bench_run->add_option("--format", br_formats, "Comma-separated output formats")->capture_default_str();
	bench_run->add_option("--jobs", br_jobs, "Parallel workers");
	bench_run->add_flag("--strict", br_strict, "Exit nonzero unless every published target passes");

	try {
		app.parse(argc, argv);
	} catch (const CLI::ParseError &e) {
		return app.exit(e, out, err);
	}

	try {
		if (inspect->parsed()) {
			const PanelDataset ds = load_dataset(inspect_dir);
			const auto &m = ds.meta();
			out << "name: " << m.name << "\n"
			    << "T=" << m.num_timesteps << ", N=" << m.num_locations << ", C=" << m.num_channels << "\n"
			    << "granularity_s: " << m.granularity_s << " (" << m.slots_per_day() << " slots/day)\n"
			    << "start: " << dates::format_rfc3339(m.start_time) << " (tz offset " << m.timezone_offset_s
			    << " s)\n"
			    << "end: " << dates::format_rfc3339(m.timestamp_of(m.num_timesteps - 1)) << "\n"
			    << "channels:";
			for (const auto &c : m.channel_names) out << " " << c;
			out << "\nmissing_sentinel: " << (m.missing_sentinel ? format_number(*m.missing_sentinel, 6) : "none")
			    << "\nholidays: " << m.holidays.size() << "\n";
			if (!m.day_dates.empty()) out << "day_dates: " << m.day_dates.size() << " listed days\n";
			const std::size_t cells = m.num_cells(), observed = ds.observed_count();
			out << "observed: " << observed << " / " << cells << " (" << detail::percent(observed, cells) << ")\n"
			    << "masked: " << cells - observed << " (" << detail::percent(cells - observed, cells) << ")\n";
			return 0;
		}

		if (fit_ha->parsed()) {
			const PanelDataset ds = load_dataset(fit_dir);
			std::size_t end = ds.num_timesteps();
			if (!fit_split.empty()) {
				end = split_bounds(ds.meta(), parse_split(fit_split)).val_end;
			}
			const SeasonalProfile p = fit_profile(slice_time(ds, 0, end));
			save_profile(p, fit_out);
			out << "profile fitted on timesteps [0, " << end << "): " << p.slots_per_week << " slots x "
			    << p.locations << " x " << p.channels << ", " << p.empty_cells() << " empty cells -> " << fit_out
			    << "\n";
			return 0;
		}

		if (forecast->parsed()) {
			const PanelDataset ds = load_dataset(fc_dir);
			const SplitBounds b = split_bounds(ds.meta(), parse_split(fc_split));
			std::vector<int> horizons{1};
			if (!fc_horizons.empty()) horizons = detail::parse_int_list(fc_horizons, "horizon");
			if (!fc_minutes.empty())
				horizons = detail::minutes_to_steps(detail::parse_int_list(fc_minutes, "minutes"), ds.meta().granularity_s);
			const SeasonalProfile profile =
			    fc_profile.empty() ? fit_profile(slice_time(ds, 0, b.val_end)) : load_profile(fc_profile);
			const ForecastGrid grid = make_grid(b.val_end, b.test_end, fc_h, horizons, parse_lag_window(fc_window));
			const ResidualScaling scaling{fc_normalized, fc_s_floor};
			const Method method = parse_method(fc_method);
			ForecastSet preds;
			if (method == Method::ha) {
				preds = forecast_ha(ds.meta(), profile, grid);
			} else {
				RegressionConfig cfg;
				cfg.h = fc_h;
				cfg.horizons = horizons;
				cfg.strategy = parse_strategy(fc_strategy);
				cfg.scope = parse_scope(fc_scope);
				cfg.ridge = fc_ridge;
				cfg.include_intercept = !fc_no_intercept;
				cfg.fill_missing_lags = fc_fill;
				const PanelDataset resid =
				    residualize(slice_time(ds, 0, fc_train_only ? b.train_end : b.val_end), profile, scaling);
				const ResidualRegressionModel model = fit_halr(resid, cfg, fc_jobs);
				if (!fc_model_out.empty()) save_model(model, fc_model_out);
				preds = forecast_halr(ds, profile, model, grid, scaling);
			}
			save_forecasts(preds, ds.meta(), to_string(method), fc_out);
			out << to_string(method) << ": " << grid.origins.size() << " origins x " << grid.horizons.size()
			    << " horizons -> " << fc_out << "\n";
			return 0;
		}

		if (eval->parsed()) {
			const PanelDataset ds = load_dataset(ev_true);
			const ForecastSet preds = load_forecasts(ev_pred);
			const ForecastSet truth = truth_on_grid(ds, preds.grid);
			const EvalReport report = evaluate_forecasts(truth, preds, ev_floor, parse_aggregate_mode(ev_aggregate),
			                                             "", {{"pred", ev_pred}});
			const OutputFormat f = parse_output_format(ev_format);
			if (f == OutputFormat::json) {
				out << report_to_json(report).dump(2) << "\n";
			} else {
				out << to_text(report);
			}
			return 0;
		}

		if (bench_list->parsed()) {
			for (const auto &b : registry()) {
				out << b.id << "  " << b.title << "  [" << b.granularity_s / 60 << " min, split " << to_string(b.split)
				    << ", horizons";
				for (int k : b.horizons) out << " " << k;
				out << (b.seq2seq ? ", seq2seq" : "") << "]\n";
			}
			return 0;
		}

		if (bench_run->parsed()) {
			if (!br_all && br_id.empty()) {
				err << "bench run: give --id <benchmark> or --all\n";
				return 2;
			}
			std::vector<BenchmarkSpec> specs;
			if (br_all) {
				specs = registry();
			} else {
				specs.push_back(find_benchmark(br_id));
			}
			if (!br_config.empty()) {
				const nlohmann::json cfg = mobench::detail::read_json_file(br_config);
				for (auto &s : specs) apply_config(s, cfg);
			}
			std::vector<Method> methods;
			{
				std::stringstream ss(br_methods);
				std::string item;
				while (std::getline(ss, item, ',')) methods.push_back(parse_method(item));
			}
			std::vector<OutputFormat> formats;
			{
				std::stringstream ss(br_formats);
				std::string item;
				while (std::getline(ss, item, ',')) formats.push_back(parse_output_format(item));
			}
			const auto root = detail::data_root(br_data);
			std::vector<std::optional<BenchmarkResult>> results(specs.size());
			std::vector<std::string> errors(specs.size());
			std::vector<bool> missing(specs.size(), false);
			const std::size_t outer = br_all ? br_jobs : 1;
			const std::size_t inner = br_all ? 1 : br_jobs;
			parallel_for(specs.size(), outer, [&](std::size_t i) {
				try {
					results[i] = run_benchmark(specs[i], methods, root, inner);
				} catch (const Error &e) {
					errors[i] = e.what();
					missing[i] = e.kind() == ErrorKind::dataset_missing;
				}
			});
			int code = 0;
			for (std::size_t i = 0; i < specs.size(); ++i) {
				if (!results[i]) {
					err << (missing[i] ? "SKIP " : "ERROR ") << specs[i].id << ": " << errors[i] << "\n";
					// A missing dataset only fails an explicitly requested benchmark.
					if (!missing[i] || !br_all) code = 1;
					continue;
				}
				out << format_results_table(*results[i]) << "\n";
				for (const auto &p : emit_results(*results[i], formats, br_out)) out << "wrote " << p.string() << "\n";
				if (br_strict) {
					for (const auto &mr : results[i]->methods) {
						if (!mr.all_pass()) code = code ? code : 3;
					}
				}
			}
			return code;
		}
	} catch (const Error &e) {
		err << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
		return 1;
	} catch (const std::exception &e) {
		err << "error: " << e.what() << "\n";
		return 1;
	}
	return 0;
}

} // namespace mobench::cli
