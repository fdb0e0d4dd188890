#include <cmath>
#include <random>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "fixtures.hpp"

using namespace mobench;

namespace {

PanelDataset series_panel(const std::vector<double> &v, const std::vector<std::uint8_t> *mask = nullptr) {
	return PanelDataset::from_values(fixtures::make_meta(v.size(), 1, 1), v, mask);
}

ResidualRegressionModel single_model(Strategy s, std::vector<int> horizons, double w, double b = 0.0) {
	ResidualRegressionModel m;
	m.config.h = 1;
	m.config.horizons = std::move(horizons);
	m.config.strategy = s;
	m.locations = 1;
	for (std::size_t i = 0; i < m.config.fitted_horizons().size(); ++i) {
		OlsFit f;
		f.coef = {w};
		f.intercept = b;
		m.fits.push_back({f});
	}
	return m;
}

} // namespace

TEST(LagMatrix, DirectEnumeration) {
	const PanelDataset r = series_panel({1, 2, 3, 4, 5});
	const LagDesign d1 = build_lag_matrix(r, 2, 1);
	EXPECT_EQ(d1.X.data, (std::vector<double>{2, 1, 3, 2, 4, 3}));
	EXPECT_EQ(d1.y, (std::vector<double>{3, 4, 5}));
	EXPECT_EQ(d1.rows.front(), (RowIndex{2, 0, 0}));
	const LagDesign d2 = build_lag_matrix(r, 2, 2);
	EXPECT_EQ(d2.X.data, (std::vector<double>{2, 1, 3, 2}));
	EXPECT_EQ(d2.y, (std::vector<double>{4, 5}));
}

TEST(LagMatrix, MaskedEntryDropsRows) {
	const std::vector<std::uint8_t> mask{1, 1, 0, 1, 1, 1, 1};
	const PanelDataset r = series_panel({1, 2, 3, 4, 5, 6, 7}, &mask);
	const LagDesign d = build_lag_matrix(r, 2, 1);
	// t=2 as target or lag removes targets at 2, 3, 4.
	EXPECT_EQ(d.y, (std::vector<double>{6, 7}));
	EXPECT_EQ(d.X.data, (std::vector<double>{5, 4, 6, 5}));
	const LagDesign f = build_lag_matrix(r, 2, 1, std::nullopt, true);
	EXPECT_EQ(f.y, (std::vector<double>{4, 5, 6, 7}));
	EXPECT_EQ(f.X.data, (std::vector<double>{0, 2, 4, 0, 5, 4, 6, 5}));
}

TEST(LagMatrix, StacksSeriesAndFiltersLocation) {
	auto m = fixtures::make_meta(4, 2, 1);
	const PanelDataset r = PanelDataset::from_values(m, {1, 10, 2, 20, 3, 30, 4, 40});
	const LagDesign d = build_lag_matrix(r, 2, 1);
	EXPECT_EQ(d.y, (std::vector<double>{3, 4, 30, 40}));
	const LagDesign d1 = build_lag_matrix(r, 2, 1, std::size_t{1});
	EXPECT_EQ(d1.y, (std::vector<double>{30, 40}));
	EXPECT_EQ(d1.rows[0], (RowIndex{2, 1, 0}));
}

TEST(LagMatrix, EmptyDesignErrors) {
	const PanelDataset r = series_panel({1, 2, 3});
	try {
		build_lag_matrix(r, 3, 1);
		FAIL();
	} catch (const Error &e) {
		EXPECT_EQ(e.kind(), ErrorKind::empty_design);
	}
	const std::vector<std::uint8_t> mask{1, 0, 1, 0, 1};
	EXPECT_THROW(build_lag_matrix(series_panel({1, 2, 3, 4, 5}, &mask), 2, 1), Error);
}

TEST(Predict, DirectAndRecursiveExamples) {
	const std::vector<double> lag{2.0};
	EXPECT_DOUBLE_EQ(single_model(Strategy::direct, {1}, 0.5).predict(lag)[0], 1.0);
	const auto rec = single_model(Strategy::recursive, {1, 2}, 0.5).predict(lag);
	EXPECT_DOUBLE_EQ(rec[0], 1.0);
	EXPECT_DOUBLE_EQ(rec[1], 0.5);
	EXPECT_EQ(single_model(Strategy::direct, {1, 3}, 0.0).predict(lag), (std::vector<double>{0.0, 0.0}));
	// Recursive with h=2 feeds predictions back most-recent-first.
	ResidualRegressionModel m;
	m.config.h = 2;
	m.config.horizons = {3};
	m.config.strategy = Strategy::recursive;
	m.locations = 1;
	OlsFit f;
	f.coef = {0.5, 0.25};
	f.intercept = 1.0;
	m.fits = {{f}};
	const std::vector<double> lags{4.0, 8.0};
	const double y1 = 1 + 0.5 * 4 + 0.25 * 8, y2 = 1 + 0.5 * y1 + 0.25 * 4, y3 = 1 + 0.5 * y2 + 0.25 * y1;
	EXPECT_DOUBLE_EQ(m.predict(lags)[0], y3);
}

TEST(FitHalr, RecoversAr1Coefficient) {
	std::mt19937_64 rng(21);
	std::normal_distribution<double> g(0, 0.01);
	std::vector<double> v(20000);
	double r = 0;
	for (auto &x : v) x = r = 0.8 * r + g(rng);
	RegressionConfig cfg;
	cfg.h = 1;
	const ResidualRegressionModel m = fit_halr(series_panel(v), cfg);
	EXPECT_NEAR(m.fits[0][0].coef[0], 0.8, 0.01);
	EXPECT_NEAR(m.fits[0][0].intercept, 0.0, 1e-3);
	EXPECT_NEAR(m.fits[0][0].rmse(), 0.01, 5e-4);
}

TEST(FitHalr, RecoversAr2WithinStandardErrors) {
	std::mt19937_64 rng(22);
	std::normal_distribution<double> g(0, 1.0);
	const std::size_t T = 5000;
	std::vector<double> v(T, 0.0);
	for (std::size_t t = 2; t < T; ++t) v[t] = 0.5 * v[t - 1] + 0.3 * v[t - 2] + g(rng);
	RegressionConfig cfg;
	cfg.h = 2;
	cfg.include_intercept = false;
	const ResidualRegressionModel m = fit_halr(series_panel(v), cfg);
	// Standard errors from sigma^2 (X'X)^-1, estimated independently.
	const LagDesign d = build_lag_matrix(series_panel(v), 2, 1);
	Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>> X(d.X.data.data(),
	                                                                               static_cast<Eigen::Index>(d.y.size()), 2);
	const Eigen::Matrix2d cov = (X.transpose() * X).inverse() * (m.fits[0][0].rss / static_cast<double>(d.y.size() - 2));
	EXPECT_NEAR(m.fits[0][0].coef[0], 0.5, 3 * std::sqrt(cov(0, 0)));
	EXPECT_NEAR(m.fits[0][0].coef[1], 0.3, 3 * std::sqrt(cov(1, 1)));
}

TEST(FitHalr, ZeroResidualsGiveZeroWeights) {
	RegressionConfig cfg;
	cfg.h = 3;
	cfg.horizons = {1, 2};
	const ResidualRegressionModel m = fit_halr(series_panel(std::vector<double>(100, 0.0)), cfg);
	for (const auto &per : m.fits)
		for (const auto &f : per) {
			for (double w : f.coef) EXPECT_EQ(w, 0.0);
			EXPECT_EQ(f.rmse(), 0.0);
		}
}

TEST(FitHalr, DirectMatchesPerHorizonOls) {
	std::mt19937_64 rng(23);
	std::normal_distribution<double> g;
	auto meta = fixtures::make_meta(300, 3, 2);
	std::vector<double> v(meta.num_cells());
	for (auto &x : v) x = g(rng);
	const PanelDataset r = PanelDataset::from_values(meta, v);
	RegressionConfig cfg;
	cfg.h = 4;
	cfg.horizons = {1, 3};
	cfg.ridge = 0.0;
	for (Scope scope : {Scope::pooled, Scope::per_location}) {
		cfg.scope = scope;
		const ResidualRegressionModel m = fit_halr(r, cfg, 2);
		for (std::size_t hi = 0; hi < cfg.horizons.size(); ++hi) {
			for (std::size_t g2 = 0; g2 < (scope == Scope::pooled ? 1u : 3u); ++g2) {
				const auto loc = scope == Scope::pooled ? std::nullopt : std::optional<std::size_t>(g2);
				const LagDesign d = build_lag_matrix(r, 4, cfg.horizons[hi], loc);
				const OlsFit ref = fit_ols(d.X, d.y, 0.0, true);
				const OlsFit &got = m.fit_for(hi, g2);
				EXPECT_EQ(got.rows, ref.rows);
				for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(got.coef[j], ref.coef[j], 1e-12);
			}
		}
	}
}

TEST(FitHalr, ErrorsCarryContext) {
	auto meta = fixtures::make_meta(10, 2, 1);
	std::vector<double> v(20, 1.0);
	std::vector<std::uint8_t> mask(20, 1);
	for (std::size_t t = 0; t < 10; t += 2) mask[t * 2 + 1] = 0; // location 1 never has 2 consecutive values
	RegressionConfig cfg;
	cfg.h = 2;
	cfg.scope = Scope::per_location;
	try {
		fit_halr(PanelDataset::from_values(meta, v, &mask), cfg);
		FAIL();
	} catch (const Error &e) {
		EXPECT_EQ(e.kind(), ErrorKind::empty_design);
		EXPECT_NE(std::string(e.what()).find("location 1"), std::string::npos) << e.what();
	}
	cfg.horizons = {2, 1};
	EXPECT_THROW(fit_halr(PanelDataset::from_values(meta, v), cfg), Error);
}

TEST(ForecastHalr, DirectAndRecursiveAgreeAtOneStep) {
	const PanelDataset ds = fixtures::ar1_panel(4, 3, 3600, 0.7, 1.0, 31);
	const SeasonalProfile p = fit_profile(slice_time(ds, 0, 3 * 168));
	const PanelDataset resid = residualize(slice_time(ds, 0, 3 * 168), p);
	const ForecastGrid grid = make_grid(3 * 168, 4 * 168, 6, {1});
	RegressionConfig cfg;
	cfg.h = 6;
	const ForecastSet direct = forecast_halr(ds, p, fit_halr(resid, cfg), grid);
	cfg.strategy = Strategy::recursive;
	const ForecastSet recursive = forecast_halr(ds, p, fit_halr(resid, cfg), grid);
	EXPECT_EQ(direct.per_horizon[0].values, recursive.per_horizon[0].values);
}

TEST(ForecastHalr, ZeroResidualsEqualHaExactly) {
	const PanelDataset ds = fixtures::periodic_panel(5, 4, 1, 3600, 32);
	const SeasonalProfile p = fit_profile(slice_time(ds, 0, 4 * 168));
	RegressionConfig cfg;
	cfg.horizons = {1, 2, 3};
	for (Strategy s : {Strategy::direct, Strategy::recursive}) {
		cfg.strategy = s;
		const auto model = fit_halr(residualize(slice_time(ds, 0, 4 * 168), p), cfg);
		const ForecastGrid grid = make_grid(4 * 168, 5 * 168, cfg.h, cfg.horizons);
		const ForecastSet lr = forecast_halr(ds, p, model, grid);
		const ForecastSet ha = forecast_ha(ds.meta(), p, grid);
		const ForecastSet truth = truth_on_grid(ds, grid);
		for (std::size_t hi = 0; hi < 3; ++hi) {
			EXPECT_EQ(lr.per_horizon[hi].values, ha.per_horizon[hi].values);
			EXPECT_EQ(lr.per_horizon[hi].values, truth.per_horizon[hi].values);
		}
	}
}

TEST(ForecastHalr, MissingLagsMaskTheForecast) {
	const PanelDataset base = fixtures::periodic_panel(3, 2, 1, 3600, 33);
	std::vector<std::uint8_t> mask(base.values().size(), 1);
	mask[(2 * 168 + 20) * 2 + 1] = 0; // location 1 at t=356
	const PanelDataset ds = PanelDataset::from_values(base.meta(), base.values(), &mask);
	const SeasonalProfile p = fit_profile(slice_time(ds, 0, 2 * 168));
	RegressionConfig cfg;
	cfg.h = 3;
	const auto model = fit_halr(residualize(slice_time(ds, 0, 2 * 168), p), cfg);
	const ForecastGrid grid = make_grid(2 * 168, 3 * 168, 3, {1});
	const ForecastSet f = forecast_halr(ds, p, model, grid);
	for (std::size_t oi = 0; oi < grid.origins.size(); ++oi) {
		const std::size_t o = grid.origins[oi];
		const bool uses = o >= 356 && o <= 358;
		EXPECT_EQ(f.per_horizon[0].mask[oi * 2 + 1] != 0, !uses) << o;
		EXPECT_TRUE(f.per_horizon[0].mask[oi * 2]);
	}
	cfg.fill_missing_lags = true;
	const ForecastSet filled = forecast_halr(ds, p, fit_halr(residualize(slice_time(ds, 0, 2 * 168), p), cfg), grid);
	EXPECT_EQ(filled.per_horizon[0].valid_count(), 2 * grid.origins.size());
}

TEST(Grid, WithinRangeAndWithHistory) {
	const ForecastGrid g = make_grid(100, 130, 12, {3, 6});
	EXPECT_EQ(g.origins.front(), 111u);
	EXPECT_EQ(g.origins.back(), 123u);
	const ForecastGrid w = make_grid(100, 130, 12, {3, 6}, LagWindow::with_history);
	EXPECT_EQ(w.origins.front(), 97u);
	EXPECT_EQ(w.origins.back(), 123u);
	EXPECT_THROW(make_grid(0, 10, 0, {1}), Error);
	EXPECT_THROW(make_grid(0, 10, 1, {}), Error);
	EXPECT_THROW(make_grid(0, 10, 1, {2, 2}), Error);
	EXPECT_TRUE(make_grid(0, 10, 8, {3}).origins.empty());
}

TEST(Model, JsonRoundTrip) {
	const PanelDataset ds = fixtures::ar1_panel(2, 2, 3600, 0.5, 1.0, 34);
	RegressionConfig cfg;
	cfg.h = 3;
	cfg.horizons = {1, 4};
	cfg.scope = Scope::per_location;
	const auto p = fit_profile(ds);
	const auto m = fit_halr(residualize(ds, p), cfg);
	fixtures::TempDir tmp;
	save_model(m, tmp / "model.json");
	const auto back = load_model(tmp / "model.json");
	EXPECT_EQ(back.config, m.config);
	ASSERT_EQ(back.fits.size(), m.fits.size());
	for (std::size_t i = 0; i < m.fits.size(); ++i)
		for (std::size_t g = 0; g < m.fits[i].size(); ++g) {
			EXPECT_EQ(back.fits[i][g].coef, m.fits[i][g].coef);
			EXPECT_EQ(back.fits[i][g].intercept, m.fits[i][g].intercept);
		}
	auto j = model_to_json(m);
	j["models"][0]["fits"][0]["coef"].push_back(1.0);
	EXPECT_THROW(model_from_json(j), Error);
}
