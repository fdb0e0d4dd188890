#pragma once

// Synthetic panels and scratch directories shared by the test binaries.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "mobench/mobench.hpp"

namespace fixtures {

// 2024-01-01 00:00:00 UTC, a Monday.
inline constexpr std::int64_t monday = 1704067200;

inline mobench::DatasetMeta make_meta(std::size_t T, std::size_t N, std::size_t C, std::int64_t granularity_s = 3600,
                                      std::int64_t start = monday) {
	mobench::DatasetMeta m;
	m.name = "synthetic";
	m.start_time = start;
	m.granularity_s = granularity_s;
	m.num_timesteps = T;
	m.num_locations = N;
	m.num_channels = C;
	for (std::size_t c = 0; c < C; ++c) m.channel_names.push_back("ch" + std::to_string(c));
	return m;
}

/// Random weekly pattern, one value per (slot, location, channel), in [lo, hi).
inline std::vector<double> random_pattern(std::size_t slots, std::size_t N, std::size_t C, std::mt19937_64 &rng,
                                          double lo = 10.0, double hi = 60.0) {
	std::uniform_real_distribution<double> u(lo, hi);
	std::vector<double> p(slots * N * C);
	for (auto &v : p) v = u(rng);
	return p;
}

/// Strictly weekly-periodic panel: y[t] = pattern[weekly slot of t].
inline mobench::PanelDataset periodic_panel(std::size_t weeks, std::size_t N, std::size_t C,
                                            std::int64_t granularity_s, std::uint64_t seed,
                                            std::vector<double> *pattern_out = nullptr) {
	const auto spw = static_cast<std::size_t>(7 * 86400 / granularity_s);
	std::mt19937_64 rng(seed);
	const auto pattern = random_pattern(spw, N, C, rng);
	const std::size_t T = weeks * spw;
	std::vector<double> v(T * N * C);
	for (std::size_t t = 0; t < T; ++t)
		for (std::size_t j = 0; j < N * C; ++j) v[t * N * C + j] = pattern[(t % spw) * N * C + j];
	if (pattern_out) *pattern_out = pattern;
	return mobench::PanelDataset::from_values(make_meta(T, N, C, granularity_s), std::move(v));
}

/// Weekly pattern plus independent AR(1) residuals per series.
inline mobench::PanelDataset ar1_panel(std::size_t weeks, std::size_t N, std::int64_t granularity_s, double phi,
                                       double sigma, std::uint64_t seed) {
	const auto spw = static_cast<std::size_t>(7 * 86400 / granularity_s);
	std::mt19937_64 rng(seed);
	const auto pattern = random_pattern(spw, N, 1, rng);
	std::normal_distribution<double> noise(0.0, sigma);
	const std::size_t T = weeks * spw;
	std::vector<double> v(T * N);
	for (std::size_t n = 0; n < N; ++n) {
		double r = noise(rng) / std::sqrt(1 - phi * phi);
		for (std::size_t t = 0; t < T; ++t) {
			r = phi * r + noise(rng);
			v[t * N + n] = pattern[(t % spw) * N + n] + r;
		}
	}
	return mobench::PanelDataset::from_values(make_meta(T, N, 1, granularity_s), std::move(v));
}

/// Fresh scratch directory, removed on destruction.
class TempDir {
public:
	explicit TempDir(const std::string &tag = "mobench") {
		std::random_device rd;
		path_ = std::filesystem::temp_directory_path() / (tag + "-" + std::to_string(rd()) + std::to_string(rd()));
		std::filesystem::create_directories(path_);
	}
	~TempDir() {
		std::error_code ec;
		std::filesystem::remove_all(path_, ec);
	}
	TempDir(const TempDir &) = delete;
	TempDir &operator=(const TempDir &) = delete;

	const std::filesystem::path &path() const { return path_; }
	std::filesystem::path operator/(const std::string &name) const { return path_ / name; }

private:
	std::filesystem::path path_;
};

} // namespace fixtures
