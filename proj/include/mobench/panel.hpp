#pragma once

// Panel time-series data model: a [T, N, C] tensor (timesteps x locations x
// channels) with an observation mask, its on-disk directory format and the
// train/val/test split logic.
//
// On-disk layout of a dataset directory:
//   meta.json   UTF-8 JSON object holding the DatasetMeta fields (snake_case)
//   values.f32  raw little-endian IEEE-754 float32, row-major [T, N, C], no header
//
// Values are widened to double on load; saving narrows back to float32, so a
// load/save cycle is bit-exact.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "mobench/dates.hpp"
#include "mobench/error.hpp"

namespace mobench {

struct DatasetMeta {
	std::string name;
	std::int64_t start_time = 0; // UTC seconds since epoch
	std::int64_t granularity_s = 300;
	std::size_t num_timesteps = 0;
	std::size_t num_locations = 0;
	std::size_t num_channels = 0;
	std::vector<std::string> channel_names;
	std::optional<double> missing_sentinel;
	std::vector<std::string> holidays; // ISO-8601 local dates
	std::int64_t timezone_offset_s = 0;
	// Optional explicit calendar date of every (local) day covered by the
	// series, for sources that skip days (e.g. weekday-only recordings).
	// Empty means days are consecutive from start_time.
	std::vector<std::string> day_dates;

	std::int64_t slots_per_day() const { return dates::seconds_per_day / granularity_s; }
	std::size_t num_cells() const { return num_timesteps * num_locations * num_channels; }

	/// Slot-of-day offset of the first timestep in local time.
	std::int64_t start_slot_of_day() const {
		return dates::floor_mod(start_time + timezone_offset_s, dates::seconds_per_day) / granularity_s;
	}

	/// Local calendar day (days since epoch) and slot-of-day of timestep `t`.
	std::pair<std::int64_t, std::int64_t> local_day_and_slot(std::size_t t) const {
		if (day_dates.empty()) {
			const std::int64_t local = start_time + timezone_offset_s + static_cast<std::int64_t>(t) * granularity_s;
			return {dates::floor_div(local, dates::seconds_per_day),
			        dates::floor_mod(local, dates::seconds_per_day) / granularity_s};
		}
		const std::int64_t spd = slots_per_day();
		const std::int64_t idx = start_slot_of_day() + static_cast<std::int64_t>(t);
		return {dates::parse_iso_date(day_dates.at(static_cast<std::size_t>(idx / spd))), idx % spd};
	}

	/// Absolute UTC timestamp of timestep `t`.
	std::int64_t timestamp_of(std::size_t t) const {
		if (day_dates.empty()) {
			return start_time + static_cast<std::int64_t>(t) * granularity_s;
		}
		const auto [day, slot] = local_day_and_slot(t);
		return day * dates::seconds_per_day + slot * granularity_s - timezone_offset_s;
	}

	void validate() const {
		auto bad = [](const std::string &msg) { throw Error(ErrorKind::invalid_argument, "invalid dataset meta: " + msg); };
		if (granularity_s <= 0 || dates::seconds_per_day % granularity_s != 0) {
			bad("granularity_s must be a positive divisor of 86400");
		}
		if (num_timesteps < 1 || num_locations < 1 || num_channels < 1) {
			bad("num_timesteps, num_locations and num_channels must all be >= 1");
		}
		if (channel_names.size() != num_channels) {
			bad("channel_names must have num_channels entries");
		}
		std::set<std::int64_t> seen;
		for (const auto &h : holidays) {
			if (!seen.insert(dates::parse_iso_date(h)).second) {
				bad("duplicate holiday " + h);
			}
		}
		if (!day_dates.empty()) {
			const std::int64_t spd = slots_per_day();
			const auto needed =
			    static_cast<std::size_t>((start_slot_of_day() + static_cast<std::int64_t>(num_timesteps) + spd - 1) / spd);
			if (day_dates.size() != needed) {
				bad("day_dates must list " + std::to_string(needed) + " dates, found " + std::to_string(day_dates.size()));
			}
			std::int64_t prev = 0;
			for (std::size_t i = 0; i < day_dates.size(); ++i) {
				const std::int64_t d = dates::parse_iso_date(day_dates[i]);
				if (i > 0 && d <= prev) {
					bad("day_dates must be strictly increasing");
				}
				prev = d;
			}
			const std::int64_t start_day =
			    dates::floor_div(start_time + timezone_offset_s, dates::seconds_per_day);
			if (dates::parse_iso_date(day_dates.front()) != start_day) {
				bad("day_dates[0] must be the local date of start_time");
			}
		}
	}

	bool operator==(const DatasetMeta &) const = default;
};

inline void to_json(nlohmann::json &j, const DatasetMeta &m) {
	j = nlohmann::json{{"name", m.name},
	                   {"start_time", m.start_time},
	                   {"granularity_s", m.granularity_s},
	                   {"num_timesteps", m.num_timesteps},
	                   {"num_locations", m.num_locations},
	                   {"num_channels", m.num_channels},
	                   {"channel_names", m.channel_names},
	                   {"missing_sentinel", nullptr},
	                   {"holidays", m.holidays},
	                   {"timezone_offset_s", m.timezone_offset_s}};
	if (m.missing_sentinel) {
		j["missing_sentinel"] = *m.missing_sentinel;
	}
	if (!m.day_dates.empty()) {
		j["day_dates"] = m.day_dates;
	}
}

inline void from_json(const nlohmann::json &j, DatasetMeta &m) {
	static const std::set<std::string> known{"name",          "start_time",    "granularity_s", "num_timesteps",
	                                         "num_locations", "num_channels",  "channel_names", "missing_sentinel",
	                                         "holidays",      "timezone_offset_s", "day_dates"};
	if (!j.is_object()) {
		throw Error(ErrorKind::format, "meta.json must hold a JSON object");
	}
	for (const auto &[key, _] : j.items()) {
		if (!known.contains(key)) {
			throw Error(ErrorKind::format, "meta.json: unknown field '" + key + "'");
		}
	}
	try {
		j.at("name").get_to(m.name);
		j.at("start_time").get_to(m.start_time);
		j.at("granularity_s").get_to(m.granularity_s);
		j.at("num_timesteps").get_to(m.num_timesteps);
		j.at("num_locations").get_to(m.num_locations);
		j.at("num_channels").get_to(m.num_channels);
		j.at("channel_names").get_to(m.channel_names);
		const auto &sentinel = j.at("missing_sentinel");
		m.missing_sentinel = sentinel.is_null() ? std::nullopt : std::optional<double>(sentinel.get<double>());
		j.at("holidays").get_to(m.holidays);
		j.at("timezone_offset_s").get_to(m.timezone_offset_s);
		m.day_dates = j.value("day_dates", std::vector<std::string>{});
	} catch (const nlohmann::json::exception &e) {
		throw Error(ErrorKind::format, std::string("meta.json: ") + e.what());
	}
}

/// Immutable [T, N, C] panel with observation mask (true = observed).
class PanelDataset {
public:
	PanelDataset() = default;

	/// Builds a panel and derives the mask: a cell is observed iff it is finite
	/// and differs from the sentinel. Without a sentinel, non-finite values are
	/// an error unless `extra_mask` already marks the cell as missing.
	static PanelDataset from_values(DatasetMeta meta, std::vector<double> values,
	                                const std::vector<std::uint8_t> *extra_mask = nullptr) {
		meta.validate();
		if (values.size() != meta.num_cells()) {
			throw Error(ErrorKind::shape_mismatch, "panel '" + meta.name + "': expected " +
			                                           std::to_string(meta.num_cells()) + " values (T*N*C), got " +
			                                           std::to_string(values.size()));
		}
		if (extra_mask && extra_mask->size() != values.size()) {
			throw Error(ErrorKind::shape_mismatch, "mask size differs from value count");
		}
		PanelDataset ds;
		ds.meta_ = std::move(meta);
		ds.values_ = std::move(values);
		ds.mask_.assign(ds.values_.size(), 1);
		const auto &sentinel = ds.meta_.missing_sentinel;
		for (std::size_t i = 0; i < ds.values_.size(); ++i) {
			const double v = ds.values_[i];
			if (extra_mask && !(*extra_mask)[i]) {
				ds.mask_[i] = 0;
				continue;
			}
			if (!std::isfinite(v)) {
				if (!sentinel) {
					const std::size_t C = ds.meta_.num_channels, N = ds.meta_.num_locations;
					throw Error(ErrorKind::non_finite,
					            "non-finite value at [t=" + std::to_string(i / (N * C)) + ", n=" +
					                std::to_string((i / C) % N) + ", c=" + std::to_string(i % C) +
					                "] and no missing_sentinel declared");
				}
				ds.mask_[i] = 0;
			} else if (sentinel && static_cast<float>(v) == static_cast<float>(*sentinel)) {
				ds.mask_[i] = 0;
			}
		}
		return ds;
	}

	/// Zero-length part (e.g. a val split of 0 days): meta kept, no cells.
	static PanelDataset empty_like(DatasetMeta meta) {
		meta.num_timesteps = 0;
		meta.day_dates.clear();
		PanelDataset ds;
		ds.meta_ = std::move(meta);
		return ds;
	}

	bool empty() const { return meta_.num_timesteps == 0; }

	const DatasetMeta &meta() const { return meta_; }
	std::size_t num_timesteps() const { return meta_.num_timesteps; }
	std::size_t num_locations() const { return meta_.num_locations; }
	std::size_t num_channels() const { return meta_.num_channels; }
	std::size_t series_count() const { return meta_.num_locations * meta_.num_channels; }

	std::size_t index(std::size_t t, std::size_t n, std::size_t c) const {
		return (t * meta_.num_locations + n) * meta_.num_channels + c;
	}
	double value(std::size_t t, std::size_t n, std::size_t c) const { return values_[index(t, n, c)]; }
	bool observed(std::size_t t, std::size_t n, std::size_t c) const { return mask_[index(t, n, c)] != 0; }

	const std::vector<double> &values() const { return values_; }
	const std::vector<std::uint8_t> &mask() const { return mask_; }

	std::size_t observed_count() const {
		return static_cast<std::size_t>(std::count(mask_.begin(), mask_.end(), std::uint8_t{1}));
	}

private:
	DatasetMeta meta_;
	std::vector<double> values_;
	std::vector<std::uint8_t> mask_;
};

/// Contiguous time slice [begin, end); meta (start_time, day_dates) shifted to match.
inline PanelDataset slice_time(const PanelDataset &ds, std::size_t begin, std::size_t end) {
	const DatasetMeta &src = ds.meta();
	if (begin > end || end > src.num_timesteps) {
		throw Error(ErrorKind::invalid_argument, "slice [" + std::to_string(begin) + ", " + std::to_string(end) +
		                                             ") out of range for T=" + std::to_string(src.num_timesteps));
	}
	DatasetMeta meta = src;
	meta.num_timesteps = end - begin;
	if (src.day_dates.empty()) {
		meta.start_time = src.start_time + static_cast<std::int64_t>(begin) * src.granularity_s;
	} else if (begin < src.num_timesteps) {
		const std::int64_t spd = src.slots_per_day();
		const std::int64_t first = src.start_slot_of_day() + static_cast<std::int64_t>(begin);
		const std::int64_t last = src.start_slot_of_day() + static_cast<std::int64_t>(std::max(end, begin + 1)) - 1;
		meta.day_dates.assign(src.day_dates.begin() + first / spd, src.day_dates.begin() + last / spd + 1);
		meta.start_time = src.timestamp_of(begin);
	}
	if (begin == end) {
		return PanelDataset::empty_like(std::move(meta));
	}
	const std::size_t stride = src.num_locations * src.num_channels;
	std::vector<double> values(ds.values().begin() + begin * stride, ds.values().begin() + end * stride);
	std::vector<std::uint8_t> mask(ds.mask().begin() + begin * stride, ds.mask().begin() + end * stride);
	return PanelDataset::from_values(std::move(meta), std::move(values), &mask);
}

struct SplitSpec {
	enum class Kind { fractions, days };
	Kind kind = Kind::fractions;
	double train = 0.7;
	double val = 0.1;
	double test = 0.2;

	static SplitSpec fractions(double train, double val, double test) { return {Kind::fractions, train, val, test}; }
	static SplitSpec days(int train, int val, int test) { return {Kind::days, double(train), double(val), double(test)}; }

	bool operator==(const SplitSpec &) const = default;
};

inline std::string to_string(const SplitSpec &s) {
	auto num = [](double v) {
		std::string out = nlohmann::json(v).dump();
		return out;
	};
	if (s.kind == SplitSpec::Kind::days) {
		return "days:" + std::to_string(static_cast<long long>(s.train)) + "," +
		       std::to_string(static_cast<long long>(s.val)) + "," + std::to_string(static_cast<long long>(s.test));
	}
	return "fractions:" + num(s.train) + "," + num(s.val) + "," + num(s.test);
}

/// Boundary indices of a split: train = [0, train_end), val = [train_end,
/// val_end), test = [val_end, test_end).
struct SplitBounds {
	std::size_t train_end = 0;
	std::size_t val_end = 0;
	std::size_t test_end = 0;
};

inline SplitBounds split_bounds(const DatasetMeta &meta, const SplitSpec &spec) {
	auto bad = [](const std::string &msg) { throw Error(ErrorKind::invalid_argument, "infeasible split: " + msg); };
	if (!(spec.train > 0) || !(spec.test > 0) || spec.val < 0) {
		bad("train and test must be positive, val non-negative");
	}
	const std::size_t T = meta.num_timesteps;
	SplitBounds b;
	if (spec.kind == SplitSpec::Kind::fractions) {
		const double total = spec.train + spec.val + spec.test;
		if (total > 1.0 + 1e-9) {
			bad("fractions sum to " + std::to_string(total) + " > 1");
		}
		// Cumulative floors; the epsilon absorbs representation error such as
		// (0.7 + 0.1) * 100 = 79.99999999999999.
		auto cut = [T](double f) {
			return std::min<std::size_t>(T, static_cast<std::size_t>(std::floor(static_cast<double>(T) * f + 1e-9)));
		};
		b.train_end = cut(spec.train);
		b.val_end = cut(spec.train + spec.val);
		b.test_end = total >= 1.0 - 1e-9 ? T : cut(total);
	} else {
		for (double v : {spec.train, spec.val, spec.test}) {
			if (v != std::floor(v)) {
				bad("day counts must be integers");
			}
		}
		const auto spd = static_cast<std::size_t>(meta.slots_per_day());
		b.train_end = static_cast<std::size_t>(spec.train) * spd;
		b.val_end = b.train_end + static_cast<std::size_t>(spec.val) * spd;
		b.test_end = b.val_end + static_cast<std::size_t>(spec.test) * spd;
		if (b.test_end > T) {
			bad(std::to_string(static_cast<long long>(spec.train + spec.val + spec.test)) + " days need " +
			    std::to_string(b.test_end) + " timesteps but the dataset has " + std::to_string(T));
		}
	}
	if (b.train_end == 0 || b.test_end == b.val_end) {
		bad("train and test parts must be non-empty");
	}
	return b;
}

struct SplitParts {
	PanelDataset train;
	PanelDataset val;
	PanelDataset test;
	SplitBounds bounds;
};

inline SplitParts split(const PanelDataset &ds, const SplitSpec &spec) {
	const SplitBounds b = split_bounds(ds.meta(), spec);
	return {slice_time(ds, 0, b.train_end), slice_time(ds, b.train_end, b.val_end),
	        slice_time(ds, b.val_end, b.test_end), b};
}


// ---------------------------------------------------------------------------
// Directory IO

namespace detail {

inline float to_little_endian(float v) {
	if constexpr (std::endian::native == std::endian::little) {
		return v;
	} else {
		auto bits = std::bit_cast<std::uint32_t>(v);
		bits = ((bits & 0xFF) << 24) | ((bits & 0xFF00) << 8) | ((bits >> 8) & 0xFF00) | (bits >> 24);
		return std::bit_cast<float>(bits);
	}
}

inline nlohmann::json read_json_file(const std::filesystem::path &path) {
	std::ifstream in(path);
	if (!in) {
		throw Error(ErrorKind::io, "cannot open " + path.string());
	}
	try {
		return nlohmann::json::parse(in);
	} catch (const nlohmann::json::parse_error &e) {
		throw Error(ErrorKind::format, path.string() + ": malformed JSON: " + e.what());
	}
}

inline void write_text_file(const std::filesystem::path &path, const std::string &text) {
	std::ofstream out(path, std::ios::binary | std::ios::trunc);
	if (!out || !(out << text) || !out.flush()) {
		throw Error(ErrorKind::io, "cannot write " + path.string());
	}
}

inline void ensure_directory(const std::filesystem::path &dir) {
	std::error_code ec;
	std::filesystem::create_directories(dir, ec);
	if (ec || !std::filesystem::is_directory(dir)) {
		throw Error(ErrorKind::io, "cannot create directory " + dir.string() + (ec ? ": " + ec.message() : ""));
	}
}

inline std::vector<float> read_f32_file(const std::filesystem::path &path) {
	std::ifstream in(path, std::ios::binary | std::ios::ate);
	if (!in) {
		throw Error(ErrorKind::io, "cannot open " + path.string());
	}
	const auto bytes = static_cast<std::size_t>(in.tellg());
	if (bytes % sizeof(float) != 0) {
		throw Error(ErrorKind::shape_mismatch, path.string() + ": size " + std::to_string(bytes) +
		                                           " is not a multiple of 4 bytes");
	}
	std::vector<float> out(bytes / sizeof(float));
	in.seekg(0);
	if (!in.read(reinterpret_cast<char *>(out.data()), static_cast<std::streamsize>(bytes))) {
		throw Error(ErrorKind::io, "short read from " + path.string());
	}
	for (auto &v : out) {
		v = to_little_endian(v);
	}
	return out;
}

inline void write_f32_file(const std::filesystem::path &path, const std::vector<float> &data) {
	std::ofstream out(path, std::ios::binary | std::ios::trunc);
	if (!out) {
		throw Error(ErrorKind::io, "cannot write " + path.string());
	}
	if constexpr (std::endian::native == std::endian::little) {
		out.write(reinterpret_cast<const char *>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(float)));
	} else {
		for (float v : data) {
			const float le = to_little_endian(v);
			out.write(reinterpret_cast<const char *>(&le), sizeof(float));
		}
	}
	if (!out.flush()) {
		throw Error(ErrorKind::io, "short write to " + path.string());
	}
}

} // namespace detail

inline DatasetMeta load_meta(const std::filesystem::path &dir) {
	if (!std::filesystem::is_directory(dir)) {
		throw Error(ErrorKind::dataset_missing, "dataset missing: " + dir.string() + " is not a directory");
	}
	const auto meta_path = dir / "meta.json";
	if (!std::filesystem::exists(meta_path)) {
		throw Error(ErrorKind::io, "missing " + meta_path.string());
	}
	return detail::read_json_file(meta_path).get<DatasetMeta>();
}

inline PanelDataset load_dataset(const std::filesystem::path &dir) {
	DatasetMeta meta = load_meta(dir);
	const auto values_path = dir / "values.f32";
	if (!std::filesystem::exists(values_path)) {
		throw Error(ErrorKind::io, "missing " + values_path.string());
	}
	meta.validate();
	const std::vector<float> raw = detail::read_f32_file(values_path);
	if (raw.size() != meta.num_cells()) {
		throw Error(ErrorKind::shape_mismatch,
		            values_path.string() + " holds " + std::to_string(raw.size()) + " floats but meta declares T*N*C = " +
		                std::to_string(meta.num_timesteps) + "*" + std::to_string(meta.num_locations) + "*" +
		                std::to_string(meta.num_channels) + " = " + std::to_string(meta.num_cells()));
	}
	return PanelDataset::from_values(std::move(meta), std::vector<double>(raw.begin(), raw.end()));
}

inline void save_dataset(const PanelDataset &ds, const std::filesystem::path &dir) {
	detail::ensure_directory(dir);
	detail::write_text_file(dir / "meta.json", nlohmann::json(ds.meta()).dump(2) + "\n");
	std::vector<float> raw(ds.values().begin(), ds.values().end());
	detail::write_f32_file(dir / "values.f32", raw);
}

/// Long-format CSV export: `timestamp,location,channel,value`; missing cells
/// are written with an empty value.
inline void export_csv(const PanelDataset &ds, const std::filesystem::path &path) {
	std::ofstream out(path, std::ios::trunc);
	if (!out) {
		throw Error(ErrorKind::io, "cannot write " + path.string());
	}
	out << "timestamp,location,channel,value\n";
	char buf[64];
	for (std::size_t t = 0; t < ds.num_timesteps(); ++t) {
		const std::string ts = dates::format_rfc3339(ds.meta().timestamp_of(t));
		for (std::size_t n = 0; n < ds.num_locations(); ++n) {
			for (std::size_t c = 0; c < ds.num_channels(); ++c) {
				out << ts << ',' << n << ',' << ds.meta().channel_names[c] << ',';
				if (ds.observed(t, n, c)) {
					std::snprintf(buf, sizeof(buf), "%.9g", ds.value(t, n, c));
					out << buf;
				}
				out << '\n';
			}
		}
	}
	if (!out.flush()) {
		throw Error(ErrorKind::io, "short write to " + path.string());
	}
}

} // namespace mobench
