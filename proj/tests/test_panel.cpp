#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include <gtest/gtest.h>

#include "fixtures.hpp"

using namespace mobench;
using fixtures::TempDir;

namespace {

void write_raw(const std::filesystem::path &dir, const DatasetMeta &m, const std::vector<float> &values) {
	std::filesystem::create_directories(dir);
	std::ofstream(dir / "meta.json") << nlohmann::json(m).dump();
	std::ofstream out(dir / "values.f32", std::ios::binary);
	out.write(reinterpret_cast<const char *>(values.data()), static_cast<std::streamsize>(values.size() * 4));
}

} // namespace

TEST(Panel, LoadsSmallFixture) {
	TempDir tmp;
	write_raw(tmp / "ds", fixtures::make_meta(4, 2, 1), {1, 2, 3, 4, 5, 6, 7, 8});
	const PanelDataset ds = load_dataset(tmp / "ds");
	EXPECT_EQ(ds.num_timesteps(), 4u);
	EXPECT_EQ(ds.num_locations(), 2u);
	EXPECT_EQ(ds.num_channels(), 1u);
	EXPECT_EQ(ds.value(2, 1, 0), 6.0);
	EXPECT_EQ(ds.observed_count(), 8u);
}

TEST(Panel, ShortValuesFileIsShapeMismatch) {
	TempDir tmp;
	write_raw(tmp / "ds", fixtures::make_meta(4, 2, 1), {1, 2, 3, 4, 5, 6, 7});
	try {
		load_dataset(tmp / "ds");
		FAIL() << "expected an error";
	} catch (const Error &e) {
		EXPECT_EQ(e.kind(), ErrorKind::shape_mismatch);
	}
}

TEST(Panel, MissingFilesAndDirectory) {
	TempDir tmp;
	try {
		load_dataset(tmp / "nope");
		FAIL();
	} catch (const Error &e) {
		EXPECT_EQ(e.kind(), ErrorKind::dataset_missing);
	}
	std::filesystem::create_directories(tmp / "half");
	std::ofstream(tmp / "half" / "meta.json") << nlohmann::json(fixtures::make_meta(4, 2, 1)).dump();
	try {
		load_dataset(tmp / "half");
		FAIL();
	} catch (const Error &e) {
		EXPECT_EQ(e.kind(), ErrorKind::io);
	}
}

TEST(Panel, MalformedJsonAndUnknownKeys) {
	TempDir tmp;
	write_raw(tmp / "ds", fixtures::make_meta(4, 2, 1), {1, 2, 3, 4, 5, 6, 7, 8});
	std::ofstream(tmp / "ds" / "meta.json") << "{ not json";
	EXPECT_THROW(load_dataset(tmp / "ds"), Error);
	auto j = nlohmann::json(fixtures::make_meta(4, 2, 1));
	j["surprise"] = 1;
	std::ofstream(tmp / "ds" / "meta.json") << j.dump();
	EXPECT_THROW(load_dataset(tmp / "ds"), Error);
}

TEST(Panel, NonFiniteWithoutSentinelNamesIndex) {
	TempDir tmp;
	const float nan = std::numeric_limits<float>::quiet_NaN();
	write_raw(tmp / "ds", fixtures::make_meta(4, 2, 1), {1, 2, 3, 4, 5, nan, 7, 8});
	try {
		load_dataset(tmp / "ds");
		FAIL();
	} catch (const Error &e) {
		EXPECT_EQ(e.kind(), ErrorKind::non_finite);
		EXPECT_NE(std::string(e.what()).find("t=2, n=1, c=0"), std::string::npos) << e.what();
	}
}

TEST(Panel, SentinelAndNonFiniteAreMasked) {
	auto m = fixtures::make_meta(4, 2, 1);
	m.missing_sentinel = 0.0;
	const PanelDataset ds =
	    PanelDataset::from_values(m, {1, 0, 3, std::numeric_limits<double>::infinity(), 5, 6, 0, 8});
	EXPECT_EQ(ds.observed_count(), 5u);
	EXPECT_FALSE(ds.observed(0, 1, 0));
	EXPECT_FALSE(ds.observed(1, 1, 0));
	EXPECT_FALSE(ds.observed(3, 0, 0));
	EXPECT_EQ(ds.value(0, 1, 0), 0.0); // sentinel kept in the values
	for (std::size_t i = 0; i < ds.values().size(); ++i) {
		if (ds.mask()[i]) {
			EXPECT_TRUE(std::isfinite(ds.values()[i]));
		}
	}
}

TEST(Panel, RoundTripIsBitIdentical) {
	std::mt19937_64 rng(7);
	std::normal_distribution<double> g(0, 100);
	auto m = fixtures::make_meta(50, 3, 2, 1800);
	m.missing_sentinel = -1.0;
	m.holidays = {"2024-01-02"};
	m.timezone_offset_s = -8 * 3600;
	std::vector<double> v(m.num_cells());
	for (auto &x : v) x = static_cast<float>(g(rng));
	v[5] = -1.0;
	const PanelDataset ds = PanelDataset::from_values(m, v);
	TempDir tmp;
	save_dataset(ds, tmp / "rt");
	const PanelDataset back = load_dataset(tmp / "rt");
	EXPECT_EQ(back.meta(), ds.meta());
	ASSERT_EQ(back.values().size(), ds.values().size());
	EXPECT_EQ(std::memcmp(back.values().data(), ds.values().data(), v.size() * sizeof(double)), 0);
	EXPECT_EQ(back.mask(), ds.mask());
}

TEST(Panel, SaveToUnwritablePathIsIoError) {
	TempDir tmp;
	std::ofstream(tmp / "file") << "x";
	const PanelDataset ds = PanelDataset::from_values(fixtures::make_meta(1, 1, 1), {1.0});
	try {
		save_dataset(ds, tmp / "file" / "sub");
		FAIL();
	} catch (const Error &e) {
		EXPECT_EQ(e.kind(), ErrorKind::io);
	}
}

TEST(Panel, MetaValidation) {
	auto m = fixtures::make_meta(4, 2, 1);
	m.granularity_s = 7;
	EXPECT_THROW(m.validate(), Error);
	m = fixtures::make_meta(4, 2, 1);
	m.channel_names.push_back("extra");
	EXPECT_THROW(m.validate(), Error);
	m = fixtures::make_meta(4, 2, 1);
	m.holidays = {"2024-01-01", "2024-01-01"};
	EXPECT_THROW(m.validate(), Error);
	m = fixtures::make_meta(4, 2, 1);
	m.holidays = {"2024-13-01"};
	EXPECT_THROW(m.validate(), Error);
}

TEST(Split, FractionsOfHundred) {
	auto m = fixtures::make_meta(100, 1, 1);
	const auto b = split_bounds(m, SplitSpec::fractions(0.7, 0.1, 0.2));
	EXPECT_EQ(b.train_end, 70u);
	EXPECT_EQ(b.val_end, 80u);
	EXPECT_EQ(b.test_end, 100u);
}

TEST(Split, DaysUseSlotsPerDay) {
	auto m = fixtures::make_meta(44 * 288, 1, 1, 300);
	const auto b = split_bounds(m, SplitSpec::days(34, 5, 5));
	EXPECT_EQ(b.train_end, 34u * 288);
	EXPECT_EQ(b.val_end - b.train_end, 5u * 288);
	EXPECT_EQ(b.test_end - b.val_end, 5u * 288);
}

TEST(Split, ZeroValPartIsEmpty) {
	std::vector<double> v(100, 1.0);
	const PanelDataset ds = PanelDataset::from_values(fixtures::make_meta(100, 1, 1), v);
	const SplitParts p = split(ds, SplitSpec::fractions(0.8, 0.0, 0.2));
	EXPECT_EQ(p.train.num_timesteps(), 80u);
	EXPECT_TRUE(p.val.empty());
	EXPECT_EQ(p.test.num_timesteps(), 20u);
}

TEST(Split, RemainderGoesToTestOnlyWhenFractionsCoverAll) {
	auto m = fixtures::make_meta(101, 1, 1);
	auto b = split_bounds(m, SplitSpec::fractions(0.7, 0.1, 0.2));
	EXPECT_EQ(b.test_end, 101u);
	b = split_bounds(m, SplitSpec::fractions(0.5, 0.1, 0.2));
	EXPECT_EQ(b.test_end, 80u);
}

TEST(Split, InfeasibleSpecs) {
	auto m = fixtures::make_meta(10 * 24, 1, 1);
	EXPECT_THROW(split_bounds(m, SplitSpec::days(8, 2, 1)), Error);
	EXPECT_THROW(split_bounds(m, SplitSpec::fractions(0.7, 0.2, 0.2)), Error);
	EXPECT_THROW(split_bounds(m, SplitSpec::fractions(0.0, 0.2, 0.2)), Error);
	EXPECT_THROW(split_bounds(m, SplitSpec::fractions(0.7, -0.1, 0.2)), Error);
}

TEST(Split, PartsAreContiguousAndReproducePrefix) {
	std::mt19937_64 rng(3);
	for (int trial = 0; trial < 50; ++trial) {
		std::uniform_int_distribution<std::size_t> Td(10, 400);
		const std::size_t T = Td(rng);
		std::uniform_real_distribution<double> u(0.05, 0.5);
		const double a = u(rng), b = u(rng) * (1 - a), c = (1 - a - b) * std::uniform_real_distribution<double>(0.3, 1)(rng);
		std::vector<double> v(T * 2);
		for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i);
		const PanelDataset ds = PanelDataset::from_values(fixtures::make_meta(T, 2, 1, 900), v);
		SplitParts p;
		try {
			p = split(ds, SplitSpec::fractions(a, b, c));
		} catch (const Error &) {
			continue; // a part rounded to zero length
		}
		std::vector<double> joined;
		for (const auto *part : {&p.train, &p.val, &p.test}) {
			joined.insert(joined.end(), part->values().begin(), part->values().end());
		}
		ASSERT_LE(joined.size(), v.size());
		EXPECT_TRUE(std::equal(joined.begin(), joined.end(), v.begin()));
		EXPECT_EQ(p.val.meta().start_time, ds.meta().start_time + static_cast<std::int64_t>(p.bounds.train_end) * 900);
		EXPECT_EQ(p.test.meta().start_time, ds.meta().start_time + static_cast<std::int64_t>(p.bounds.val_end) * 900);
	}
}

TEST(Panel, CsvExport) {
	auto m = fixtures::make_meta(2, 1, 1);
	m.missing_sentinel = 0.0;
	const PanelDataset ds = PanelDataset::from_values(m, {1.5, 0.0});
	TempDir tmp;
	export_csv(ds, tmp / "values.csv");
	std::ifstream in(tmp / "values.csv");
	std::string l1, l2, l3;
	std::getline(in, l1);
	std::getline(in, l2);
	std::getline(in, l3);
	EXPECT_EQ(l1, "timestamp,location,channel,value");
	EXPECT_EQ(l2, "2024-01-01T00:00:00Z,0,ch0,1.5");
	EXPECT_EQ(l3, "2024-01-01T01:00:00Z,0,ch0,");
}

TEST(Panel, DayDatesSkipWeekends) {
	auto m = fixtures::make_meta(3 * 24, 1, 1);
	m.day_dates = {"2024-01-04", "2024-01-05", "2024-01-08"}; // Thu, Fri, Mon
	m.start_time = dates::parse_iso_date("2024-01-04") * 86400;
	m.validate();
	EXPECT_EQ(m.timestamp_of(48), dates::parse_iso_date("2024-01-08") * 86400);
	const PanelDataset ds = PanelDataset::from_values(m, std::vector<double>(72, 1.0));
	const PanelDataset tail = slice_time(ds, 30, 72);
	EXPECT_EQ(tail.meta().day_dates, (std::vector<std::string>{"2024-01-05", "2024-01-08"}));
	EXPECT_EQ(tail.meta().timestamp_of(0), m.timestamp_of(30));
	m.day_dates.pop_back();
	EXPECT_THROW(m.validate(), Error);
}
