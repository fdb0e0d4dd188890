#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "mobench/error.hpp"

namespace mobench {

/// Dense row-major [rows, N, C] block of doubles with a per-cell validity mask.
/// Rows are timesteps of a panel or forecast origins, depending on context.
struct MaskedTensor {
	std::size_t rows = 0;
	std::size_t locations = 0;
	std::size_t channels = 0;
	std::vector<double> values;
	std::vector<std::uint8_t> mask;

	MaskedTensor() = default;
	MaskedTensor(std::size_t r, std::size_t n, std::size_t c)
	    : rows(r), locations(n), channels(c), values(r * n * c, std::numeric_limits<double>::quiet_NaN()),
	      mask(r * n * c, 0) {}

	std::size_t size() const { return values.size(); }
	std::size_t index(std::size_t r, std::size_t n, std::size_t c) const { return (r * locations + n) * channels + c; }

	void set(std::size_t i, double v) {
		values[i] = v;
		mask[i] = 1;
	}

	bool same_shape(const MaskedTensor &o) const {
		return rows == o.rows && locations == o.locations && channels == o.channels;
	}

	std::size_t valid_count() const {
		std::size_t k = 0;
		for (auto m : mask) {
			k += m != 0;
		}
		return k;
	}
};

} // namespace mobench
