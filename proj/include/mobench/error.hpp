#pragma once

#include <stdexcept>
#include <string>

namespace mobench {

enum class ErrorKind {
	io,
	format,
	shape_mismatch,
	invalid_argument,
	non_finite,
	dataset_missing,
	empty_design,
	rank_deficient,
	no_evaluable_cells,
	granularity_mismatch,
};

inline const char *to_string(ErrorKind kind) {
	switch (kind) {
	case ErrorKind::io: return "io";
	case ErrorKind::format: return "format";
	case ErrorKind::shape_mismatch: return "shape_mismatch";
	case ErrorKind::invalid_argument: return "invalid_argument";
	case ErrorKind::non_finite: return "non_finite";
	case ErrorKind::dataset_missing: return "dataset_missing";
	case ErrorKind::empty_design: return "empty_design";
	case ErrorKind::rank_deficient: return "rank_deficient";
	case ErrorKind::no_evaluable_cells: return "no_evaluable_cells";
	case ErrorKind::granularity_mismatch: return "granularity_mismatch";
	}
	return "unknown";
}

/// Every failure raised by the library carries a kind so callers (and the CLI)
/// can branch on it without parsing messages.
class Error : public std::runtime_error {
public:
	Error(ErrorKind kind, const std::string &message)
	    : std::runtime_error(message), kind_(kind) {}

	ErrorKind kind() const noexcept { return kind_; }

private:
	ErrorKind kind_;
};

} // namespace mobench
