#pragma once

// Linear least squares with optional ridge penalty, solved by Householder QR.
//
// Rows are streamed into a LeastSquaresAccumulator, which keeps only the
// (p+1)x(p+1) triangular factor of the augmented matrix [X | y] and folds each
// block of buffered rows into it. Memory is O(block * p) regardless of the
// number of rows, so pooled fits over millions of (time, sensor) rows stay cheap.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mobench/error.hpp"

namespace mobench {

struct OlsFit {
	std::vector<double> coef; // one per feature column
	double intercept = 0.0;   // 0 when no intercept was fitted
	std::size_t rows = 0;
	double rss = 0.0; // unpenalized residual sum of squares

	double rmse() const { return rows ? std::sqrt(rss / static_cast<double>(rows)) : 0.0; }
	double predict(std::span<const double> x) const {
		double acc = intercept;
		for (std::size_t j = 0; j < coef.size(); ++j) {
			acc += coef[j] * x[j];
		}
		return acc;
	}
};

namespace detail {

// In-place Householder triangularization of a row-major m x q matrix (m >= q).
// On return the leading q x q block is R; rows below are garbage.
inline void householder_triangularize(std::vector<double> &M, std::size_t m, std::size_t q) {
	std::vector<double> v(m);
	for (std::size_t k = 0; k < q; ++k) {
		double norm2 = 0.0;
		for (std::size_t i = k; i < m; ++i) {
			norm2 += M[i * q + k] * M[i * q + k];
		}
		if (norm2 == 0.0) {
			continue;
		}
		const double x0 = M[k * q + k];
		const double alpha = x0 > 0 ? -std::sqrt(norm2) : std::sqrt(norm2);
		double vnorm2 = 0.0;
		for (std::size_t i = k; i < m; ++i) {
			v[i] = M[i * q + k];
		}
		v[k] -= alpha;
		vnorm2 = norm2 - x0 * x0 + v[k] * v[k];
		if (vnorm2 == 0.0) {
			continue;
		}
		for (std::size_t j = k + 1; j < q; ++j) {
			double dot = 0.0;
			for (std::size_t i = k; i < m; ++i) {
				dot += v[i] * M[i * q + j];
			}
			const double f = 2.0 * dot / vnorm2;
			for (std::size_t i = k; i < m; ++i) {
				M[i * q + j] -= f * v[i];
			}
		}
		M[k * q + k] = alpha;
		for (std::size_t i = k + 1; i < m; ++i) {
			M[i * q + k] = 0.0;
		}
	}
}

} // namespace detail

class LeastSquaresAccumulator {
public:
	explicit LeastSquaresAccumulator(std::size_t features, bool intercept = true, std::size_t block_rows = 1024)
	    : features_(features), intercept_(intercept), q_(features + (intercept ? 1 : 0) + 1),
	      block_rows_(std::max<std::size_t>(block_rows, 1)), r_(q_ * q_, 0.0) {
		buffer_.reserve(block_rows_ * q_);
	}

	std::size_t features() const { return features_; }
	bool has_intercept() const { return intercept_; }
	std::size_t rows() const { return rows_; }

	void add_row(std::span<const double> x, double y) {
		if (x.size() != features_) {
			throw Error(ErrorKind::shape_mismatch, "add_row: expected " + std::to_string(features_) + " features");
		}
		buffer_.insert(buffer_.end(), x.begin(), x.end());
		if (intercept_) {
			buffer_.push_back(1.0);
		}
		buffer_.push_back(y);
		++rows_;
		if (buffer_.size() >= block_rows_ * q_) {
			flush();
		}
	}

	/// Folds another accumulator's rows into this one.
	void merge(const LeastSquaresAccumulator &other) {
		if (other.q_ != q_) {
			throw Error(ErrorKind::shape_mismatch, "merge: accumulators differ in width");
		}
		LeastSquaresAccumulator copy = other;
		copy.flush();
		flush();
		stack_and_reduce(copy.r_, q_);
		rows_ += other.rows_;
	}

	/// Minimizes ||y - Xw - b||^2 + ridge * ||w||^2 (intercept b unpenalized).
	OlsFit solve(double ridge = 0.0) const {
		if (!(ridge >= 0.0)) {
			throw Error(ErrorKind::invalid_argument, "ridge must be >= 0");
		}
		const std::size_t p = q_ - 1;
		if (rows_ == 0) {
			throw Error(ErrorKind::empty_design, "least squares: no rows in the design matrix");
		}
		if (ridge == 0.0 && rows_ < p) {
			throw Error(ErrorKind::rank_deficient, "least squares: " + std::to_string(rows_) + " rows for " +
			                                           std::to_string(p) + " unknowns; use ridge > 0");
		}
		LeastSquaresAccumulator work = *this;
		work.flush();
		const std::vector<double> plain_r = work.r_;
		if (ridge > 0.0) {
			std::vector<double> penalty(features_ * q_, 0.0);
			const double root = std::sqrt(ridge);
			for (std::size_t j = 0; j < features_; ++j) {
				penalty[j * q_ + j] = root;
			}
			work.stack_and_reduce(penalty, features_);
		}
		const auto &R = work.r_;
		double max_diag = 0.0;
		for (std::size_t j = 0; j < p; ++j) {
			max_diag = std::max(max_diag, std::abs(R[j * q_ + j]));
		}
		const double tol = max_diag * 1e-11 * static_cast<double>(p);
		for (std::size_t j = 0; j < p; ++j) {
			if (!(std::abs(R[j * q_ + j]) > tol)) {
				throw Error(ErrorKind::rank_deficient,
				            "least squares: design matrix is rank deficient (column " + std::to_string(j) +
				                "); use ridge > 0");
			}
		}
		std::vector<double> w(p);
		for (std::size_t jj = p; jj-- > 0;) {
			double acc = R[jj * q_ + p];
			for (std::size_t k = jj + 1; k < p; ++k) {
				acc -= R[jj * q_ + k] * w[k];
			}
			w[jj] = acc / R[jj * q_ + jj];
		}
		OlsFit fit;
		fit.coef.assign(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(features_));
		fit.intercept = intercept_ ? w[features_] : 0.0;
		fit.rows = rows_;
		// ||Xw - y||^2 = ||R0 [w; -1]||^2 since [X y] = Q R0.
		double rss = 0.0;
		for (std::size_t i = 0; i < q_; ++i) {
			double acc = -plain_r[i * q_ + p];
			for (std::size_t k = i; k < p; ++k) {
				acc += plain_r[i * q_ + k] * w[k];
			}
			rss += acc * acc;
		}
		fit.rss = rss;
		return fit;
	}

private:
	void flush() {
		if (buffer_.empty()) {
			return;
		}
		const std::size_t extra = buffer_.size() / q_;
		stack_and_reduce(buffer_, extra);
		buffer_.clear();
	}

	void stack_and_reduce(const std::vector<double> &block, std::size_t block_rows) {
		std::vector<double> M;
		M.reserve((q_ + block_rows) * q_);
		M.insert(M.end(), r_.begin(), r_.end());
		M.insert(M.end(), block.begin(), block.begin() + static_cast<std::ptrdiff_t>(block_rows * q_));
		detail::householder_triangularize(M, q_ + block_rows, q_);
		std::copy(M.begin(), M.begin() + static_cast<std::ptrdiff_t>(q_ * q_), r_.begin());
	}

	std::size_t features_;
	bool intercept_;
	std::size_t q_; // features + intercept + target column
	std::size_t block_rows_;
	std::size_t rows_ = 0;
	std::vector<double> r_;
	std::vector<double> buffer_;
};

/// Row-major design matrix.
struct DesignMatrix {
	std::size_t cols = 0;
	std::vector<double> data;

	std::size_t rows() const { return cols ? data.size() / cols : 0; }
	std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
};

inline OlsFit fit_ols(const DesignMatrix &X, std::span<const double> y, double ridge = 0.0,
                      bool include_intercept = false) {
	if (X.rows() != y.size()) {
		throw Error(ErrorKind::shape_mismatch, "fit_ols: X has " + std::to_string(X.rows()) + " rows, y has " +
		                                           std::to_string(y.size()));
	}
	LeastSquaresAccumulator acc(X.cols, include_intercept);
	for (std::size_t i = 0; i < y.size(); ++i) {
		acc.add_row(X.row(i), y[i]);
	}
	return acc.solve(ridge);
}

} // namespace mobench
