#include <random>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "mobench/lstsq.hpp"

using namespace mobench;

namespace {

DesignMatrix make_design(std::size_t rows, std::size_t cols, const std::vector<double> &data) {
	DesignMatrix X;
	X.cols = cols;
	X.data = data;
	EXPECT_EQ(X.rows(), rows);
	return X;
}

} // namespace

TEST(Lstsq, ExactFitNoIntercept) {
	const auto X = make_design(3, 1, {1, 2, 3});
	const std::vector<double> y{2, 4, 6};
	const OlsFit f = fit_ols(X, y);
	ASSERT_EQ(f.coef.size(), 1u);
	EXPECT_NEAR(f.coef[0], 2.0, 1e-12);
	EXPECT_EQ(f.intercept, 0.0);
	EXPECT_NEAR(f.rss, 0.0, 1e-20);
}

TEST(Lstsq, HandSolvedNormalEquations) {
	// Explicit intercept column: w = (2/3, 1/2).
	const auto X = make_design(3, 2, {1, 1, 1, 2, 1, 3});
	const std::vector<double> y{1, 2, 2};
	const OlsFit f = fit_ols(X, y);
	EXPECT_NEAR(f.coef[0], 2.0 / 3.0, 1e-12);
	EXPECT_NEAR(f.coef[1], 0.5, 1e-12);
	// Same problem through the built-in intercept.
	const auto X1 = make_design(3, 1, {1, 2, 3});
	const OlsFit g = fit_ols(X1, y, 0.0, true);
	EXPECT_NEAR(g.intercept, 2.0 / 3.0, 1e-12);
	EXPECT_NEAR(g.coef[0], 0.5, 1e-12);
	EXPECT_NEAR(g.rss, 1.0 / 6.0, 1e-12);
}

TEST(Lstsq, MatchesPseudoInverseOracle) {
	std::mt19937_64 rng(11);
	std::normal_distribution<double> g;
	for (int trial = 0; trial < 50; ++trial) {
		const std::size_t m = std::uniform_int_distribution<std::size_t>(20, 200)(rng);
		const std::size_t p = std::uniform_int_distribution<std::size_t>(1, 13)(rng);
		Eigen::MatrixXd A(m, p);
		Eigen::VectorXd b(m);
		DesignMatrix X;
		X.cols = p;
		for (std::size_t i = 0; i < m; ++i) {
			for (std::size_t j = 0; j < p; ++j) {
				A(i, j) = g(rng);
				X.data.push_back(A(i, j));
			}
			b(i) = g(rng);
		}
		const std::vector<double> y(b.data(), b.data() + m);
		const Eigen::VectorXd w = A.completeOrthogonalDecomposition().pseudoInverse() * b;
		const OlsFit f = fit_ols(X, y);
		for (std::size_t j = 0; j < p; ++j) {
			EXPECT_NEAR(f.coef[j], w(j), 1e-8 * std::max(1.0, std::abs(w(j))));
		}
		EXPECT_NEAR(f.rss, (A * w - b).squaredNorm(), 1e-8 * (1 + f.rss));
	}
}

TEST(Lstsq, RidgeMatchesClosedForm) {
	std::mt19937_64 rng(5);
	std::normal_distribution<double> g;
	const std::size_t m = 60, p = 4;
	Eigen::MatrixXd A(m, p);
	Eigen::VectorXd b(m);
	LeastSquaresAccumulator acc(p, true, 7);
	for (std::size_t i = 0; i < m; ++i) {
		std::vector<double> row(p);
		for (std::size_t j = 0; j < p; ++j) row[j] = A(i, j) = g(rng) + 3.0;
		b(i) = g(rng) + 10.0;
		acc.add_row(row, b(i));
	}
	const double lambda = 2.5;
	// Unpenalized intercept: centre the data, solve ridge, recover the intercept.
	const Eigen::RowVectorXd mu = A.colwise().mean();
	const double ybar = b.mean();
	const Eigen::MatrixXd Ac = A.rowwise() - mu;
	const Eigen::VectorXd bc = b.array() - ybar;
	const Eigen::VectorXd w =
	    (Ac.transpose() * Ac + lambda * Eigen::MatrixXd::Identity(p, p)).ldlt().solve(Ac.transpose() * bc);
	const double b0 = ybar - mu.dot(w);
	const OlsFit f = acc.solve(lambda);
	for (std::size_t j = 0; j < p; ++j) EXPECT_NEAR(f.coef[j], w(j), 1e-10);
	EXPECT_NEAR(f.intercept, b0, 1e-9);
	EXPECT_NEAR(f.rss, ((A * w).array() + b0 - b.array()).matrix().squaredNorm(), 1e-8);
}

TEST(Lstsq, NoiselessRecovery) {
	std::mt19937_64 rng(2);
	std::normal_distribution<double> g;
	const std::size_t m = 500, p = 9;
	std::vector<double> w(p);
	for (auto &v : w) v = g(rng);
	DesignMatrix X;
	X.cols = p;
	std::vector<double> y;
	for (std::size_t i = 0; i < m; ++i) {
		double s = 0;
		for (std::size_t j = 0; j < p; ++j) {
			X.data.push_back(g(rng));
			s += X.data.back() * w[j];
		}
		y.push_back(s);
	}
	const OlsFit f = fit_ols(X, y);
	for (std::size_t j = 0; j < p; ++j) EXPECT_NEAR(f.coef[j], w[j], 1e-8);
}

TEST(Lstsq, BlockSizeAndMergeDoNotChangeTheFit) {
	std::mt19937_64 rng(9);
	std::normal_distribution<double> g;
	LeastSquaresAccumulator one(3, true, 1), big(3, true, 4096), a(3, true, 5), b(3, true, 5);
	for (int i = 0; i < 300; ++i) {
		const std::vector<double> x{g(rng), g(rng), g(rng)};
		const double y = g(rng);
		one.add_row(x, y);
		big.add_row(x, y);
		(i % 2 ? a : b).add_row(x, y);
	}
	a.merge(b);
	const OlsFit f1 = one.solve(0), f2 = big.solve(0), f3 = a.solve(0);
	EXPECT_EQ(f3.rows, 300u);
	for (std::size_t j = 0; j < 3; ++j) {
		EXPECT_NEAR(f1.coef[j], f2.coef[j], 1e-12);
		EXPECT_NEAR(f1.coef[j], f3.coef[j], 1e-12);
	}
	EXPECT_NEAR(f1.rss, f3.rss, 1e-9);
}

TEST(Lstsq, Errors) {
	LeastSquaresAccumulator empty(2);
	try {
		empty.solve(0);
		FAIL();
	} catch (const Error &e) {
		EXPECT_EQ(e.kind(), ErrorKind::empty_design);
	}
	// Duplicate column: rank deficient without ridge, solvable with it.
	const auto X = make_design(4, 2, {1, 1, 2, 2, 3, 3, 4, 4});
	const std::vector<double> y{1, 2, 3, 4};
	try {
		fit_ols(X, y);
		FAIL();
	} catch (const Error &e) {
		EXPECT_EQ(e.kind(), ErrorKind::rank_deficient);
		EXPECT_NE(std::string(e.what()).find("ridge"), std::string::npos);
	}
	const OlsFit f = fit_ols(X, y, 1e-6);
	EXPECT_NEAR(f.coef[0], 0.5, 1e-6);
	EXPECT_NEAR(f.coef[1], 0.5, 1e-6);
	// Fewer rows than columns.
	EXPECT_THROW(fit_ols(make_design(1, 2, {1, 2}), std::vector<double>{1}), Error);
	EXPECT_THROW(fit_ols(X, y, -1.0), Error);
	EXPECT_THROW(fit_ols(X, std::vector<double>{1, 2}), Error);
}

TEST(Lstsq, AllZeroTargetsGiveZeroWeights) {
	std::mt19937_64 rng(1);
	std::normal_distribution<double> g;
	LeastSquaresAccumulator acc(3, true);
	for (int i = 0; i < 50; ++i) {
		const std::vector<double> x{g(rng), g(rng), g(rng)};
		acc.add_row(x, 0.0);
	}
	const OlsFit f = acc.solve(1e-8);
	for (double w : f.coef) EXPECT_EQ(w, 0.0);
	EXPECT_EQ(f.intercept, 0.0);
	EXPECT_EQ(f.rmse(), 0.0);
}
