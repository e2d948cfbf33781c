#include <gtest/gtest.h>

#include "casebench/linalg.hpp"
#include "oracles.hpp"

using namespace casebench;

namespace {

SpMat diagonal(std::initializer_list<double> values) {
  const Index n = static_cast<Index>(values.size());
  SpMat m(n, n);
  Index i = 0;
  for (double v : values) {
    m.insert(i, i) = v;
    ++i;
  }
  return m;
}

double orthonormality_error(const Eigen::MatrixXd& q) {
  return (q.transpose() * q - Eigen::MatrixXd::Identity(q.cols(), q.cols())).cwiseAbs().maxCoeff();
}

}  // namespace

TEST(Products, IdentityAndZero) {
  const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(4, -1.5, 2.0);
  SpMat eye(4, 4);
  eye.setIdentity();
  EXPECT_EQ(spmv(eye, x), x);
  EXPECT_EQ(spmtv(eye, x), x);
  EXPECT_EQ(spmv(SpMat(3, 4), x), Eigen::VectorXd::Zero(3));
}

TEST(Products, SparseMatchesDenseOracle) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::MatrixXd dense = oracle::random_dense(5, 4, 100 + trial);
    for (Index i = 0; i < 5; ++i)
      for (Index j = 0; j < 4; ++j)
        if (rng.bernoulli(0.5)) dense(i, j) = 0;
    const SpMat m = dense.sparseView();
    const Eigen::VectorXd x = oracle::random_dense(4, 1, 7 + trial).col(0);
    const Eigen::VectorXd y = oracle::random_dense(5, 1, 9 + trial).col(0);
    EXPECT_LE((spmv(m, x) - dense * x).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((spmtv(m, y) - dense.transpose() * y).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Products, VectorHelpers) {
  Eigen::VectorXd a(3), b(3);
  a << 1, 2, 2;
  b << 3, 0, -1;
  EXPECT_EQ(dot(a, b), 1);
  EXPECT_EQ(norm(a), 3);
  axpy(2.0, a, b);
  EXPECT_EQ(b, (Eigen::VectorXd(3) << 5, 4, 3).finished());
}

TEST(Products, DimensionMismatchThrows) {
  const Eigen::VectorXd two = Eigen::VectorXd::Zero(2), three = Eigen::VectorXd::Zero(3);
  EXPECT_THROW(spmv(SpMat(2, 3), two), std::invalid_argument);
  EXPECT_THROW(spmtv(SpMat(2, 3), three), std::invalid_argument);
  Eigen::VectorXd y = two;
  EXPECT_THROW(axpy(1.0, three, y), std::invalid_argument);
}

TEST(Selection, RowsAndColumns) {
  const Eigen::MatrixXd dense = oracle::random_dense(4, 5, 1);
  const SpMat m = dense.sparseView();
  const SpMat rows = select_rows(m, {3, 1});
  EXPECT_EQ(Eigen::MatrixXd(rows), (Eigen::MatrixXd(2, 5) << dense.row(3), dense.row(1)).finished());
  const SpMat cols = select_columns(m, {4, 0});
  EXPECT_EQ(Eigen::MatrixXd(cols), (Eigen::MatrixXd(4, 2) << dense.col(4), dense.col(0)).finished());
  EXPECT_THROW(select_rows(m, {4}), std::invalid_argument);
}

TEST(TruncatedSvd, Identity) {
  SpMat eye(3, 3);
  eye.setIdentity();
  const auto svd = truncated_svd(eye, 2, 1);
  EXPECT_NEAR(svd.S[0], 1.0, 1e-12);
  EXPECT_NEAR(svd.S[1], 1.0, 1e-12);
}

TEST(TruncatedSvd, DiagonalIsExact) {
  const auto svd = truncated_svd(diagonal({3, 2, 1}), 2, 42);
  ASSERT_EQ(svd.S.size(), 2);
  EXPECT_EQ(svd.S[0], 3.0);
  EXPECT_EQ(svd.S[1], 2.0);
}

TEST(TruncatedSvd, MatchesJacobiOracle) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Eigen::MatrixXd dense = oracle::random_dense(20, 15, 1000 + seed);
    const auto expected = oracle::singular_values(dense);
    const auto svd = truncated_svd(oracle::to_sparse(dense), 5, seed);
    for (Index k = 0; k < 5; ++k) EXPECT_NEAR(svd.S[k], expected[static_cast<std::size_t>(k)], 1e-6) << seed;
  }
}

TEST(TruncatedSvd, WideAndTallAgree) {
  const Eigen::MatrixXd dense = oracle::random_dense(12, 30, 77);
  const auto wide = truncated_svd(oracle::to_sparse(dense), 4, 3);
  const auto tall = truncated_svd(oracle::to_sparse(Eigen::MatrixXd(dense.transpose())), 4, 3);
  const auto expected = oracle::singular_values(dense.transpose());
  for (Index k = 0; k < 4; ++k) {
    EXPECT_NEAR(wide.S[k], expected[static_cast<std::size_t>(k)], 1e-6);
    EXPECT_NEAR(tall.S[k], expected[static_cast<std::size_t>(k)], 1e-6);
  }
}

TEST(TruncatedSvd, FactorsAreOrthonormalAndSigned) {
  const Eigen::MatrixXd dense = oracle::random_dense(25, 18, 9);
  const auto svd = truncated_svd(oracle::to_sparse(dense), 6, 4);
  EXPECT_LE(orthonormality_error(svd.U), 1e-8);
  EXPECT_LE(orthonormality_error(svd.Vt.transpose()), 1e-8);
  for (Index k = 0; k < 6; ++k) {
    EXPECT_GE(svd.S[k], 0.0);
    if (k > 0) {
      EXPECT_LE(svd.S[k], svd.S[k - 1]);
    }
    Index arg = 0;
    svd.Vt.row(k).cwiseAbs().maxCoeff(&arg);
    EXPECT_GT(svd.Vt(k, arg), 0.0);
  }
}

TEST(TruncatedSvd, ResidualEqualsTailEnergy) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Eigen::MatrixXd dense = oracle::random_dense(20, 15, 500 + seed);
    const auto expected = oracle::singular_values(dense);
    const auto svd = truncated_svd(oracle::to_sparse(dense), 5, seed);
    const double residual = (dense - svd.U * svd.S.asDiagonal() * svd.Vt).norm();
    double tail = 0;
    for (std::size_t k = 5; k < expected.size(); ++k) tail += expected[k] * expected[k];
    EXPECT_LE(residual, dense.norm());
    EXPECT_NEAR(residual, std::sqrt(tail), 1e-6);
  }
}

TEST(TruncatedSvd, BitwiseReproducible) {
  const SpMat m = oracle::to_sparse(oracle::random_dense(30, 20, 8));
  const auto a = truncated_svd(m, 5, 99), b = truncated_svd(m, 5, 99);
  EXPECT_EQ(a.S, b.S);
  EXPECT_EQ(a.U, b.U);
  EXPECT_EQ(a.Vt, b.Vt);
}

TEST(TruncatedSvd, RankOutOfRange) {
  const SpMat m = oracle::to_sparse(oracle::random_dense(4, 3, 1));
  EXPECT_THROW(truncated_svd(m, 0, 1), std::invalid_argument);
  EXPECT_THROW(truncated_svd(m, 4, 1), std::invalid_argument);
}

TEST(TruncatedSvd, RandomizedPathMatchesOracleOnDecayingSpectrum) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    // rank 5 + oversampling 10 = 15 < 40, so the sketch is genuinely partial.
    const Eigen::MatrixXd left = oracle::random_dense(60, 40, 300 + seed).householderQr().householderQ() *
                                 Eigen::MatrixXd::Identity(60, 40);
    const Eigen::MatrixXd right = oracle::random_dense(40, 40, 400 + seed).householderQr().householderQ();
    Eigen::VectorXd spectrum(40);
    for (Index k = 0; k < 40; ++k) spectrum[k] = 10.0 * std::pow(0.5, static_cast<double>(k));
    const Eigen::MatrixXd dense = left * spectrum.asDiagonal() * right.transpose();
    const auto expected = oracle::singular_values(dense);
    const auto wide = truncated_svd(oracle::to_sparse(Eigen::MatrixXd(dense.transpose())), 5, seed);
    const auto tall = truncated_svd(oracle::to_sparse(dense), 5, seed);
    for (Index k = 0; k < 5; ++k) {
      EXPECT_NEAR(tall.S[k], expected[static_cast<std::size_t>(k)], 1e-6) << seed;
      EXPECT_NEAR(wide.S[k], expected[static_cast<std::size_t>(k)], 1e-6) << seed;
    }
    EXPECT_LE(orthonormality_error(tall.U), 1e-8);
    EXPECT_LE(orthonormality_error(tall.Vt.transpose()), 1e-8);
  }
}
