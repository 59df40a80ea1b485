#include <gtest/gtest.h>

#include <Eigen/LU>
#include <cmath>
#include <random>

#include "gprcp/errors.hpp"
#include "gprcp/linalg.hpp"

using namespace gprcp;

namespace {

SymmetricMatrix mat(std::initializer_list<std::initializer_list<double>> rows) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& r : rows) {
    Eigen::Index j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return SymmetricMatrix(m);
}

// A A^T + dim * I, well conditioned.
SymmetricMatrix random_spd(std::mt19937_64& rng, Eigen::Index dim) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd A(dim, dim);
  for (Eigen::Index i = 0; i < A.size(); ++i) A.data()[i] = normal(rng);
  Eigen::MatrixXd m = A * A.transpose();
  m.diagonal().array() += static_cast<double>(dim);
  return SymmetricMatrix::symmetrize(m);
}

}  // namespace

TEST(SymmetricMatrix, RejectsAsymmetricAndNonSquare) {
  Eigen::MatrixXd m(2, 2);
  m << 1, 2, 3, 4;
  EXPECT_THROW(SymmetricMatrix{m}, Error);
  EXPECT_THROW(SymmetricMatrix{Eigen::MatrixXd(2, 3)}, DimensionMismatch);
  EXPECT_THROW(SymmetricMatrix{Eigen::MatrixXd(0, 0)}, DimensionMismatch);
}

TEST(Cholesky, Identity) {
  const auto f = cholesky(SymmetricMatrix::identity(2));
  EXPECT_TRUE(f.lower().isApprox(Eigen::MatrixXd::Identity(2, 2)));
  EXPECT_EQ(f.jitter(), 0.0);
}

TEST(Cholesky, TwoByTwo) {
  const auto f = cholesky(mat({{4, 2}, {2, 3}}));
  Eigen::MatrixXd expected(2, 2);
  expected << 2, 0, 1, std::sqrt(2.0);
  EXPECT_LT((f.lower() - expected).norm(), 1e-14);
  EXPECT_LT((f.lower() * f.lower().transpose() - mat({{4, 2}, {2, 3}}).dense()).norm(), 1e-14);
}

TEST(Cholesky, RankOneSucceedsOnlyWithJitter) {
  // Any positive jitter makes a PSD rank-deficient matrix positive definite,
  // so escalation rescues it; with escalation disabled it must fail.
  const auto m = mat({{1, 1}, {1, 1}});
  EXPECT_THROW(cholesky(m, 0.0, CholeskyOptions{0.0, 1e-12}), NotPositiveDefinite);
  const auto f = cholesky(m);
  EXPECT_GT(f.jitter(), 0.0);
  EXPECT_LE(f.jitter(), 1e-4);
}

TEST(Cholesky, IndefiniteFailsAfterEscalation) {
  EXPECT_THROW(cholesky(mat({{1, 2}, {2, 1}})), NotPositiveDefinite);
}

TEST(Cholesky, ExplicitJitterIsAdded) {
  const auto f = cholesky(SymmetricMatrix::identity(3), 0.5);
  EXPECT_NEAR(f.lower()(0, 0), std::sqrt(1.5), 1e-15);
  EXPECT_EQ(f.jitter(), 0.5);
}

TEST(Cholesky, RejectsNegativeJitter) { EXPECT_THROW(cholesky(SymmetricMatrix::identity(1), -1.0), Error); }

TEST(Solve, Examples) {
  const Eigen::Vector2d a = solve(cholesky(SymmetricMatrix::identity(2)), Eigen::Vector2d(3, -1));
  EXPECT_EQ(a, Eigen::Vector2d(3, -1));
  const Eigen::VectorXd b = solve(cholesky(mat({{2, 1}, {1, 2}})), Eigen::Vector2d(1, 2));
  EXPECT_NEAR(b(0), 0.0, 1e-15);
  EXPECT_NEAR(b(1), 1.0, 1e-15);
  EXPECT_LT((mat({{2, 1}, {1, 2}}).dense() * b - Eigen::Vector2d(1, 2)).norm(), 1e-14);
  const Eigen::VectorXd c = solve(cholesky(mat({{4, 0}, {0, 4}})), Eigen::Vector2d(8, 4));
  EXPECT_NEAR(c(0), 2.0, 1e-15);
  EXPECT_NEAR(c(1), 1.0, 1e-15);
}

TEST(Solve, DimensionMismatch) {
  EXPECT_THROW(solve(cholesky(SymmetricMatrix::identity(2)), Eigen::VectorXd::Ones(3)), DimensionMismatch);
}

TEST(Inverse, Examples) {
  EXPECT_TRUE(inverse(cholesky(SymmetricMatrix::identity(3))).dense().isApprox(Eigen::MatrixXd::Identity(3, 3)));
  const auto inv = inverse(cholesky(mat({{2, 1}, {1, 2}})));
  Eigen::MatrixXd expected(2, 2);
  expected << 2, -1, -1, 2;
  expected /= 3.0;
  EXPECT_LT((inv.dense() - expected).norm(), 1e-15);
  EXPECT_LT((inv.dense() * mat({{2, 1}, {1, 2}}).dense() - Eigen::MatrixXd::Identity(2, 2)).norm(), 1e-15);
  EXPECT_DOUBLE_EQ(inverse(cholesky(mat({{4}})))(0, 0), 0.25);
}

TEST(LogDet, Examples) {
  EXPECT_EQ(log_det(cholesky(SymmetricMatrix::identity(5))), 0.0);
  EXPECT_NEAR(log_det(cholesky(mat({{4}}))), 1.386294361119891, 1e-14);
  // det [[2,1],[1,2]] = 2*2 - 1*1.
  EXPECT_NEAR(log_det(cholesky(mat({{2, 1}, {1, 2}}))), std::log(3.0), 1e-14);
}

TEST(ExtendInverse, Examples) {
  const auto a = extend_inverse(mat({{1}}), Eigen::VectorXd::Zero(1), 1.0);
  EXPECT_TRUE(a.dense().isApprox(Eigen::MatrixXd::Identity(2, 2)));
  const auto b = extend_inverse(mat({{0.5}}), Eigen::VectorXd::Ones(1), 2.0);
  const Eigen::MatrixXd direct = mat({{2, 1}, {1, 2}}).dense().inverse();
  EXPECT_LT((b.dense() - direct).norm(), 1e-15);
  // Schur complement 1 - 1 * 1 * 1 = 0.
  EXPECT_THROW(extend_inverse(mat({{1}}), Eigen::VectorXd::Ones(1), 1.0), SingularExtension);
  EXPECT_THROW(extend_inverse(mat({{1}}), Eigen::VectorXd::Ones(2), 1.0), DimensionMismatch);
}

TEST(LinalgProperties, RandomInstances) {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int trial = 0; trial < 40; ++trial) {
    const Eigen::Index dim = 1 + trial % 50;
    const SymmetricMatrix m = random_spd(rng, dim);
    const auto f = cholesky(m);
    const Eigen::MatrixXd L = f.lower();
    EXPECT_LE((L * L.transpose() - m.dense()).norm(), 1e-9 * m.dense().norm());
    for (Eigen::Index i = 0; i < dim; ++i) EXPECT_GT(L(i, i), 0.0);

    const auto inv = inverse(f);
    EXPECT_LT((inv.dense() * m.dense() - Eigen::MatrixXd::Identity(dim, dim)).cwiseAbs().maxCoeff(), 1e-8);
    for (Eigen::Index i = 0; i < dim; ++i) {
      for (Eigen::Index j = 0; j < dim; ++j) EXPECT_EQ(inv(i, j), inv(j, i));
    }

    Eigen::VectorXd x(dim);
    for (Eigen::Index i = 0; i < dim; ++i) x(i) = normal(rng);
    EXPECT_LT((solve(f, m.dense() * x) - x).cwiseAbs().maxCoeff(), 1e-8);

    // Extend by one row/column and compare with the LU inverse.
    const SymmetricMatrix big = random_spd(rng, dim + 1);
    const auto small_inv = inverse(cholesky(SymmetricMatrix::symmetrize(big.dense().topLeftCorner(dim, dim))));
    const auto ext = extend_inverse(small_inv, big.dense().col(dim).head(dim), big(dim, dim));
    EXPECT_LT((ext.dense() - big.dense().inverse()).cwiseAbs().maxCoeff(), 1e-8);
  }
}
