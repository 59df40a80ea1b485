#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <random>

#include "gprcp/errors.hpp"
#include "gprcp/kernels.hpp"
#include "oracle.hpp"

using namespace gprcp;

namespace {

Eigen::VectorXd v1(double x) { return Eigen::VectorXd::Constant(1, x); }

}  // namespace

TEST(Kernel, HyperCountsAndNames) {
  EXPECT_EQ(hyper_count(KernelFamily::SquaredExponential), 2);
  EXPECT_EQ(hyper_count(KernelFamily::RationalQuadratic), 3);
  EXPECT_EQ(hyper_count(KernelFamily::NeuralNetwork), 2);
  for (auto f : oracle::all_families()) EXPECT_EQ(parse_kernel_family(to_string(f)), f);
  EXPECT_EQ(parse_kernel_family("SE"), KernelFamily::SquaredExponential);
  EXPECT_THROW(parse_kernel_family("periodic"), ConfigError);
  EXPECT_THROW(Kernel(KernelFamily::RationalQuadratic, Eigen::VectorXd::Zero(2)), DimensionMismatch);
}

TEST(KernelEval, Examples) {
  const Kernel se = Kernel::squared_exponential(1.0, 1.0);
  EXPECT_DOUBLE_EQ(kernel_eval(se, v1(0.3), v1(0.3)), 1.0);
  EXPECT_NEAR(kernel_eval(se, v1(0.0), v1(1.0)), 0.6065306597126334, 1e-15);
  EXPECT_DOUBLE_EQ(kernel_eval(Kernel::matern32(1.0, 2.0), v1(1.5), v1(1.5)), 4.0);
  EXPECT_THROW(kernel_eval(se, v1(0.0), Eigen::VectorXd::Zero(2)), DimensionMismatch);
}

TEST(KernelEval, MatchesOracleFormulasAndIsSymmetric) {
  std::mt19937_64 rng(3);
  for (auto family : oracle::all_families()) {
    for (int trial = 0; trial < 20; ++trial) {
      const Kernel k = oracle::random_kernel(rng, family);
      const auto X = oracle::random_inputs(rng, 2, 1 + trial % 4);
      const Eigen::VectorXd a = X.row(0).transpose();
      const Eigen::VectorXd b = X.row(1).transpose();
      const double v = kernel_eval(k, a, b);
      EXPECT_NEAR(v, oracle::kernel_value(k, a, b), 1e-12 * std::max(1.0, std::abs(v))) << k.describe();
      EXPECT_EQ(v, kernel_eval(k, b, a));
      EXPECT_GT(kernel_eval(k, a, a), 0.0);
    }
  }
}

TEST(KernelMatrix, Examples) {
  const Kernel se = Kernel::squared_exponential(1.0, 1.0);
  InputMatrix X(2, 1);
  X << 0.0, 1.0;
  const auto K = kernel_matrix(se, X);
  EXPECT_EQ(K(0, 0), 1.0);
  EXPECT_NEAR(K(0, 1), std::exp(-0.5), 1e-15);
  EXPECT_EQ(K(0, 1), K(1, 0));
  EXPECT_EQ(kernel_matrix(Kernel::matern52(0.5, 1.3), X.topRows(1)).dim(), 1);
  EXPECT_THROW(kernel_matrix(se, InputMatrix(0, 1)), DimensionMismatch);
}

TEST(KernelMatrix, PositiveSemidefinite) {
  std::mt19937_64 rng(5);
  for (auto family : oracle::all_families()) {
    for (int trial = 0; trial < 5; ++trial) {
      const Kernel k = oracle::random_kernel(rng, family);
      const auto X = oracle::random_inputs(rng, 30, 3);
      const auto K = kernel_matrix(k, X);
      const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(K.dense()).eigenvalues();
      EXPECT_GE(ev.minCoeff(), -1e-10 * K.dense().trace()) << k.describe();
      EXPECT_NO_THROW(cholesky(K.plus_diagonal(1e-8), 0.0, CholeskyOptions{0.0, 1e-12})) << k.describe();
    }
  }
}

TEST(KernelCross, Examples) {
  const Kernel se = Kernel::squared_exponential(1.0, 1.0);
  InputMatrix X(1, 1);
  X << 0.0;
  const Eigen::VectorXd c = kernel_cross(se, X, v1(2.0));
  ASSERT_EQ(c.size(), 1);
  EXPECT_NEAR(c(0), std::exp(-2.0), 1e-15);
  InputMatrix X2(2, 1);
  X2 << 0.7, -1.0;
  EXPECT_EQ(kernel_cross(se, X2, v1(0.7))(0), kernel_eval(se, v1(0.7), v1(0.7)));
  EXPECT_THROW(kernel_cross(se, X2, Eigen::VectorXd::Zero(2)), DimensionMismatch);
}

TEST(KernelGrad, Examples) {
  const Kernel se = Kernel::squared_exponential(1.0, 1.0);
  InputMatrix X(2, 1);
  X << 0.0, 1.0;
  const auto g = kernel_grad(se, X);
  ASSERT_EQ(g.size(), 2u);
  EXPECT_NEAR(g[0](0, 1), std::exp(-0.5), 1e-15);
  EXPECT_LT((g[1].dense() - 2.0 * kernel_matrix(se, X).dense()).norm(), 1e-15);
}

TEST(KernelGrad, MatchesFiniteDifferences) {
  std::mt19937_64 rng(11);
  int failures = 0;
  for (auto family : oracle::all_families()) {
    for (int trial = 0; trial < 6; ++trial) {
      const Kernel k = oracle::random_kernel(rng, family);
      const auto X = oracle::random_inputs(rng, 6, 1 + trial % 3);
      const auto grads = kernel_grad(k, X);
      for (Eigen::Index i = 0; i < X.rows(); ++i) {
        for (Eigen::Index j = 0; j < X.rows(); ++j) {
          const auto entry = [&](const Eigen::VectorXd& h) {
            return kernel_eval(k.with_log_hypers(h), X.row(i).transpose(), X.row(j).transpose());
          };
          const Eigen::VectorXd fd = oracle::central_difference(entry, k.log_hypers());
          for (Eigen::Index t = 0; t < fd.size(); ++t) {
            if (!oracle::close(grads[static_cast<std::size_t>(t)](i, j), fd(t))) {
              ++failures;
              ADD_FAILURE() << k.describe() << " entry (" << i << "," << j << ") hyper " << t << ": "
                            << grads[static_cast<std::size_t>(t)](i, j) << " vs " << fd(t);
            }
          }
        }
      }
    }
  }
  EXPECT_EQ(failures, 0);
}

TEST(Kernel, RationalQuadraticApproachesSquaredExponential) {
  const Kernel rq = Kernel::rational_quadratic(0.8, 1.3, 1e6);
  const Kernel se = Kernel::squared_exponential(0.8, 1.3);
  for (double r = 0.0; r <= 3.0 * 0.8; r += 0.05) {
    const double a = kernel_eval(rq, v1(0.0), v1(r));
    const double b = kernel_eval(se, v1(0.0), v1(r));
    EXPECT_LE(std::abs(a - b), 1e-4 * b) << "r = " << r;
  }
}

TEST(NoiseModel, Conversions) {
  const NoiseModel n = NoiseModel::from_sigma(0.1);
  EXPECT_NEAR(n.sigma(), 0.1, 1e-16);
  EXPECT_NEAR(n.variance(), 0.01, 1e-16);
  EXPECT_THROW(NoiseModel::from_sigma(0.0), Error);
}
