#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "gprcp/data.hpp"
#include "gprcp/errors.hpp"
#include "gprcp/gpr.hpp"
#include "oracle.hpp"

using namespace gprcp;

namespace {

InputMatrix column(std::initializer_list<double> xs) {
  InputMatrix X(static_cast<Eigen::Index>(xs.size()), 1);
  Eigen::Index i = 0;
  for (double x : xs) X(i++, 0) = x;
  return X;
}

Eigen::VectorXd vec(std::initializer_list<double> xs) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

// Two inputs far enough apart that their SE covariance underflows to 0 are
// useless for off-diagonal checks, so the 2x2 examples below use a kernel
// with k(x1, x2) = 1 by picking sigma_f and distance accordingly.
const double kLog2 = std::log(2.0);

}  // namespace

TEST(Fit, SinglePoint) {
  // k(x,x) = 1, sigma_n^2 = 1, y = 2 -> alpha = 2 / 2.
  const auto m = fit(Kernel::squared_exponential(1.0, 1.0), NoiseModel::from_sigma(1.0), column({0.0}), vec({2.0}));
  EXPECT_NEAR(m.alpha()(0), 1.0, 1e-15);
}

TEST(Fit, AlphaSolvesSystemAndInverseIsConsistent) {
  std::mt19937_64 rng(1);
  for (auto family : oracle::all_families()) {
    const Kernel k = oracle::random_kernel(rng, family);
    const NoiseModel noise = NoiseModel::from_sigma(0.3);
    const auto X = oracle::random_inputs(rng, 15, 2);
    Eigen::VectorXd y = Eigen::VectorXd::Random(15);
    const auto m = fit(k, noise, X, y);
    const Eigen::MatrixXd C = kernel_matrix(k, X).dense() + noise.variance() * Eigen::MatrixXd::Identity(15, 15);
    EXPECT_LT((C * m.alpha() - y).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LT((m.inverse().dense() * C - Eigen::MatrixXd::Identity(15, 15)).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(Fit, MismatchedLengths) {
  EXPECT_THROW(fit(Kernel::squared_exponential(1.0, 1.0), NoiseModel::from_sigma(1.0), column({0.0, 1.0}), vec({2.0})),
               DimensionMismatch);
}

TEST(Predict, Examples) {
  const Kernel k = Kernel::squared_exponential(1.0, 1.0);
  const auto m = fit(k, NoiseModel::from_sigma(1.0), column({0.0}), vec({2.0}));
  const auto g = predict(m, Eigen::VectorXd::Zero(1), false);
  EXPECT_NEAR(g.mean, 1.0, 1e-15);
  EXPECT_NEAR(g.variance, 0.5, 1e-15);
  EXPECT_FALSE(g.includes_noise);
  const auto gn = predict(m, Eigen::VectorXd::Zero(1), true);
  EXPECT_DOUBLE_EQ(gn.variance, g.variance + 1.0);
  EXPECT_TRUE(gn.includes_noise);

  // Far away: k* underflows to zero and the prior comes back.
  const auto far = predict(m, Eigen::VectorXd::Constant(1, 100.0), false);
  EXPECT_EQ(far.mean, 0.0);
  EXPECT_EQ(far.variance, 1.0);
  EXPECT_THROW(predict(m, Eigen::VectorXd::Zero(2), false), DimensionMismatch);
}

TEST(Predict, PosteriorVarianceBelowPrior) {
  std::mt19937_64 rng(2);
  for (auto family : oracle::all_families()) {
    const Kernel k = oracle::random_kernel(rng, family);
    const auto X = oracle::random_inputs(rng, 20, 2);
    const auto m = fit(k, NoiseModel::from_sigma(0.2), X, Eigen::VectorXd::Random(20));
    const auto T = oracle::random_inputs(rng, 20, 2);
    for (Eigen::Index t = 0; t < T.rows(); ++t) {
      const auto g = predict(m, T.row(t).transpose(), false);
      EXPECT_GE(g.variance, 0.0);
      EXPECT_LE(g.variance, kernel_eval(k, T.row(t).transpose(), T.row(t).transpose()) + 1e-10);
    }
  }
}

TEST(Predict, InterpolatesAsNoiseVanishes) {
  const Kernel k = Kernel::squared_exponential(1.0, 1.0);
  const auto X = column({-1.0, 0.0, 1.5});
  const Eigen::VectorXd y = vec({0.3, -0.7, 1.1});
  const auto m = fit(k, NoiseModel::from_sigma(1e-4), X, y);
  for (Eigen::Index i = 0; i < 3; ++i) EXPECT_NEAR(predict(m, X.row(i).transpose(), false).mean, y(i), 1e-3);
}

TEST(Loo, WorkedExample) {
  // K + sigma_n^2 I = [[2,1],[1,2]]: k(x,x) = 1, sigma_n = 1 and a
  // covariance of 1 between the two points needs sigma_f^2 = 1 at
  // distance 0, so use two identical inputs.
  const auto m = fit(Kernel::squared_exponential(1.0, 1.0), NoiseModel::from_sigma(1.0), column({0.0, 0.0}), vec({1.0, 2.0}));
  const auto l = loo(m);
  EXPECT_NEAR(l[0].mean, 1.0, 1e-14);
  EXPECT_NEAR(l[1].mean, 0.5, 1e-14);
  EXPECT_NEAR(l[0].variance, 1.5, 1e-14);
  EXPECT_NEAR(l[1].variance, 1.5, 1e-14);
  EXPECT_TRUE(l[0].includes_noise);
}

TEST(Loo, SinglePointFallsBackToPrior) {
  const auto m = fit(Kernel::squared_exponential(1.0, 1.0), NoiseModel::from_sigma(1.0), column({0.0}), vec({2.0}));
  const auto l = loo(m);
  EXPECT_NEAR(l[0].mean, 0.0, 1e-15);
  EXPECT_NEAR(l[0].variance, 2.0, 1e-15);
}

TEST(Loo, MatchesExplicitRefits) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> size(2, 20);
  for (auto family : oracle::all_families()) {
    for (int trial = 0; trial < 4; ++trial) {
      const Kernel k = oracle::random_kernel(rng, family);
      const NoiseModel noise = NoiseModel::from_sigma(0.1 + 0.2 * trial);
      const int l = size(rng);
      const auto X = oracle::random_inputs(rng, l, 2);
      const Eigen::VectorXd y = Eigen::VectorXd::Random(l);
      const auto fast = loo(fit(k, noise, X, y));
      const auto slow = oracle::loo_refit(k, noise.variance(), X, y);
      for (int i = 0; i < l; ++i) {
        EXPECT_NEAR(fast[i].mean, slow[i].mean, 1e-8) << k.describe();
        EXPECT_NEAR(fast[i].variance, slow[i].variance, 1e-8) << k.describe();
      }
    }
  }
}

TEST(Nlml, ScalarExamples) {
  // sigma_f tiny so that K + sigma_n^2 I is (almost exactly) [1].
  const Kernel k = Kernel::squared_exponential(1.0, 1e-200);
  const NoiseModel unit = NoiseModel::from_sigma(1.0);
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  EXPECT_NEAR(nlml(k, unit, column({0.0}), vec({0.0})), half_log_2pi, 1e-15);
  EXPECT_NEAR(half_log_2pi, 0.918939, 1e-6);
  EXPECT_NEAR(nlml(k, unit, column({0.0}), vec({1.0})), 0.5 + half_log_2pi, 1e-15);
}

TEST(Nlml, DataFitTermScalesWithY) {
  std::mt19937_64 rng(4);
  const Kernel k = Kernel::matern52(0.7, 1.2);
  const NoiseModel noise = NoiseModel::from_sigma(0.3);
  const auto X = oracle::random_inputs(rng, 10, 1);
  const Eigen::VectorXd y = Eigen::VectorXd::Random(10);
  const double zero = nlml(k, noise, X, Eigen::VectorXd::Zero(10));
  const double one = nlml(k, noise, X, y);
  const double two = nlml(k, noise, X, 2.0 * y);
  // Only the quadratic term depends on y.
  EXPECT_NEAR(two - zero, 4.0 * (one - zero), 1e-10);
  EXPECT_GT(two, one);
}

TEST(NlmlGrad, MatchesFiniteDifferences) {
  std::mt19937_64 rng(9);
  int failures = 0;
  for (auto family : oracle::all_families()) {
    for (int trial = 0; trial < 4; ++trial) {
      const Kernel k = oracle::random_kernel(rng, family);
      const NoiseModel noise = NoiseModel::from_sigma(0.2 + 0.3 * trial);
      const auto X = oracle::random_inputs(rng, 12, 2);
      const Eigen::VectorXd y = Eigen::VectorXd::Random(12);
      Eigen::VectorXd theta(k.log_hypers().size() + 1);
      theta << k.log_hypers(), noise.log_sigma_n;
      const auto f = [&](const Eigen::VectorXd& t) {
        return nlml(k.with_log_hypers(t.head(t.size() - 1)), NoiseModel{t(t.size() - 1)}, X, y);
      };
      const Eigen::VectorXd fd = oracle::central_difference(f, theta);
      const Eigen::VectorXd g = nlml_grad(k, noise, X, y);
      for (Eigen::Index j = 0; j < g.size(); ++j) {
        if (!oracle::close(g(j), fd(j))) {
          ++failures;
          ADD_FAILURE() << k.describe() << " component " << j << ": " << g(j) << " vs " << fd(j);
        }
      }
      EXPECT_NEAR(nlml_with_grad(k, noise, X, y).value, nlml(k, noise, X, y), 1e-10);
    }
  }
  EXPECT_EQ(failures, 0);
}

TEST(NlmlGrad, NoiseComponentUsesTwoSigmaSquared) {
  // With K = 0 the noise gradient is 0.5 tr((C^-1 - a a^T) 2 s I).
  const Kernel k = Kernel::squared_exponential(1.0, 1e-200);
  const NoiseModel noise = NoiseModel::from_sigma(0.5);
  const Eigen::VectorXd y = vec({1.0, -2.0});
  const Eigen::VectorXd g = nlml_grad(k, noise, column({0.0, 3.0}), y);
  const double s = 0.25;
  const double expected = 0.5 * (2.0 / s - y.squaredNorm() / (s * s)) * 2.0 * s;
  EXPECT_NEAR(g(2), expected, 1e-12);
}

TEST(Bfgs, Rosenbrock) {
  const Objective rosen = [](const Eigen::VectorXd& x, double& f, Eigen::VectorXd& g) {
    f = 100.0 * std::pow(x(1) - x(0) * x(0), 2) + std::pow(1.0 - x(0), 2);
    g.resize(2);
    g(0) = -400.0 * x(0) * (x(1) - x(0) * x(0)) - 2.0 * (1.0 - x(0));
    g(1) = 200.0 * (x(1) - x(0) * x(0));
    return true;
  };
  BfgsOptions opts;
  opts.max_iterations = 500;
  const auto r = minimize_bfgs(rosen, Eigen::Vector2d(-1.2, 1.0), opts);
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.x(0), 1.0, 1e-5);
  EXPECT_NEAR(r.x(1), 1.0, 1e-5);
}

TEST(Bfgs, InfeasibleStartThrows) {
  const Objective never = [](const Eigen::VectorXd&, double&, Eigen::VectorXd&) { return false; };
  EXPECT_THROW(minimize_bfgs(never, Eigen::VectorXd::Zero(2)), Error);
}

TEST(Optimize, ArgminContractAndDeterminism) {
  std::mt19937_64 rng(12);
  const auto X = oracle::random_inputs(rng, 40, 1);
  SyntheticSpec spec;
  std::mt19937_64 draw(3);
  const Eigen::VectorXd y = sample_outputs(spec, X, draw);
  for (auto family : oracle::all_families()) {
    const auto r = optimize(family, X, y, 99);
    ASSERT_EQ(r.restarts.size(), 3u);
    for (const auto& t : r.restarts) {
      if (t.failed) continue;
      EXPECT_LE(r.nlml, t.initial_nlml + 1e-12);
      EXPECT_LE(r.nlml, t.final_nlml + 1e-12);
    }
    EXPECT_NEAR(r.nlml, nlml(r.kernel, r.noise, X, y), 1e-9);
    const auto again = optimize(family, X, y, 99);
    EXPECT_EQ(again.nlml, r.nlml);
    EXPECT_EQ(again.kernel.log_hypers(), r.kernel.log_hypers());
  }
}

TEST(Optimize, ConvergedGradientIsSmall) {
  std::mt19937_64 rng(13);
  const auto X = oracle::random_inputs(rng, 60, 1);
  SyntheticSpec spec;
  std::mt19937_64 draw(5);
  const Eigen::VectorXd y = sample_outputs(spec, X, draw);
  const auto r = optimize(KernelFamily::SquaredExponential, X, y, 1);
  bool any_converged = false;
  for (const auto& t : r.restarts) any_converged = any_converged || t.converged;
  EXPECT_TRUE(any_converged);
  EXPECT_LE(r.grad_norm, 1e-4);
  EXPECT_LE(nlml_grad(r.kernel, r.noise, X, y).norm(), 1e-4);
}

TEST(Optimize, RecoversGeneratingHyperparameters) {
  SyntheticSpec spec;
  spec.n_train = 500;
  spec.n_test = 0;
  spec.seed = 21;
  const auto data = generate(spec);
  const auto r = optimize(KernelFamily::SquaredExponential, data.train.X, data.train.y, 4);
  const double ell = std::exp(r.kernel.log_hypers()(0));
  const double sf = std::exp(r.kernel.log_hypers()(1));
  const double sn = r.noise.sigma();
  EXPECT_GT(ell, 1.0 / 1.5);
  EXPECT_LT(ell, 1.5);
  EXPECT_GT(sf, 1.0 / 1.5);
  EXPECT_LT(sf, 1.5);
  EXPECT_GT(sn, 0.1 / 1.5);
  EXPECT_LT(sn, 0.15);
}

TEST(Optimize, RejectsZeroRestarts) {
  OptimizeOptions opts;
  opts.restarts = 0;
  EXPECT_THROW(optimize(KernelFamily::SquaredExponential, column({0.0, 1.0}), vec({0.0, 1.0}), 0, opts), Error);
}
