#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <vector>

#include "gprcp/kernels.hpp"
#include "gprcp/linalg.hpp"

namespace gprcp {

struct PredictiveGaussian {
  double mean = 0.0;
  double variance = 0.0;
  bool includes_noise = false;
};

// Zero-mean GP regression model conditioned on (X, y). Holds the Cholesky
// factor of C = K + sigma_n^2 I, its inverse and alpha = C^{-1} y.
class GprModel {
 public:
  const Kernel& kernel() const { return kernel_; }
  const NoiseModel& noise() const { return noise_; }
  const InputMatrix& inputs() const { return X_; }
  const Eigen::VectorXd& targets() const { return y_; }
  const CholeskyFactor& factor() const { return factor_; }
  const SymmetricMatrix& inverse() const { return inv_; }
  const Eigen::VectorXd& alpha() const { return alpha_; }
  Eigen::Index size() const { return y_.size(); }

 private:
  GprModel(Kernel kernel, NoiseModel noise, InputMatrix X, Eigen::VectorXd y,
           CholeskyFactor factor, SymmetricMatrix inv, Eigen::VectorXd alpha);

  friend GprModel fit(const Kernel&, const NoiseModel&, const InputMatrix&, const Eigen::VectorXd&,
                      const CholeskyOptions&);

  Kernel kernel_;
  NoiseModel noise_;
  InputMatrix X_;
  Eigen::VectorXd y_;
  CholeskyFactor factor_;
  SymmetricMatrix inv_;
  Eigen::VectorXd alpha_;
};

GprModel fit(const Kernel& kernel, const NoiseModel& noise, const InputMatrix& X,
             const Eigen::VectorXd& y, const CholeskyOptions& options = {});

// Posterior of f(x_star), or of y_star when with_noise is set. Negative
// variances from round-off are clamped to zero.
PredictiveGaussian predict(const GprModel& m, const PointRef& x_star, bool with_noise);

// Closed-form leave-one-out predictive distributions of every training
// output (noise included).
std::vector<PredictiveGaussian> loo(const GprModel& m);

double nlml(const Kernel& kernel, const NoiseModel& noise, const InputMatrix& X,
            const Eigen::VectorXd& y);

// Gradient with respect to [kernel log-hypers..., log sigma_n].
Eigen::VectorXd nlml_grad(const Kernel& kernel, const NoiseModel& noise, const InputMatrix& X,
                          const Eigen::VectorXd& y);

struct NlmlEvaluation {
  double value = 0.0;
  Eigen::VectorXd grad;
};

NlmlEvaluation nlml_with_grad(const Kernel& kernel, const NoiseModel& noise,
                              const InputMatrix& X, const Eigen::VectorXd& y);

// ---------------------------------------------------------------------------
// Unconstrained minimization

struct BfgsOptions {
  int max_iterations = 200;
  double grad_tol = 1e-6;
  // Longest step (2-norm) tried by the line search.
  double max_step = 3.0;
};

struct BfgsResult {
  Eigen::VectorXd x;
  double value = 0.0;
  Eigen::VectorXd grad;
  int iterations = 0;
  bool converged = false;
};

// Objective returns false when the point is infeasible (treated as +inf).
using Objective = std::function<bool(const Eigen::VectorXd& x, double& value, Eigen::VectorXd& grad)>;

// Quasi-Newton minimization with an Armijo backtracking line search.
// Throws Error if the starting point is infeasible.
BfgsResult minimize_bfgs(const Objective& objective, Eigen::VectorXd x0, const BfgsOptions& options = {});

// ---------------------------------------------------------------------------
// Hyperparameter optimization

struct OptimizeOptions {
  int restarts = 3;
  BfgsOptions bfgs{};
  // Initial kernel log-hypers ~ U[log lo, log hi]; likewise log sigma_n.
  double hyper_init_lo = 0.1;
  double hyper_init_hi = 10.0;
  double noise_init_lo = 0.01;
  double noise_init_hi = 1.0;
  // Points with any |log-hyper| beyond this bound are infeasible.
  double log_bound = 12.0;
};

struct RestartTrace {
  Eigen::VectorXd initial;
  double initial_nlml = 0.0;
  double final_nlml = 0.0;
  int iterations = 0;
  bool converged = false;
  bool failed = false;
};

struct OptimizeResult {
  Kernel kernel;
  NoiseModel noise;
  double nlml = 0.0;
  double grad_norm = 0.0;
  std::vector<RestartTrace> restarts;
};

// Minimizes the NLML from `restarts` random initial points and returns the
// best run (ties resolved by the lowest restart index).
OptimizeResult optimize(KernelFamily family, const InputMatrix& X, const Eigen::VectorXd& y,
                        std::uint64_t seed, const OptimizeOptions& options = {});

}  // namespace gprcp
