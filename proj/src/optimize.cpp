#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "gprcp/errors.hpp"
#include "gprcp/gpr.hpp"
#include "gprcp/log.hpp"

namespace gprcp {

BfgsResult minimize_bfgs(const Objective& objective, Eigen::VectorXd x0, const BfgsOptions& options) {
  constexpr double kArmijo = 1e-4;
  constexpr double kShrink = 0.5;
  constexpr int kMaxBacktracks = 40;

  const Eigen::Index n = x0.size();
  BfgsResult r;
  r.x = std::move(x0);
  if (!objective(r.x, r.value, r.grad) || !std::isfinite(r.value)) {
    throw Error("minimize_bfgs: objective is infeasible at the starting point");
  }
  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);
  bool scaled = false;

  for (r.iterations = 0; r.iterations < options.max_iterations; ++r.iterations) {
    if (r.grad.norm() <= options.grad_tol) {
      r.converged = true;
      break;
    }
    Eigen::VectorXd dir = -H * r.grad;
    double slope = r.grad.dot(dir);
    if (!(slope < 0.0)) {
      H.setIdentity();
      dir = -r.grad;
      slope = -r.grad.squaredNorm();
    }
    double t = std::min(1.0, options.max_step / dir.norm());

    Eigen::VectorXd x_new;
    Eigen::VectorXd g_new;
    double f_new = 0.0;
    bool accepted = false;
    for (int k = 0; k < kMaxBacktracks; ++k, t *= kShrink) {
      x_new = r.x + t * dir;
      if (objective(x_new, f_new, g_new) && std::isfinite(f_new) &&
          f_new <= r.value + kArmijo * t * slope) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;

    const Eigen::VectorXd s = x_new - r.x;
    const Eigen::VectorXd yv = g_new - r.grad;
    const double sy = s.dot(yv);
    const double decrease = r.value - f_new;
    r.x = std::move(x_new);
    r.grad = std::move(g_new);
    r.value = f_new;

    if (sy > 1e-12 * s.norm() * yv.norm()) {
      if (!scaled) {
        H *= sy / yv.squaredNorm();
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const Eigen::VectorXd Hy = H * yv;
      // H+ = (I - rho s y^T) H (I - rho y s^T) + rho s s^T
      H += rho * ((1.0 + rho * yv.dot(Hy)) * (s * s.transpose()) - Hy * s.transpose() -
                  s * Hy.transpose());
    }
    if (decrease <= 1e-14 * (1.0 + std::abs(r.value)) && r.grad.norm() <= 1e3 * options.grad_tol) {
      r.converged = true;
      break;
    }
  }
  if (!r.converged && r.grad.norm() <= options.grad_tol) r.converged = true;
  return r;
}

OptimizeResult optimize(KernelFamily family, const InputMatrix& X, const Eigen::VectorXd& y,
                        std::uint64_t seed, const OptimizeOptions& options) {
  if (options.restarts < 1) throw Error("optimize: restarts must be >= 1");
  const Eigen::Index n_kernel = hyper_count(family);

  Objective objective = [&](const Eigen::VectorXd& theta, double& value, Eigen::VectorXd& grad) {
    if (!theta.allFinite() || theta.cwiseAbs().maxCoeff() > options.log_bound) return false;
    try {
      const Kernel kernel(family, theta.head(n_kernel));
      const NlmlEvaluation e = nlml_with_grad(kernel, NoiseModel{theta(n_kernel)}, X, y);
      if (!std::isfinite(e.value) || !e.grad.allFinite()) return false;
      value = e.value;
      grad = e.grad;
      return true;
    } catch (const NotPositiveDefinite&) {
      return false;
    }
  };

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> hyper_init(std::log(options.hyper_init_lo),
                                                    std::log(options.hyper_init_hi));
  std::uniform_real_distribution<double> noise_init(std::log(options.noise_init_lo),
                                                    std::log(options.noise_init_hi));

  OptimizeResult best{Kernel(family, Eigen::VectorXd::Zero(n_kernel)), NoiseModel{},
                      std::numeric_limits<double>::infinity(), 0.0, {}};
  bool found = false;
  for (int r = 0; r < options.restarts; ++r) {
    RestartTrace trace;
    trace.initial.resize(n_kernel + 1);
    for (Eigen::Index j = 0; j < n_kernel; ++j) trace.initial(j) = hyper_init(rng);
    trace.initial(n_kernel) = noise_init(rng);

    double f0 = 0.0;
    Eigen::VectorXd g0;
    if (!objective(trace.initial, f0, g0)) {
      trace.failed = true;
      best.restarts.push_back(trace);
      continue;
    }
    trace.initial_nlml = f0;
    const BfgsResult run = minimize_bfgs(objective, trace.initial, options.bfgs);
    trace.final_nlml = run.value;
    trace.iterations = run.iterations;
    trace.converged = run.converged;
    best.restarts.push_back(trace);

    std::ostringstream msg;
    msg << "optimize[" << to_string(family) << "] restart " << r << ": nlml " << f0 << " -> "
        << run.value << " in " << run.iterations << " iterations"
        << (run.converged ? "" : " (not converged)");
    log::debug(msg.str());

    if (run.value < best.nlml) {
      best.kernel = Kernel(family, run.x.head(n_kernel));
      best.noise = NoiseModel{run.x(n_kernel)};
      best.nlml = run.value;
      best.grad_norm = run.grad.norm();
      found = true;
    }
  }
  if (!found) {
    throw AllRestartsFailed("optimize: every restart hit a non-positive-definite covariance");
  }
  return best;
}

}  // namespace gprcp
