#include "gprcp/gpr.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "gprcp/errors.hpp"
#include "gprcp/log.hpp"

namespace gprcp {

namespace {

void check_training_set(const InputMatrix& X, const Eigen::VectorXd& y) {
  if (X.rows() != y.size()) {
    std::ostringstream msg;
    msg << "training set has " << X.rows() << " inputs but " << y.size() << " outputs";
    throw DimensionMismatch(msg.str());
  }
  if (y.size() < 1) throw DimensionMismatch("training set is empty");
}

SymmetricMatrix noisy_covariance(const Kernel& kernel, const NoiseModel& noise, const InputMatrix& X) {
  return kernel_matrix(kernel, X).plus_diagonal(noise.variance());
}

}  // namespace

GprModel::GprModel(Kernel kernel, NoiseModel noise, InputMatrix X, Eigen::VectorXd y,
                   CholeskyFactor factor, SymmetricMatrix inv, Eigen::VectorXd alpha)
    : kernel_(std::move(kernel)),
      noise_(noise),
      X_(std::move(X)),
      y_(std::move(y)),
      factor_(std::move(factor)),
      inv_(std::move(inv)),
      alpha_(std::move(alpha)) {}

GprModel fit(const Kernel& kernel, const NoiseModel& noise, const InputMatrix& X,
             const Eigen::VectorXd& y, const CholeskyOptions& options) {
  check_training_set(X, y);
  CholeskyFactor factor = cholesky(noisy_covariance(kernel, noise, X), 0.0, options);
  if (factor.jitter() > 0.0) {
    std::ostringstream msg;
    msg << "fit: added jitter " << factor.jitter() << " to K + sigma_n^2 I";
    log::debug(msg.str());
  }
  SymmetricMatrix inv = inverse(factor);
  Eigen::VectorXd alpha = solve(factor, y);
  return GprModel(kernel, noise, X, y, std::move(factor), std::move(inv), std::move(alpha));
}

PredictiveGaussian predict(const GprModel& m, const PointRef& x_star, bool with_noise) {
  const Eigen::VectorXd k_star = kernel_cross(m.kernel(), m.inputs(), x_star);
  PredictiveGaussian out;
  out.mean = k_star.dot(m.alpha());
  out.variance = kernel_eval(m.kernel(), x_star, x_star) - k_star.dot(m.inverse().dense() * k_star);
  if (out.variance < 0.0) {
    if (out.variance < -1e-10) {
      std::ostringstream msg;
      msg << "predict: clamped negative posterior variance " << out.variance;
      log::warn(msg.str());
    }
    out.variance = 0.0;
  }
  if (with_noise) out.variance += m.noise().variance();
  out.includes_noise = with_noise;
  return out;
}

std::vector<PredictiveGaussian> loo(const GprModel& m) {
  const auto& inv = m.inverse().dense();
  std::vector<PredictiveGaussian> out(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    const double d = inv(i, i);
    out[static_cast<std::size_t>(i)] = {m.targets()(i) - m.alpha()(i) / d, 1.0 / d, true};
  }
  return out;
}

double nlml(const Kernel& kernel, const NoiseModel& noise, const InputMatrix& X,
            const Eigen::VectorXd& y) {
  check_training_set(X, y);
  const CholeskyFactor f = cholesky(noisy_covariance(kernel, noise, X));
  const Eigen::VectorXd alpha = solve(f, y);
  const double l = static_cast<double>(y.size());
  return 0.5 * y.dot(alpha) + 0.5 * log_det(f) + 0.5 * l * std::log(2.0 * std::numbers::pi);
}

NlmlEvaluation nlml_with_grad(const Kernel& kernel, const NoiseModel& noise,
                              const InputMatrix& X, const Eigen::VectorXd& y) {
  const GprModel m = fit(kernel, noise, X, y);
  const double l = static_cast<double>(y.size());
  NlmlEvaluation out;
  out.value = 0.5 * y.dot(m.alpha()) + 0.5 * log_det(m.factor()) +
              0.5 * l * std::log(2.0 * std::numbers::pi);

  // dNLML/dtheta = 0.5 tr((C^{-1} - alpha alpha^T) dC/dtheta)
  const Eigen::MatrixXd W = m.inverse().dense() - m.alpha() * m.alpha().transpose();
  const auto grads = kernel_grad(kernel, X);
  out.grad.resize(static_cast<Eigen::Index>(grads.size()) + 1);
  for (std::size_t j = 0; j < grads.size(); ++j) {
    out.grad(static_cast<Eigen::Index>(j)) = 0.5 * W.cwiseProduct(grads[j].dense()).sum();
  }
  out.grad(out.grad.size() - 1) = noise.variance() * W.trace();
  return out;
}

Eigen::VectorXd nlml_grad(const Kernel& kernel, const NoiseModel& noise, const InputMatrix& X,
                          const Eigen::VectorXd& y) {
  return nlml_with_grad(kernel, noise, X, y).grad;
}

}  // namespace gprcp
