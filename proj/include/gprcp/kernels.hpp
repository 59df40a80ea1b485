#pragma once

#include <Eigen/Core>
#include <string>
#include <string_view>
#include <vector>

#include "gprcp/linalg.hpp"

namespace gprcp {

// One input per row.
using InputMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using PointRef = Eigen::Ref<const Eigen::VectorXd>;

enum class KernelFamily { SquaredExponential, RationalQuadratic, Matern32, Matern52, NeuralNetwork };

// Number of log-hyperparameters of each family:
//   SE, Matern: [log length_scale, log signal_sd]
//   RQ:         [log length_scale, log signal_sd, log alpha]
//   NN:         [log weight_sd, log signal_sd]
Eigen::Index hyper_count(KernelFamily family);

std::string_view to_string(KernelFamily family);
// Accepts "se", "rq", "nn", "matern32", "matern52" (case-insensitive).
KernelFamily parse_kernel_family(std::string_view name);

class Kernel {
 public:
  Kernel(KernelFamily family, Eigen::VectorXd log_hypers);

  static Kernel squared_exponential(double length_scale, double signal_sd);
  static Kernel rational_quadratic(double length_scale, double signal_sd, double alpha);
  static Kernel matern32(double length_scale, double signal_sd);
  static Kernel matern52(double length_scale, double signal_sd);
  static Kernel neural_network(double weight_sd, double signal_sd);

  KernelFamily family() const { return family_; }
  const Eigen::VectorXd& log_hypers() const { return log_hypers_; }
  Kernel with_log_hypers(Eigen::VectorXd log_hypers) const { return {family_, std::move(log_hypers)}; }

  double signal_variance() const;
  std::string describe() const;

 private:
  KernelFamily family_;
  Eigen::VectorXd log_hypers_;
};

struct NoiseModel {
  double log_sigma_n = 0.0;

  static NoiseModel from_sigma(double sigma_n);
  double sigma() const;
  double variance() const;
};

double kernel_eval(const Kernel& k, const PointRef& x, const PointRef& x2);

SymmetricMatrix kernel_matrix(const Kernel& k, const InputMatrix& X);

// Covariances between every row of X and x_star.
Eigen::VectorXd kernel_cross(const Kernel& k, const InputMatrix& X, const PointRef& x_star);

// dK/d(theta_j) for each log-hyperparameter theta_j, in log_hypers order.
std::vector<SymmetricMatrix> kernel_grad(const Kernel& k, const InputMatrix& X);

// Stacks a list of points into an InputMatrix.
InputMatrix stack_rows(const std::vector<Eigen::VectorXd>& points);

}  // namespace gprcp
