#include "gprcp/kernels.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <numbers>
#include <sstream>

#include "gprcp/errors.hpp"

namespace gprcp {

Eigen::Index hyper_count(KernelFamily family) {
  return family == KernelFamily::RationalQuadratic ? 3 : 2;
}

std::string_view to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::SquaredExponential: return "se";
    case KernelFamily::RationalQuadratic: return "rq";
    case KernelFamily::Matern32: return "matern32";
    case KernelFamily::Matern52: return "matern52";
    case KernelFamily::NeuralNetwork: return "nn";
  }
  return "?";
}

KernelFamily parse_kernel_family(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "se") return KernelFamily::SquaredExponential;
  if (lower == "rq") return KernelFamily::RationalQuadratic;
  if (lower == "matern32") return KernelFamily::Matern32;
  if (lower == "matern52") return KernelFamily::Matern52;
  if (lower == "nn") return KernelFamily::NeuralNetwork;
  throw ConfigError("unknown kernel family '" + std::string(name) + "'");
}

Kernel::Kernel(KernelFamily family, Eigen::VectorXd log_hypers)
    : family_(family), log_hypers_(std::move(log_hypers)) {
  if (log_hypers_.size() != hyper_count(family_)) {
    std::ostringstream msg;
    msg << to_string(family_) << " kernel takes " << hyper_count(family_)
        << " log-hyperparameters, got " << log_hypers_.size();
    throw DimensionMismatch(msg.str());
  }
  if (!log_hypers_.allFinite()) throw Error("kernel log-hyperparameters must be finite");
}

Kernel Kernel::squared_exponential(double length_scale, double signal_sd) {
  return {KernelFamily::SquaredExponential,
          Eigen::Vector2d(std::log(length_scale), std::log(signal_sd))};
}

Kernel Kernel::rational_quadratic(double length_scale, double signal_sd, double alpha) {
  return {KernelFamily::RationalQuadratic,
          Eigen::Vector3d(std::log(length_scale), std::log(signal_sd), std::log(alpha))};
}

Kernel Kernel::matern32(double length_scale, double signal_sd) {
  return {KernelFamily::Matern32, Eigen::Vector2d(std::log(length_scale), std::log(signal_sd))};
}

Kernel Kernel::matern52(double length_scale, double signal_sd) {
  return {KernelFamily::Matern52, Eigen::Vector2d(std::log(length_scale), std::log(signal_sd))};
}

Kernel Kernel::neural_network(double weight_sd, double signal_sd) {
  return {KernelFamily::NeuralNetwork, Eigen::Vector2d(std::log(weight_sd), std::log(signal_sd))};
}

double Kernel::signal_variance() const { return std::exp(2.0 * log_hypers_(1)); }

std::string Kernel::describe() const {
  std::ostringstream out;
  out << to_string(family_) << "(";
  for (Eigen::Index j = 0; j < log_hypers_.size(); ++j) {
    if (j) out << ", ";
    out << std::exp(log_hypers_(j));
  }
  out << ")";
  return out.str();
}

NoiseModel NoiseModel::from_sigma(double sigma_n) {
  if (!(sigma_n > 0.0)) throw Error("noise standard deviation must be positive");
  return {std::log(sigma_n)};
}

double NoiseModel::sigma() const { return std::exp(log_sigma_n); }
double NoiseModel::variance() const { return std::exp(2.0 * log_sigma_n); }

namespace {

constexpr double kSqrt3 = 1.7320508075688772;
constexpr double kSqrt5 = 2.23606797749979;

// Value and gradient with respect to the log-hyperparameters for one pair.
struct PairEval {
  double value = 0.0;
  std::array<double, 3> grad{};
};

template <bool WithGrad>
PairEval eval_pair(const Kernel& k, const PointRef& x, const PointRef& x2) {
  const auto& h = k.log_hypers();
  const double sf2 = std::exp(2.0 * h(1));
  PairEval out;
  switch (k.family()) {
    case KernelFamily::SquaredExponential: {
      const double ell = std::exp(h(0));
      const double q = (x - x2).squaredNorm() / (ell * ell);
      out.value = sf2 * std::exp(-0.5 * q);
      if constexpr (WithGrad) {
        out.grad[0] = out.value * q;
        out.grad[1] = 2.0 * out.value;
      }
      break;
    }
    case KernelFamily::RationalQuadratic: {
      const double ell = std::exp(h(0));
      const double alpha = std::exp(h(2));
      const double q = (x - x2).squaredNorm() / (ell * ell);
      const double base = 1.0 + q / (2.0 * alpha);
      out.value = sf2 * std::pow(base, -alpha);
      if constexpr (WithGrad) {
        out.grad[0] = out.value * q / base;
        out.grad[1] = 2.0 * out.value;
        out.grad[2] = out.value * alpha * (-std::log(base) + q / (2.0 * alpha * base));
      }
      break;
    }
    case KernelFamily::Matern32: {
      const double s = kSqrt3 * (x - x2).norm() / std::exp(h(0));
      const double e = std::exp(-s);
      out.value = sf2 * (1.0 + s) * e;
      if constexpr (WithGrad) {
        out.grad[0] = sf2 * s * s * e;
        out.grad[1] = 2.0 * out.value;
      }
      break;
    }
    case KernelFamily::Matern52: {
      const double s = kSqrt5 * (x - x2).norm() / std::exp(h(0));
      const double e = std::exp(-s);
      out.value = sf2 * (1.0 + s + s * s / 3.0) * e;
      if constexpr (WithGrad) {
        out.grad[0] = sf2 * s * s * (1.0 + s) / 3.0 * e;
        out.grad[1] = 2.0 * out.value;
      }
      break;
    }
    case KernelFamily::NeuralNetwork: {
      // Inputs augmented with a leading 1, isotropic weight variance sw2.
      const double sw2 = std::exp(2.0 * h(0));
      const double u = 1.0 + x.dot(x2);
      const double p = 1.0 + x.squaredNorm();
      const double q = 1.0 + x2.squaredNorm();
      const double dp = 1.0 + 2.0 * sw2 * p;
      const double dq = 1.0 + 2.0 * sw2 * q;
      const double z = 2.0 * sw2 * u / std::sqrt(dp * dq);
      const double scale = sf2 * 2.0 / std::numbers::pi;
      out.value = scale * std::asin(z);
      if constexpr (WithGrad) {
        const double dz = z * (2.0 - 2.0 * sw2 * p / dp - 2.0 * sw2 * q / dq);
        out.grad[0] = scale * dz / std::sqrt(1.0 - z * z);
        out.grad[1] = 2.0 * out.value;
      }
      break;
    }
  }
  return out;
}

void check_dims(Eigen::Index a, Eigen::Index b, const char* where) {
  if (a != b) {
    std::ostringstream msg;
    msg << where << ": input dimension " << a << " != " << b;
    throw DimensionMismatch(msg.str());
  }
}

}  // namespace

double kernel_eval(const Kernel& k, const PointRef& x, const PointRef& x2) {
  check_dims(x.size(), x2.size(), "kernel_eval");
  return eval_pair<false>(k, x, x2).value;
}

SymmetricMatrix kernel_matrix(const Kernel& k, const InputMatrix& X) {
  if (X.rows() < 1) throw DimensionMismatch("kernel_matrix: no inputs");
  const Eigen::Index n = X.rows();
  Eigen::MatrixXd K(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j; i < n; ++i) {
      K(i, j) = eval_pair<false>(k, X.row(i).transpose(), X.row(j).transpose()).value;
      K(j, i) = K(i, j);
    }
  }
  return SymmetricMatrix(std::move(K));
}

Eigen::VectorXd kernel_cross(const Kernel& k, const InputMatrix& X, const PointRef& x_star) {
  check_dims(X.cols(), x_star.size(), "kernel_cross");
  Eigen::VectorXd out(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    out(i) = eval_pair<false>(k, X.row(i).transpose(), x_star).value;
  }
  return out;
}

std::vector<SymmetricMatrix> kernel_grad(const Kernel& k, const InputMatrix& X) {
  if (X.rows() < 1) throw DimensionMismatch("kernel_grad: no inputs");
  const Eigen::Index n = X.rows();
  const Eigen::Index m = hyper_count(k.family());
  std::vector<Eigen::MatrixXd> grads(static_cast<std::size_t>(m), Eigen::MatrixXd(n, n));
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j; i < n; ++i) {
      const PairEval e = eval_pair<true>(k, X.row(i).transpose(), X.row(j).transpose());
      for (Eigen::Index t = 0; t < m; ++t) {
        grads[t](i, j) = e.grad[t];
        grads[t](j, i) = e.grad[t];
      }
    }
  }
  std::vector<SymmetricMatrix> out;
  out.reserve(grads.size());
  for (auto& g : grads) out.push_back(SymmetricMatrix::symmetrize(g));
  return out;
}

InputMatrix stack_rows(const std::vector<Eigen::VectorXd>& points) {
  if (points.empty()) return InputMatrix(0, 0);
  InputMatrix X(static_cast<Eigen::Index>(points.size()), points.front().size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    check_dims(points[i].size(), X.cols(), "stack_rows");
    X.row(static_cast<Eigen::Index>(i)) = points[i].transpose();
  }
  return X;
}

}  // namespace gprcp
