#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "gprcp/gpr.hpp"
#include "gprcp/kernels.hpp"
#include "gprcp/linalg.hpp"

namespace gprcp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class MeasureKind {
  FullFit,      // |y_i - yhat_i|, GP fitted on the whole extended set
  LeaveOneOut,  // |y_i - yhat_(-i)|
  Normalized,   // |y_i - yhat_(-i)| / (loo variance_i)^(1/gamma)
};

struct Measure {
  MeasureKind kind = MeasureKind::Normalized;
  double gamma = 2.0;  // only used by Normalized; kInf allowed

  static Measure full_fit() { return {MeasureKind::FullFit, 1.0}; }
  static Measure leave_one_out() { return {MeasureKind::LeaveOneOut, kInf}; }
  static Measure normalized(double gamma);

  std::string describe() const;
};

// Nonconformity scores of the extended set as |a + b * y_tilde|; the last
// entry belongs to the test example.
struct AbVectors {
  Eigen::VectorXd a;
  Eigen::VectorXd b;
  Measure measure;

  Eigen::Index training_size() const { return a.size() - 1; }
  double score(Eigen::Index i, double y_tilde) const { return std::abs(a(i) + b(i) * y_tilde); }
};

enum class InversePath {
  Extend,     // O(l^2) Schur extension of the cached training inverse
  Recompute,  // factor the (l+1) x (l+1) matrix from scratch
};

// (K + sigma_n^2 I)^{-1} over the training inputs plus x_star.
SymmetricMatrix extended_inverse(const GprModel& model, const PointRef& x_star,
                                 InversePath path = InversePath::Extend);

// a, b from the extended inverse and training outputs. With normalize_signs
// every b_i is made non-negative by flipping (a_i, b_i).
AbVectors ab_from_inverse(const SymmetricMatrix& ext_inv, const Eigen::VectorXd& y_train,
                          double noise_variance, const Measure& measure,
                          bool normalize_signs = true);

AbVectors build_ab(const GprModel& model, const PointRef& x_star, const Measure& measure,
                   InversePath path = InversePath::Extend);

AbVectors build_ab(const InputMatrix& X, const Eigen::VectorXd& y, const PointRef& x_star,
                   const Kernel& kernel, const NoiseModel& noise, const Measure& measure);

// Values of y_tilde at which some training score meets the test score,
// sorted ascending with near-duplicates (abs. 1e-12) merged.
std::vector<double> critical_points(const AbVectors& ab);

// Sorted critical points y_(1..u) with membership counts. N[j] counts the
// sets S_i containing the open interval (y_(j), y_(j+1)) for j = 0..u with
// y_(0) = -inf and y_(u+1) = +inf; M[k] counts those containing points[k].
struct CriticalPointList {
  std::vector<double> points;
  std::vector<int> N;
  std::vector<int> M;
  Eigen::Index training_size = 0;

  std::size_t u() const { return points.size(); }
  double lower(std::size_t j) const { return j == 0 ? -kInf : points[j - 1]; }
  double upper(std::size_t j) const { return j == points.size() ? kInf : points[j]; }
};

CriticalPointList sweep(const AbVectors& ab, double dedup_tol = 1e-12);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double width() const { return hi - lo; }
  bool contains(double t) const { return lo <= t && t <= hi; }
  bool bounded() const { return std::isfinite(lo) && std::isfinite(hi); }
};

// Finite union of disjoint closed intervals plus isolated points, sorted.
struct PredictionRegion {
  std::vector<Interval> pieces;
  std::vector<double> isolated_points;
  double confidence = 0.0;

  bool empty() const { return pieces.empty() && isolated_points.empty(); }
  bool contains(double t) const;
  bool bounded() const;
  double total_length() const;
  std::size_t component_count() const { return pieces.size() + isolated_points.size(); }
  bool has_holes() const { return component_count() > 1; }
};

PredictionRegion region(const CriticalPointList& cp, double delta);
PredictionRegion region(const AbVectors& ab, double delta);

// p(y_tilde) = |{i : alpha_i >= alpha_test}| / (l + 1), kept as a fraction.
// Exact comparison: at a rounded critical point a tie may be missed, so use
// the sweep's M there.
struct PValue {
  std::size_t count = 0;
  std::size_t total = 1;
  double value() const { return static_cast<double>(count) / static_cast<double>(total); }
};

PValue p_value(const AbVectors& ab, double y_tilde);

// Smallest single closed interval containing the region.
PredictionRegion convex_hull(const PredictionRegion& r);

}  // namespace gprcp
