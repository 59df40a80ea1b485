#include "gprcp/conformal.hpp"

#include <algorithm>
#include <array>
#include <numeric>
#include <sstream>

#include "gprcp/errors.hpp"

namespace gprcp {

Measure Measure::normalized(double gamma) {
  if (!(gamma >= 1.0)) throw ConfigError("normalized measure requires gamma >= 1 or inf");
  return {MeasureKind::Normalized, gamma};
}

std::string Measure::describe() const {
  switch (kind) {
    case MeasureKind::FullFit: return "full-fit";
    case MeasureKind::LeaveOneOut: return "leave-one-out";
    case MeasureKind::Normalized: {
      std::ostringstream out;
      out << "normalized(gamma=";
      if (std::isinf(gamma)) out << "inf"; else out << gamma;
      out << ")";
      return out.str();
    }
  }
  return "?";
}

SymmetricMatrix extended_inverse(const GprModel& model, const PointRef& x_star, InversePath path) {
  const double corner = kernel_eval(model.kernel(), x_star, x_star) + model.noise().variance();
  if (path == InversePath::Extend) {
    return extend_inverse(model.inverse(), kernel_cross(model.kernel(), model.inputs(), x_star),
                          corner);
  }
  const Eigen::Index l = model.size();
  InputMatrix X(l + 1, model.inputs().cols());
  X.topRows(l) = model.inputs();
  X.row(l) = x_star.transpose();
  return inverse(cholesky(kernel_matrix(model.kernel(), X).plus_diagonal(model.noise().variance())));
}

AbVectors ab_from_inverse(const SymmetricMatrix& ext_inv, const Eigen::VectorXd& y_train,
                          double noise_variance, const Measure& measure, bool normalize_signs) {
  const Eigen::Index l = y_train.size();
  if (ext_inv.dim() != l + 1) {
    std::ostringstream msg;
    msg << "ab_from_inverse: inverse dim " << ext_inv.dim() << " != l + 1 = " << l + 1;
    throw DimensionMismatch(msg.str());
  }
  const auto& inv = ext_inv.dense();
  AbVectors ab;
  ab.measure = measure;
  // inv * (y_1..y_l, 0) and inv * (0..0, 1)
  ab.a = inv.leftCols(l) * y_train;
  ab.b = inv.col(l);

  switch (measure.kind) {
    case MeasureKind::FullFit:
      ab.a *= noise_variance;
      ab.b *= noise_variance;
      break;
    case MeasureKind::LeaveOneOut:
      ab.a.array() /= inv.diagonal().array();
      ab.b.array() /= inv.diagonal().array();
      break;
    case MeasureKind::Normalized: {
      if (!(measure.gamma >= 1.0)) throw ConfigError("normalized measure requires gamma >= 1");
      const double exponent = std::isinf(measure.gamma) ? 1.0 : 1.0 - 1.0 / measure.gamma;
      if (exponent != 0.0) {
        const Eigen::ArrayXd scale = inv.diagonal().array().pow(exponent);
        ab.a.array() /= scale;
        ab.b.array() /= scale;
      }
      break;
    }
  }
  if (normalize_signs) {
    for (Eigen::Index i = 0; i <= l; ++i) {
      if (ab.b(i) < 0.0) {
        ab.a(i) = -ab.a(i);
        ab.b(i) = -ab.b(i);
      }
    }
  }
  return ab;
}

AbVectors build_ab(const GprModel& model, const PointRef& x_star, const Measure& measure,
                   InversePath path) {
  return ab_from_inverse(extended_inverse(model, x_star, path), model.targets(),
                         model.noise().variance(), measure);
}

AbVectors build_ab(const InputMatrix& X, const Eigen::VectorXd& y, const PointRef& x_star,
                   const Kernel& kernel, const NoiseModel& noise, const Measure& measure) {
  return build_ab(fit(kernel, noise, X, y), x_star, measure);
}

namespace {

// Shape of S_i = {t : |a_i + b_i t| >= |a_test + b_test t|}.
enum class SetShape {
  Everything,
  Nothing,
  Between,   // [r1, r2]
  Outside,   // (-inf, r1] u [r2, inf)
  RayRight,  // [r1, inf)
  RayLeft,   // (-inf, r1]
};

struct SetInfo {
  SetShape shape = SetShape::Everything;
  std::array<double, 2> roots{};
  int n_roots = 0;
};

// Only the sign of (a_i + b_i t)^2 - (a + b t)^2 matters, and it is fixed
// between consecutive roots. Assumes b_i, b >= 0.
SetInfo classify(double ai, double bi, double a, double b) {
  SetInfo s;
  if (bi != b) {
    s.roots = {-(ai - a) / (bi - b), -(ai + a) / (bi + b)};
    if (s.roots[0] > s.roots[1]) std::swap(s.roots[0], s.roots[1]);
    s.n_roots = 2;
    s.shape = bi > b ? SetShape::Outside : SetShape::Between;
  } else if (b != 0.0 && ai != a) {
    s.roots[0] = -(ai + a) / (2.0 * bi);
    s.n_roots = 1;
    // Difference of squares is linear with slope 2b(a_i - a).
    s.shape = ai > a ? SetShape::RayRight : SetShape::RayLeft;
  } else if (b != 0.0) {
    s.shape = SetShape::Everything;
  } else {
    s.shape = std::abs(ai) >= std::abs(a) ? SetShape::Everything : SetShape::Nothing;
  }
  return s;
}

void check_ab(const AbVectors& ab) {
  if (ab.a.size() != ab.b.size() || ab.a.size() < 1) {
    throw DimensionMismatch("AbVectors: a and b must have equal, non-zero length");
  }
  if (!ab.a.allFinite() || !ab.b.allFinite()) throw Error("AbVectors: non-finite coefficients");
}

}  // namespace

std::vector<double> critical_points(const AbVectors& ab) {
  return sweep(ab).points;
}

CriticalPointList sweep(const AbVectors& ab, double dedup_tol) {
  check_ab(ab);
  const Eigen::Index l = ab.training_size();
  const double a_test = ab.a(l);
  const double b_test = ab.b(l);

  std::vector<SetInfo> sets(static_cast<std::size_t>(l));
  struct Root {
    double value;
    std::size_t owner;
    int slot;
  };
  std::vector<Root> roots;
  roots.reserve(2 * static_cast<std::size_t>(l));
  for (Eigen::Index i = 0; i < l; ++i) {
    auto& s = sets[static_cast<std::size_t>(i)];
    s = classify(ab.a(i), ab.b(i), a_test, b_test);
    for (int k = 0; k < s.n_roots; ++k) {
      if (std::isfinite(s.roots[k])) roots.push_back({s.roots[k], static_cast<std::size_t>(i), k});
    }
  }
  std::sort(roots.begin(), roots.end(),
            [](const Root& x, const Root& y) { return x.value < y.value; });

  // Group index of every root; -1 stands for -inf, `u` for +inf.
  std::vector<std::array<long, 2>> group(static_cast<std::size_t>(l), {0, 0});
  CriticalPointList cp;
  cp.training_size = l;
  for (const Root& r : roots) {
    if (cp.points.empty() || r.value - cp.points.back() > dedup_tol) cp.points.push_back(r.value);
    group[r.owner][static_cast<std::size_t>(r.slot)] = static_cast<long>(cp.points.size()) - 1;
  }
  const long u = static_cast<long>(cp.points.size());
  for (std::size_t i = 0; i < sets.size(); ++i) {
    for (int k = 0; k < sets[i].n_roots; ++k) {
      const double v = sets[i].roots[k];
      if (!std::isfinite(v)) group[i][static_cast<std::size_t>(k)] = v < 0 ? -1 : u;
    }
  }

  // Difference arrays over intervals 0..u and points 0..u-1.
  std::vector<int> dn(static_cast<std::size_t>(u) + 2, 0);
  std::vector<int> dm(static_cast<std::size_t>(u) + 1, 0);
  auto add_intervals = [&](long lo, long hi) {
    lo = std::max(lo, 0L);
    hi = std::min(hi, u);
    if (lo > hi) return;
    ++dn[static_cast<std::size_t>(lo)];
    --dn[static_cast<std::size_t>(hi + 1)];
  };
  auto add_points = [&](long lo, long hi) {
    lo = std::max(lo, 0L);
    hi = std::min(hi, u - 1);
    if (lo > hi) return;
    ++dm[static_cast<std::size_t>(lo)];
    --dm[static_cast<std::size_t>(hi + 1)];
  };

  // Interval j lies between points j-1 and j (0-based point indices).
  for (std::size_t i = 0; i < sets.size(); ++i) {
    const long g1 = group[i][0];
    const long g2 = group[i][1];
    switch (sets[i].shape) {
      case SetShape::Everything:
        add_intervals(0, u);
        add_points(0, u - 1);
        break;
      case SetShape::Nothing:
        break;
      case SetShape::Between:
        add_intervals(g1 + 1, g2);
        add_points(g1, g2);
        break;
      case SetShape::Outside:
        add_intervals(0, g1);
        add_points(0, g1);
        if (g2 > g1) {
          add_intervals(g2 + 1, u);
          add_points(g2, u - 1);
        } else {
          // Touching roots: the two rays share the point.
          add_intervals(g1 + 1, u);
          add_points(g1 + 1, u - 1);
        }
        break;
      case SetShape::RayRight:
        add_intervals(g1 + 1, u);
        add_points(g1, u - 1);
        break;
      case SetShape::RayLeft:
        add_intervals(0, g1);
        add_points(0, g1);
        break;
    }
  }
  // The test example's own set is the whole line.
  add_intervals(0, u);
  add_points(0, u - 1);

  cp.N.resize(static_cast<std::size_t>(u) + 1);
  cp.M.resize(static_cast<std::size_t>(u));
  std::partial_sum(dn.begin(), dn.end() - 1, cp.N.begin());
  std::partial_sum(dm.begin(), dm.end() - 1, cp.M.begin());
  return cp;
}

bool PredictionRegion::contains(double t) const {
  for (const auto& p : pieces) {
    if (p.contains(t)) return true;
  }
  return std::find(isolated_points.begin(), isolated_points.end(), t) != isolated_points.end();
}

bool PredictionRegion::bounded() const {
  return std::all_of(pieces.begin(), pieces.end(), [](const Interval& p) { return p.bounded(); });
}

double PredictionRegion::total_length() const {
  double total = 0.0;
  for (const auto& p : pieces) total += p.width();
  return total;
}

PredictionRegion region(const CriticalPointList& cp, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("significance level must lie in (0, 1)");
  const double threshold = delta * static_cast<double>(cp.training_size + 1);
  auto in_interval = [&](std::size_t j) { return static_cast<double>(cp.N[j]) > threshold; };
  auto in_point = [&](std::size_t k) { return static_cast<double>(cp.M[k]) > threshold; };

  PredictionRegion out;
  out.confidence = 1.0 - delta;
  const std::size_t u = cp.u();
  bool open = false;
  double start = 0.0;
  for (std::size_t j = 0; j <= u; ++j) {
    if (in_interval(j)) {
      if (!open) {
        open = true;
        start = cp.lower(j);
      }
      // Continue through point j only if it and the next interval are in.
      if (j < u && in_point(j) && in_interval(j + 1)) continue;
      out.pieces.push_back({start, cp.upper(j)});
      open = false;
    } else if (j < u && in_point(j) && !in_interval(j + 1)) {
      out.isolated_points.push_back(cp.points[j]);
    }
  }
  return out;
}

PredictionRegion region(const AbVectors& ab, double delta) { return region(sweep(ab), delta); }

PValue p_value(const AbVectors& ab, double y_tilde) {
  check_ab(ab);
  const Eigen::Index l = ab.training_size();
  const double test_score = ab.score(l, y_tilde);
  PValue p;
  p.total = static_cast<std::size_t>(l) + 1;
  for (Eigen::Index i = 0; i <= l; ++i) {
    if (ab.score(i, y_tilde) >= test_score) ++p.count;
  }
  return p;
}

PredictionRegion convex_hull(const PredictionRegion& r) {
  if (r.empty()) throw EmptyRegion("convex_hull: region is empty");
  double lo = kInf;
  double hi = -kInf;
  for (const auto& p : r.pieces) {
    lo = std::min(lo, p.lo);
    hi = std::max(hi, p.hi);
  }
  for (double t : r.isolated_points) {
    lo = std::min(lo, t);
    hi = std::max(hi, t);
  }
  PredictionRegion out;
  out.confidence = r.confidence;
  out.pieces.push_back({lo, hi});
  return out;
}

}  // namespace gprcp
