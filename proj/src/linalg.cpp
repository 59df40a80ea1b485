#include "gprcp/linalg.hpp"

#include <cmath>
#include <sstream>

#include "gprcp/errors.hpp"

namespace gprcp {

SymmetricMatrix::SymmetricMatrix(Eigen::MatrixXd entries, double symmetry_tol) {
  if (entries.rows() != entries.cols() || entries.rows() < 1) {
    std::ostringstream msg;
    msg << "symmetric matrix must be square and non-empty, got " << entries.rows() << "x"
        << entries.cols();
    throw DimensionMismatch(msg.str());
  }
  const double scale = std::max(1.0, entries.cwiseAbs().maxCoeff());
  const double asym = (entries - entries.transpose()).cwiseAbs().maxCoeff();
  if (!(asym <= symmetry_tol * scale)) {
    throw Error("matrix is not symmetric");
  }
  entries_ = 0.5 * (entries + entries.transpose());
}

SymmetricMatrix SymmetricMatrix::identity(Eigen::Index dim) {
  return SymmetricMatrix(Eigen::MatrixXd::Identity(dim, dim));
}

SymmetricMatrix SymmetricMatrix::symmetrize(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols() || m.rows() < 1) throw DimensionMismatch("symmetrize: not square");
  SymmetricMatrix out;
  out.entries_ = 0.5 * (m + m.transpose());
  return out;
}

double SymmetricMatrix::mean_diagonal() const { return entries_.diagonal().mean(); }

SymmetricMatrix SymmetricMatrix::plus_diagonal(double value) const {
  SymmetricMatrix out = *this;
  out.entries_.diagonal().array() += value;
  return out;
}

namespace {

bool try_factor(const Eigen::MatrixXd& m, double jitter, Eigen::LLT<Eigen::MatrixXd>& llt) {
  Eigen::MatrixXd shifted = m;
  shifted.diagonal().array() += jitter;
  llt.compute(shifted);
  if (llt.info() != Eigen::Success) return false;
  // LLT only rejects non-positive pivots; NaN/inf input slips through.
  return llt.matrixLLT().diagonal().allFinite();
}

}  // namespace

CholeskyFactor cholesky(const SymmetricMatrix& m, double jitter, const CholeskyOptions& options) {
  if (!(jitter >= 0.0)) throw Error("cholesky: jitter must be non-negative");
  Eigen::LLT<Eigen::MatrixXd> llt(m.dim());
  if (try_factor(m.dense(), jitter, llt)) return CholeskyFactor(std::move(llt), jitter);

  const double mean_diag = m.mean_diagonal();
  const double cap = options.cap_factor * mean_diag;
  double current = jitter > 0.0 ? jitter * 10.0 : options.start_factor * mean_diag;
  while (mean_diag > 0.0 && current > 0.0 && current <= cap * (1.0 + 1e-12)) {
    if (try_factor(m.dense(), current, llt)) return CholeskyFactor(std::move(llt), current);
    current *= 10.0;
  }
  std::ostringstream msg;
  msg << "matrix of dim " << m.dim() << " is not positive definite (jitter cap " << cap << ")";
  throw NotPositiveDefinite(msg.str());
}

Eigen::VectorXd solve(const CholeskyFactor& f, const Eigen::VectorXd& rhs) {
  if (rhs.size() != f.dim()) {
    std::ostringstream msg;
    msg << "solve: rhs length " << rhs.size() << " != factor dim " << f.dim();
    throw DimensionMismatch(msg.str());
  }
  return f.llt().solve(rhs);
}

SymmetricMatrix inverse(const CholeskyFactor& f) {
  Eigen::MatrixXd inv = f.llt().solve(Eigen::MatrixXd::Identity(f.dim(), f.dim()));
  return SymmetricMatrix::symmetrize(inv);
}

double log_det(const CholeskyFactor& f) {
  return 2.0 * f.llt().matrixLLT().diagonal().array().log().sum();
}

SymmetricMatrix extend_inverse(const SymmetricMatrix& inv, const Eigen::VectorXd& cross,
                               double corner, double schur_floor) {
  if (cross.size() != inv.dim()) {
    std::ostringstream msg;
    msg << "extend_inverse: cross length " << cross.size() << " != dim " << inv.dim();
    throw DimensionMismatch(msg.str());
  }
  const Eigen::Index l = inv.dim();
  const Eigen::VectorXd v = inv.dense() * cross;
  const double schur = corner - cross.dot(v);
  if (!(schur > schur_floor)) {
    std::ostringstream msg;
    msg << "extend_inverse: Schur complement " << schur << " <= floor " << schur_floor;
    throw SingularExtension(msg.str());
  }
  Eigen::MatrixXd out(l + 1, l + 1);
  out.topLeftCorner(l, l) = inv.dense();
  out.topLeftCorner(l, l).noalias() += (v / schur) * v.transpose();
  out.col(l).head(l) = -v / schur;
  out.row(l).head(l) = out.col(l).head(l).transpose();
  out(l, l) = 1.0 / schur;
  return SymmetricMatrix::symmetrize(out);
}

}  // namespace gprcp
