#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <utility>

namespace gprcp {

// Dense symmetric matrix. Construction checks squareness and symmetry and
// then stores the exactly symmetrized entries.
class SymmetricMatrix {
 public:
  SymmetricMatrix() = default;
  explicit SymmetricMatrix(Eigen::MatrixXd entries, double symmetry_tol = 1e-10);

  static SymmetricMatrix identity(Eigen::Index dim);
  // Averages m with its transpose; no symmetry check.
  static SymmetricMatrix symmetrize(const Eigen::MatrixXd& m);

  Eigen::Index dim() const { return entries_.rows(); }
  double operator()(Eigen::Index i, Eigen::Index j) const { return entries_(i, j); }
  const Eigen::MatrixXd& dense() const { return entries_; }
  double mean_diagonal() const;

  SymmetricMatrix plus_diagonal(double value) const;

 private:
  Eigen::MatrixXd entries_;
};

struct CholeskyOptions {
  // Jitter is escalated x10 per retry until it would exceed
  // cap_factor * mean(diag(m)).
  double cap_factor = 1e-4;
  // First non-zero jitter tried, relative to mean(diag(m)).
  double start_factor = 1e-12;
};

// Lower-triangular factor L of (m + jitter * I).
class CholeskyFactor {
 public:
  CholeskyFactor(Eigen::LLT<Eigen::MatrixXd> llt, double jitter)
      : llt_(std::move(llt)), jitter_(jitter) {}

  Eigen::Index dim() const { return llt_.rows(); }
  Eigen::MatrixXd lower() const { return llt_.matrixL(); }
  // Jitter that was actually added to the diagonal.
  double jitter() const { return jitter_; }
  const Eigen::LLT<Eigen::MatrixXd>& llt() const { return llt_; }

 private:
  Eigen::LLT<Eigen::MatrixXd> llt_;
  double jitter_ = 0.0;
};

CholeskyFactor cholesky(const SymmetricMatrix& m, double jitter = 0.0,
                        const CholeskyOptions& options = {});

Eigen::VectorXd solve(const CholeskyFactor& f, const Eigen::VectorXd& rhs);

SymmetricMatrix inverse(const CholeskyFactor& f);

double log_det(const CholeskyFactor& f);

// Inverse of [[A, cross], [cross^T, corner]] given inv = A^{-1}, via the
// Schur complement s = corner - cross^T inv cross. O(l^2).
SymmetricMatrix extend_inverse(const SymmetricMatrix& inv, const Eigen::VectorXd& cross,
                               double corner, double schur_floor = 1e-12);

}  // namespace gprcp
