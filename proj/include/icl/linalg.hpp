#pragma once

#include <Eigen/Core>

#include "icl/errors.hpp"

namespace icl {

/// Eigenvalue factorization of a PSD matrix. Eigenvalues are nonincreasing,
/// eigenvectors are the matching orthonormal columns, and rank counts the
/// eigenvalues above the relative cutoff used at construction.
struct SpectralDecomposition {
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd eigenvectors;
  int rank = 0;
};

/// Dense symmetric positive semi-definite matrix with a single cached
/// eigendecomposition from which square roots, pseudo-inverses and
/// image/null-space projections are all derived. This keeps rank decisions
/// consistent across every operation on the same matrix.
///
/// Construction symmetrizes the input as (A + A^T)/2, rejects inputs that are
/// asymmetric beyond 1e-12 relative Frobenius error, and clamps eigenvalues
/// below eps_rank * lambda_max to exactly zero. Eigenvalues more negative than
/// the clamp window are a domain error. Instances are immutable.
class PsdMatrix {
 public:
  /// Relative rank cutoff: eigenvalues below eps_rank * lambda_max are zero.
  static constexpr double kRankEps = 1e-10;

  explicit PsdMatrix(const Eigen::MatrixXd& a);

  static PsdMatrix identity(int dim);
  static PsdMatrix zero(int dim);

  int dim() const { return static_cast<int>(mat_.rows()); }
  int rank() const { return decomp_.rank; }
  const Eigen::MatrixXd& matrix() const { return mat_; }
  const SpectralDecomposition& decomposition() const { return decomp_; }

  double trace() const { return mat_.trace(); }
  double max_eigenvalue() const { return decomp_.eigenvalues.size() ? decomp_.eigenvalues[0] : 0.0; }

  /// Smallest eigenvalue above the rank cutoff. Throws DomainError when the
  /// matrix has no positive eigenvalue (i.e. it is zero).
  double min_positive_eigenvalue() const;

  /// Unique PSD B with B*B = this, sharing this matrix's eigenvectors.
  PsdMatrix principal_sqrt() const;

  /// Moore-Penrose pseudo-inverse; eigenvalues below the cutoff invert to 0.
  PsdMatrix pseudo_inverse() const;

  /// Orthonormal basis of the image (first `rank` eigenvectors).
  Eigen::MatrixXd image_basis() const { return decomp_.eigenvectors.leftCols(decomp_.rank); }

 private:
  PsdMatrix() = default;
  static PsdMatrix from_decomposition(const Eigen::MatrixXd& eigenvectors,
                                      const Eigen::VectorXd& eigenvalues);

  Eigen::MatrixXd mat_;
  SpectralDecomposition decomp_;
};

/// P_{Im(H)}(v) = H H^+ v.
Eigen::VectorXd project_image_vec(const PsdMatrix& h, const Eigen::VectorXd& v);

/// P_{Null(H)}(v) = v - H H^+ v.
Eigen::VectorXd project_null_vec(const PsdMatrix& h, const Eigen::VectorXd& v);

/// Projection onto the image of the Kronecker operator Z -> H Z H:
/// P_Z(Z) = H H^+ Z H^+ H.
Eigen::MatrixXd project_image_op(const PsdMatrix& h, const Eigen::MatrixXd& z);

/// Complement of project_image_op.
Eigen::MatrixXd project_null_op(const PsdMatrix& h, const Eigen::MatrixXd& z);

}  // namespace icl
