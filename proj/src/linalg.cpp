#include "icl/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <vector>

namespace icl {

namespace {

// Sort an eigensystem into nonincreasing eigenvalue order.
void sort_descending(Eigen::VectorXd& values, Eigen::MatrixXd& vectors) {
  const Eigen::Index n = values.size();
  std::vector<Eigen::Index> order(n);
  for (Eigen::Index i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return values[a] > values[b]; });
  Eigen::VectorXd sv(n);
  Eigen::MatrixXd sq(vectors.rows(), n);
  for (Eigen::Index i = 0; i < n; ++i) {
    sv[i] = values[order[i]];
    sq.col(i) = vectors.col(order[i]);
  }
  values = std::move(sv);
  vectors = std::move(sq);
}

}  // namespace

PsdMatrix PsdMatrix::from_decomposition(const Eigen::MatrixXd& eigenvectors,
                                        const Eigen::VectorXd& eigenvalues) {
  PsdMatrix out;
  Eigen::VectorXd values = eigenvalues;
  Eigen::MatrixXd vectors = eigenvectors;
  sort_descending(values, vectors);
  const double lmax = values.size() ? std::max(values[0], 0.0) : 0.0;
  const double cut = kRankEps * lmax;
  int rank = 0;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (values[i] > cut) {
      ++rank;
    } else {
      values[i] = 0.0;
    }
  }
  out.decomp_ = SpectralDecomposition{values, vectors, rank};
  out.mat_ = vectors * values.asDiagonal() * vectors.transpose();
  out.mat_ = 0.5 * (out.mat_ + out.mat_.transpose().eval());
  return out;
}

PsdMatrix::PsdMatrix(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols() || a.rows() < 1) {
    throw DimensionError("PsdMatrix: input must be square and non-empty");
  }
  const double scale = std::max(1.0, a.norm());
  if ((a - a.transpose()).norm() > 1e-12 * scale) {
    throw DomainError("PsdMatrix: input is not symmetric within 1e-12 relative tolerance");
  }
  const Eigen::MatrixXd sym = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  if (es.info() != Eigen::Success) {
    throw DomainError("PsdMatrix: eigendecomposition failed");
  }
  Eigen::VectorXd values = es.eigenvalues();
  const double lmax = std::max(values.maxCoeff(), 0.0);
  if (values.minCoeff() < -kRankEps * std::max(lmax, 1e-300)) {
    throw DomainError("PsdMatrix: input has a negative eigenvalue beyond the PSD tolerance");
  }
  *this = from_decomposition(es.eigenvectors(), values);
}

PsdMatrix PsdMatrix::identity(int dim) {
  return PsdMatrix(Eigen::MatrixXd::Identity(dim, dim));
}

PsdMatrix PsdMatrix::zero(int dim) { return PsdMatrix(Eigen::MatrixXd::Zero(dim, dim)); }

double PsdMatrix::min_positive_eigenvalue() const {
  if (decomp_.rank == 0) {
    throw DomainError("min_positive_eigenvalue: matrix has no positive eigenvalue");
  }
  return decomp_.eigenvalues[decomp_.rank - 1];
}

PsdMatrix PsdMatrix::principal_sqrt() const {
  return from_decomposition(decomp_.eigenvectors, decomp_.eigenvalues.cwiseSqrt());
}

PsdMatrix PsdMatrix::pseudo_inverse() const {
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(decomp_.eigenvalues.size());
  for (int i = 0; i < decomp_.rank; ++i) inv[i] = 1.0 / decomp_.eigenvalues[i];
  return from_decomposition(decomp_.eigenvectors, inv);
}

Eigen::VectorXd project_image_vec(const PsdMatrix& h, const Eigen::VectorXd& v) {
  if (v.size() != h.dim()) {
    throw DimensionError("project_image_vec: vector length does not match matrix dimension");
  }
  const Eigen::MatrixXd q = h.image_basis();
  return q * (q.transpose() * v);
}

Eigen::VectorXd project_null_vec(const PsdMatrix& h, const Eigen::VectorXd& v) {
  return v - project_image_vec(h, v);
}

Eigen::MatrixXd project_image_op(const PsdMatrix& h, const Eigen::MatrixXd& z) {
  if (z.rows() != h.dim() || z.cols() != h.dim()) {
    throw DimensionError("project_image_op: operand shape does not match matrix dimension");
  }
  const Eigen::MatrixXd q = h.image_basis();
  return q * (q.transpose() * z * q) * q.transpose();
}

Eigen::MatrixXd project_null_op(const PsdMatrix& h, const Eigen::MatrixXd& z) {
  return z - project_image_op(h, z);
}

}  // namespace icl
