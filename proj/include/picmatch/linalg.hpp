#pragma once

#include <Eigen/Dense>
#include <limits>

namespace picmatch {

// Frobenius inner product <M, N> = tr(M'N), computed elementwise. For the
// symmetric inputs used throughout this is O(p^2) with no matrix product.
inline double fip(const Eigen::MatrixXd& m, const Eigen::MatrixXd& n) {
  return (m.array() * n.array()).sum();
}

// Largest eigenvalue of a symmetric PSD matrix (its operator norm).
inline double operator_norm_sym(const Eigen::MatrixXd& m) {
  if (m.rows() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().cwiseAbs().maxCoeff();
}

// Clamp eigenvalues at max(0, lambda); returns a symmetric PSD matrix.
inline Eigen::MatrixXd psd_clamp(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  Eigen::VectorXd ev = eig.eigenvalues().cwiseMax(0.0);
  return eig.eigenvectors() * ev.asDiagonal() * eig.eigenvectors().transpose();
}

// Symmetric square root with the same eigenvalue clamp.
inline Eigen::MatrixXd sym_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  Eigen::VectorXd ev = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * ev.asDiagonal() * eig.eigenvectors().transpose();
}

// Spectral condition number of a symmetric matrix, by |eigenvalue|.
inline double sym_condition_number(const Eigen::MatrixXd& m) {
  if (m.rows() == 0) return 1.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m, Eigen::EigenvaluesOnly);
  const Eigen::VectorXd abs_ev = eig.eigenvalues().cwiseAbs();
  const double lo = abs_ev.minCoeff();
  const double hi = abs_ev.maxCoeff();
  if (lo <= 0.0) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

}  // namespace picmatch
