#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "picmatch/rng.hpp"
#include "picmatch/sample.hpp"

namespace picmatch::testutil {

inline double expit(double eta) {
  if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

// Gaussian covariates with a logistic treatment on the index x beta.
inline Sample gaussian_logit_sample(int n, int p, std::uint64_t seed,
                                    const Eigen::VectorXd& beta,
                                    double intercept = 0.0) {
  SplitMix64 rng(seed);
  Sample s;
  s.x.resize(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) s.x(i, j) = rng.normal();
  s.z.resize(n);
  for (int i = 0; i < n; ++i)
    s.z[i] = rng.bernoulli(expit(intercept + s.x.row(i).dot(beta))) ? 1.0 : 0.0;
  if (s.z.sum() == 0.0) s.z[0] = 1.0;
  if (s.z.sum() == double(n)) s.z[0] = 0.0;
  return s;
}

// Gaussian covariates with a linear outcome y = x gamma + noise.
inline Sample gaussian_linear_sample(int n, int p, std::uint64_t seed,
                                     const Eigen::VectorXd& gamma,
                                     double noise_sd = 1.0) {
  SplitMix64 rng(seed);
  Sample s;
  s.x.resize(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) s.x(i, j) = rng.normal();
  s.z.resize(n);
  for (int i = 0; i < n; ++i) s.z[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
  if (s.z.sum() == 0.0) s.z[0] = 1.0;
  if (s.z.sum() == double(n)) s.z[0] = 0.0;
  Eigen::VectorXd y = s.x * gamma;
  for (int i = 0; i < n; ++i) y[i] += noise_sd * rng.normal();
  s.y = y;
  return s;
}

// Reference logistic solver: iteratively reweighted least squares on the
// design [1, x], written independently of the library's Newton loop.
inline Eigen::VectorXd irls_logistic(const Eigen::MatrixXd& x,
                                     const Eigen::VectorXd& z,
                                     int max_iter = 100, double tol = 1e-12) {
  const int n = static_cast<int>(x.rows());
  const int p = static_cast<int>(x.cols());
  Eigen::MatrixXd d(n, p + 1);
  d.col(0).setOnes();
  d.rightCols(p) = x;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p + 1);
  for (int it = 0; it < max_iter; ++it) {
    const Eigen::VectorXd eta = d * beta;
    Eigen::VectorXd mu(n), w(n);
    for (int i = 0; i < n; ++i) {
      mu[i] = expit(eta[i]);
      w[i] = std::max(mu[i] * (1.0 - mu[i]), 1e-12);
    }
    const Eigen::VectorXd working = eta.array() + (z - mu).array() / w.array();
    const Eigen::MatrixXd dw = w.asDiagonal() * d;
    const Eigen::VectorXd next =
        (d.transpose() * dw).ldlt().solve(d.transpose() * (w.asDiagonal() * working));
    const double delta = (next - beta).norm();
    beta = next;
    if (delta < tol) break;
  }
  return beta;
}

}  // namespace picmatch::testutil
