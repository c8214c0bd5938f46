#pragma once

#include <Eigen/Dense>
#include <optional>

#include "picmatch/index_model.hpp"
#include "picmatch/sample.hpp"

namespace picmatch {

/// S, the index spread s^2(x beta) = beta' S beta, and the projection
/// S-perp-beta of S onto the orthocomplement of the index direction.
struct CovarianceSummary {
  Eigen::MatrixXd S;       // (n-L)^-1 x'x on centered x
  double s2_index = 0.0;   // beta' S beta
  Eigen::MatrixXd S_perp;  // S - s^-2 S beta beta' S (S itself when degenerate)
  bool index_degenerate = false;
};

enum class PolicyKind {
  picse_fixed,
  picse_narrowed,
  hard66,
  rr02,
  euclidean,
  none,
};

struct CaliperPolicy {
  PolicyKind kind = PolicyKind::picse_narrowed;
  // Multiplier c_n; defaults to z*_min(n0,n1) when unset.
  std::optional<double> c_n;
};

enum class Verdict { eligible, ineligible_pic, ineligible_sed };

Eigen::MatrixXd s_matrix(const CenteredSample& s);

// Closed form S - s^-2(x beta) S beta beta' S. When beta' S beta is zero the
// index direction is degenerate: S is returned unchanged and *degenerate set.
Eigen::MatrixXd s_perp(const Eigen::MatrixXd& S, const Eigen::VectorXd& beta,
                       bool* degenerate = nullptr);

CovarianceSummary covariance_summary(const CenteredSample& s,
                                     const Eigen::VectorXd& beta);

// <2 S_perp, C>^1/2.
double pic_se(const Eigen::MatrixXd& S_perp, const Eigen::MatrixXd& C);

// z*_m = (2 log 2m)^1/2, the Gaussian max-of-m scaling.
double z_star(long m);

// ((x_i - x_j) C (x_i - x_j)')^1/2.
double index_error_distance(const Eigen::RowVectorXd& xi,
                            const Eigen::RowVectorXd& xj,
                            const Eigen::MatrixXd& C);

// picse * (1 + (log min(n0,n1) / (p-1))^1/2): the nominal supremum of index
// error distances under notional perfect pairing.
double nominal_sup(double picse, int n0, int n1, int p);

// Hard eligibility cap on index error distances:
// picse * (2 + (log min(n0,n1) / (p-1))^1/2).
double hard_limit(double picse, int n0, int n1, int p);

// max(0, sed - nominal_sup): excess of a pair's index error distance over
// its nominal supremum.
double excess(double sed, double nominal_sup_value);

// Selectively narrowed eligibility: |pic| <= c_n * (picse - excess), with
// excess >= picse forbidding the pair regardless of the PIC.
Verdict eligible(double pic, double sed, double picse_value, int n0, int n1,
                 int p, double c_n);

// 0.2 * sample standard deviation (n-1 denominator) of the index values.
double rr_caliper(const Eigen::VectorXd& index_values);

struct EuclideanCalipers {
  double global = 0.0;        // tr(S)^1/2 * (1 + (log n / (p-1))^1/2)
  Eigen::VectorXd per_dim;    // s(x_j) * same factor
};

EuclideanCalipers euclidean_calipers(const Eigen::MatrixXd& S, int n, int p);

// tr(M) / |M|_2 for PSD M; 0 when M = 0.
double intrinsic_dimension(const Eigen::MatrixXd& M);

// <2 Sigma, C>^1/2 * (1 + (log m / p_[Sigma^1/2 C Sigma^1/2])^1/2).
double chaos_bound(const Eigen::MatrixXd& Sigma, const Eigen::MatrixXd& C,
                   long m_pairs);

/// Everything needed to apply a caliper policy to candidate pairs, computed
/// once per (sample, fit, covariance estimate).
class CaliperContext {
 public:
  CaliperContext(const CenteredSample& s, const IndexFit& f,
                 const Eigen::MatrixXd& C, const CaliperPolicy& policy);

  Verdict check(int i, int j) const;  // row indices into the sample
  double pic(int i, int j) const { return index_[i] - index_[j]; }
  double sed(int i, int j) const {
    return (chalf_rows_.row(i) - chalf_rows_.row(j)).norm();
  }

  double picse() const { return picse_; }
  double multiplier() const { return c_n_; }
  double nominal() const { return nominal_; }
  double hard66_threshold() const { return hard66_; }
  double rr_width() const { return rr_; }
  const EuclideanCalipers& euclidean() const { return euclid_; }
  const CovarianceSummary& covariance() const { return cov_; }
  PolicyKind kind() const { return policy_.kind; }

 private:
  CaliperPolicy policy_;
  CovarianceSummary cov_;
  Eigen::VectorXd index_;
  Eigen::MatrixXd chalf_rows_;  // n x p, row i = x_i * C^1/2
  const Eigen::MatrixXd x_;     // centered covariates (copy)
  double picse_ = 0.0;
  double c_n_ = 0.0;
  double nominal_ = 0.0;
  double hard66_ = 0.0;
  double rr_ = 0.0;
  EuclideanCalipers euclid_;
  int n0_ = 0, n1_ = 0, p_ = 0;
};

}  // namespace picmatch
