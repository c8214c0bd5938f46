#pragma once

#include <Eigen/Dense>
#include <functional>

#include "picmatch/sample.hpp"

namespace picmatch {

enum class FamilyKind { logistic, linear };

/// Score kernel psi_c(r, eta), its eta-derivative, an optional covariate
/// weight w(x) (default 1) and an optional penalty gradient alpha(beta)
/// (default 0). The full score is psi = psi_c(r, eta) * w(x) * (1, x)'.
struct ScoreFamily {
  FamilyKind kind = FamilyKind::logistic;
  // w(x); null means constant 1.
  std::function<double(const Eigen::RowVectorXd&)> weight;
  // alpha(beta_full) over the (L + p)-dimensional parameter; null means 0.
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> penalty_gradient;

  double psi_c(double r, double eta) const;
  double dpsi_c_deta(double eta) const;  // independent of r for both families
  // Recorded Lipschitz constant of eta -> psi_c(r, eta): 1/4 logistic, 1 linear.
  double lipschitz_constant() const;

  static ScoreFamily logistic() { return ScoreFamily{FamilyKind::logistic, {}, {}}; }
  static ScoreFamily linear() { return ScoreFamily{FamilyKind::linear, {}, {}}; }
};

struct FitOptions {
  int max_iter = 50;
  double tol = 1e-10;          // on the score norm, scaled by sqrt(n)
  double beta_cap = 30.0;      // |beta|_inf separation cap (logistic)
  double cond_threshold = 1e12;
};

enum class CovEstimator { inverse_information, sandwich };

/// Fitted index model. Parameter layout is [intercepts (L); slopes (p)].
struct IndexFit {
  Eigen::VectorXd beta0;        // one intercept per stratum (L entries)
  Eigen::VectorXd beta;         // slope vector (p entries)
  ScoreFamily family;
  bool converged = false;
  double score_norm = 0.0;      // |sum_i psi_i + alpha|_2 at the fit
  Eigen::MatrixXd a_hat;        // (L+p) x (L+p)
  Eigen::MatrixXd b_hat;        // (L+p) x (L+p)
  Eigen::MatrixXd c_inv_info;   // p x p slope block of n^-1 (-A)^-1
  Eigen::MatrixXd c_sandwich;   // p x p slope block of n^-1 A^-1 B A^-1'
  double cond_a = 0.0;          // conditioning diagnostics
  double cond_b = 0.0;

  Eigen::VectorXd beta_full() const;

  const Eigen::MatrixXd& cov(CovEstimator est) const {
    return est == CovEstimator::inverse_information ? c_inv_info : c_sandwich;
  }
};

struct Linearization {
  Eigen::VectorXd beta_tilde;  // full (L + p) parameter
};

// Sum over rows of psi(r_i, x_i; beta_full) + alpha(beta_full). For the
// logistic family r = z; for the linear family r = y.
Eigen::VectorXd score_sum(const CenteredSample& s, const ScoreFamily& fam,
                          const Eigen::VectorXd& beta_full);

// Empirical A_n(beta): n^-1 [sum_i dpsi_c/deta * w(x_i) * (1,x_i)'(1,x_i)
// + penalty Jacobian, which is 0 for the default penalty]. Negative definite
// for both families.
Eigen::MatrixXd a_hat(const CenteredSample& s, const ScoreFamily& fam,
                      const Eigen::VectorXd& beta_full);

// n^-1 sum_i psi_i psi_i'; symmetric PSD by construction.
Eigen::MatrixXd b_hat(const CenteredSample& s, const ScoreFamily& fam,
                      const Eigen::VectorXd& beta_full);

// Slope-coefficient block of the chosen covariance estimate, computed from
// -A so the result is PSD; intercept rows/columns are dropped because paired
// index contrasts never involve intercepts.
Eigen::MatrixXd cov_beta(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                         int n, int num_intercepts, CovEstimator est,
                         double cond_threshold = 1e12);

IndexFit fit(const CenteredSample& s, const ScoreFamily& fam,
             const FitOptions& opts = {});

// One-step expansion about beta_true (simulation use only):
// beta_tilde = beta_true - A(beta_true)^-1 * (mean score at beta_true).
Linearization linearize(const CenteredSample& s, const ScoreFamily& fam,
                        const Eigen::VectorXd& beta_full_true);

// x beta + stratum intercept, per row.
Eigen::VectorXd index_values(const IndexFit& f, const CenteredSample& s);

}  // namespace picmatch
