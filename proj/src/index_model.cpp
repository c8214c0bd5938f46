#include "picmatch/index_model.hpp"

#include <cmath>

#include "picmatch/errors.hpp"
#include "picmatch/linalg.hpp"

namespace picmatch {

namespace {

double expit(double eta) {
  if (eta >= 0.0) {
    const double e = std::exp(-eta);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

// Design matrix [stratum indicators | x]; one ones-column when unstratified.
Eigen::MatrixXd design(const CenteredSample& s) {
  const int n = s.n();
  const int p = s.p();
  const int L = s.num_strata();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, L + p);
  if (s.sample.stratum.empty()) {
    d.col(0).setOnes();
  } else {
    for (int i = 0; i < n; ++i) d(i, s.sample.stratum[i]) = 1.0;
  }
  d.rightCols(p) = s.sample.x;
  return d;
}

const Eigen::VectorXd& response(const CenteredSample& s, const ScoreFamily& fam) {
  if (fam.kind == FamilyKind::logistic) return s.sample.z;
  if (!s.sample.y)
    throw EstimationError("linear index family requires an outcome column");
  return *s.sample.y;
}

Eigen::VectorXd row_weights(const CenteredSample& s, const ScoreFamily& fam) {
  Eigen::VectorXd w = Eigen::VectorXd::Ones(s.n());
  if (fam.weight)
    for (int i = 0; i < s.n(); ++i) w[i] = fam.weight(s.sample.x.row(i));
  return w;
}

}  // namespace

double ScoreFamily::psi_c(double r, double eta) const {
  return kind == FamilyKind::logistic ? r - expit(eta) : r - eta;
}

double ScoreFamily::dpsi_c_deta(double eta) const {
  if (kind == FamilyKind::logistic) {
    const double mu = expit(eta);
    return -mu * (1.0 - mu);
  }
  return -1.0;
}

double ScoreFamily::lipschitz_constant() const {
  return kind == FamilyKind::logistic ? 0.25 : 1.0;
}

Eigen::VectorXd IndexFit::beta_full() const {
  Eigen::VectorXd full(beta0.size() + beta.size());
  full << beta0, beta;
  return full;
}

Eigen::VectorXd score_sum(const CenteredSample& s, const ScoreFamily& fam,
                          const Eigen::VectorXd& beta_full) {
  const Eigen::MatrixXd d = design(s);
  const Eigen::VectorXd& r = response(s, fam);
  const Eigen::VectorXd w = row_weights(s, fam);
  const Eigen::VectorXd eta = d * beta_full;
  Eigen::VectorXd scale(s.n());
  for (int i = 0; i < s.n(); ++i) scale[i] = fam.psi_c(r[i], eta[i]) * w[i];
  Eigen::VectorXd total = d.transpose() * scale;
  if (fam.penalty_gradient) total += fam.penalty_gradient(beta_full);
  return total;
}

Eigen::MatrixXd a_hat(const CenteredSample& s, const ScoreFamily& fam,
                      const Eigen::VectorXd& beta_full) {
  const Eigen::MatrixXd d = design(s);
  const Eigen::VectorXd w = row_weights(s, fam);
  const Eigen::VectorXd eta = d * beta_full;
  Eigen::VectorXd scale(s.n());
  for (int i = 0; i < s.n(); ++i) scale[i] = fam.dpsi_c_deta(eta[i]) * w[i];
  Eigen::MatrixXd a = d.transpose() * scale.asDiagonal() * d / double(s.n());
  return 0.5 * (a + a.transpose());
}

Eigen::MatrixXd b_hat(const CenteredSample& s, const ScoreFamily& fam,
                      const Eigen::VectorXd& beta_full) {
  const Eigen::MatrixXd d = design(s);
  const Eigen::VectorXd& r = response(s, fam);
  const Eigen::VectorXd w = row_weights(s, fam);
  const Eigen::VectorXd eta = d * beta_full;
  Eigen::VectorXd scale(s.n());
  for (int i = 0; i < s.n(); ++i) {
    const double c = fam.psi_c(r[i], eta[i]) * w[i];
    scale[i] = c * c;
  }
  Eigen::MatrixXd b = d.transpose() * scale.asDiagonal() * d / double(s.n());
  return 0.5 * (b + b.transpose());
}

Eigen::MatrixXd cov_beta(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                         int n, int num_intercepts, CovEstimator est,
                         double cond_threshold) {
  const Eigen::MatrixXd neg_a = -a;
  if (sym_condition_number(neg_a) > cond_threshold)
    throw ConditioningError(
        "A_hat is singular or ill-conditioned; consider trimming explanatory "
        "variables that contribute relatively little to the index model");
  const Eigen::MatrixXd inv = neg_a.ldlt().solve(
      Eigen::MatrixXd::Identity(a.rows(), a.cols()));
  Eigen::MatrixXd full;
  if (est == CovEstimator::inverse_information) {
    full = inv / double(n);
  } else {
    full = inv * b * inv.transpose() / double(n);
  }
  const int p = static_cast<int>(a.rows()) - num_intercepts;
  Eigen::MatrixXd block = full.bottomRightCorner(p, p);
  block = 0.5 * (block + block.transpose());
  return psd_clamp(block);
}

IndexFit fit(const CenteredSample& s, const ScoreFamily& fam,
             const FitOptions& opts) {
  const int n = s.n();
  const int p = s.p();
  const int L = s.num_strata();
  const int q = L + p;

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(q);
  {
    const Eigen::MatrixXd a0 = a_hat(s, fam, beta);
    if (sym_condition_number(a0) > opts.cond_threshold)
      throw ConditioningError(
          "design matrix is rank deficient or ill-conditioned (A3/A11 "
          "diagnostic failed); consider trimming collinear covariates");
  }

  const double target = opts.tol * std::sqrt(double(n));
  Eigen::VectorXd score = score_sum(s, fam, beta);
  double norm = score.norm();
  bool converged = norm <= target;
  for (int iter = 0; iter < opts.max_iter && !converged; ++iter) {
    const Eigen::MatrixXd a = a_hat(s, fam, beta);
    Eigen::VectorXd step = (-a).ldlt().solve(score) / double(n);
    double scale = 1.0;
    Eigen::VectorXd next;
    double next_norm = norm;
    for (int half = 0; half < 30; ++half) {
      next = beta + scale * step;
      next_norm = score_sum(s, fam, next).norm();
      if (next_norm < norm) break;
      scale *= 0.5;
    }
    beta = next;
    score = score_sum(s, fam, beta);
    norm = score.norm();
    converged = norm <= target;
    if (fam.kind == FamilyKind::logistic &&
        beta.cwiseAbs().maxCoeff() > opts.beta_cap && !converged) {
      throw SeparationError(
          "logistic coefficients diverging (|beta|_inf exceeds cap with "
          "non-vanishing score); data may be perfectly separated");
    }
  }
  if (!converged)
    throw ConvergenceError("index model did not converge after " +
                               std::to_string(opts.max_iter) +
                               " iterations (score norm " +
                               std::to_string(norm) + ")",
                           norm);

  // The estimability constraint on the penalty is sup|alpha| = o(n^1/2);
  // warn-level enforcement happens in the CLI, the library just records.
  IndexFit out;
  out.beta0 = beta.head(L);
  out.beta = beta.tail(p);
  out.family = fam;
  out.converged = true;
  out.score_norm = norm;
  out.a_hat = a_hat(s, fam, beta);
  out.b_hat = b_hat(s, fam, beta);
  out.cond_a = sym_condition_number(out.a_hat);
  out.cond_b = sym_condition_number(out.b_hat);
  out.c_inv_info = cov_beta(out.a_hat, out.b_hat, n, L,
                            CovEstimator::inverse_information,
                            opts.cond_threshold);
  out.c_sandwich = cov_beta(out.a_hat, out.b_hat, n, L, CovEstimator::sandwich,
                            opts.cond_threshold);
  return out;
}

Linearization linearize(const CenteredSample& s, const ScoreFamily& fam,
                        const Eigen::VectorXd& beta_full_true) {
  const Eigen::MatrixXd a = a_hat(s, fam, beta_full_true);
  if (sym_condition_number(a) > 1e14)
    throw ConditioningError("A_n(beta_true) is singular");
  const Eigen::VectorXd mean_score =
      score_sum(s, fam, beta_full_true) / double(s.n());
  Linearization lin;
  lin.beta_tilde = beta_full_true + (-a).ldlt().solve(mean_score);
  return lin;
}

Eigen::VectorXd index_values(const IndexFit& f, const CenteredSample& s) {
  Eigen::VectorXd v = s.sample.x * f.beta;
  if (s.sample.stratum.empty()) {
    v.array() += f.beta0[0];
  } else {
    for (int i = 0; i < s.n(); ++i) v[i] += f.beta0[s.sample.stratum[i]];
  }
  return v;
}

}  // namespace picmatch
