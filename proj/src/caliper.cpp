#include "picmatch/caliper.hpp"

#include <cmath>

#include "picmatch/errors.hpp"
#include "picmatch/linalg.hpp"

namespace picmatch {

Eigen::MatrixXd s_matrix(const CenteredSample& s) {
  const double denom = double(s.n() - s.num_strata());
  Eigen::MatrixXd S = s.sample.x.transpose() * s.sample.x / denom;
  return 0.5 * (S + S.transpose());
}

Eigen::MatrixXd s_perp(const Eigen::MatrixXd& S, const Eigen::VectorXd& beta,
                       bool* degenerate) {
  const Eigen::VectorXd sb = S * beta;
  const double s2 = beta.dot(sb);
  // Relative threshold: the index direction carries no spread.
  if (s2 <= 1e-14 * std::max(1.0, S.trace()) * beta.squaredNorm()) {
    if (degenerate) *degenerate = true;
    return S;
  }
  if (degenerate) *degenerate = false;
  Eigen::MatrixXd out = S - sb * sb.transpose() / s2;
  return 0.5 * (out + out.transpose());
}

CovarianceSummary covariance_summary(const CenteredSample& s,
                                     const Eigen::VectorXd& beta) {
  CovarianceSummary out;
  out.S = s_matrix(s);
  out.s2_index = beta.dot(out.S * beta);
  out.S_perp = s_perp(out.S, beta, &out.index_degenerate);
  return out;
}

double pic_se(const Eigen::MatrixXd& S_perp, const Eigen::MatrixXd& C) {
  const double t = 2.0 * fip(S_perp, C);
  if (t < -1e-10 * std::max(1.0, S_perp.trace() * C.trace()))
    throw EstimationError("negative <2 S_perp, C>; inconsistent inputs");
  return std::sqrt(std::max(0.0, t));
}

double z_star(long m) {
  if (m < 1) throw DimensionError("z_star requires m >= 1");
  return std::sqrt(2.0 * std::log(2.0 * double(m)));
}

double index_error_distance(const Eigen::RowVectorXd& xi,
                            const Eigen::RowVectorXd& xj,
                            const Eigen::MatrixXd& C) {
  const Eigen::RowVectorXd d = xi - xj;
  return std::sqrt(std::max(0.0, d.dot(C * d.transpose())));
}

double nominal_sup(double picse, int n0, int n1, int p) {
  if (p < 2) throw DimensionError("nominal_sup requires p >= 2");
  const double m = double(std::min(n0, n1));
  return picse * (1.0 + std::sqrt(std::log(m) / double(p - 1)));
}

double hard_limit(double picse, int n0, int n1, int p) {
  if (p < 2) throw DimensionError("hard_limit requires p >= 2");
  const double m = double(std::min(n0, n1));
  return picse * (2.0 + std::sqrt(std::log(m) / double(p - 1)));
}

double excess(double sed, double nominal_sup_value) {
  return std::max(0.0, sed - nominal_sup_value);
}

Verdict eligible(double pic, double sed, double picse_value, int n0, int n1,
                 int p, double c_n) {
  const double e = excess(sed, nominal_sup(picse_value, n0, n1, p));
  if (e >= picse_value) return Verdict::ineligible_sed;
  if (std::abs(pic) <= c_n * (picse_value - e)) return Verdict::eligible;
  return Verdict::ineligible_pic;
}

double rr_caliper(const Eigen::VectorXd& index_values) {
  const Eigen::Index n = index_values.size();
  if (n < 2) return 0.0;
  const double mean = index_values.mean();
  const double ss = (index_values.array() - mean).square().sum();
  return 0.2 * std::sqrt(ss / double(n - 1));
}

EuclideanCalipers euclidean_calipers(const Eigen::MatrixXd& S, int n, int p) {
  if (p < 2) throw DimensionError("euclidean_calipers requires p >= 2");
  const double factor = 1.0 + std::sqrt(std::log(double(n)) / double(p - 1));
  EuclideanCalipers out;
  out.global = std::sqrt(std::max(0.0, S.trace())) * factor;
  out.per_dim = S.diagonal().cwiseMax(0.0).cwiseSqrt() * factor;
  return out;
}

double intrinsic_dimension(const Eigen::MatrixXd& M) {
  const double op = operator_norm_sym(M);
  if (op == 0.0) return 0.0;
  return M.trace() / op;
}

double chaos_bound(const Eigen::MatrixXd& Sigma, const Eigen::MatrixXd& C,
                   long m_pairs) {
  if (m_pairs < 1) throw DimensionError("chaos_bound requires m_pairs >= 1");
  const double base = std::sqrt(std::max(0.0, 2.0 * fip(Sigma, C)));
  const Eigen::MatrixXd half = sym_sqrt(Sigma);
  const double dim = intrinsic_dimension(half * C * half);
  if (dim == 0.0) {
    if (m_pairs > 1)
      throw EstimationError("degenerate intrinsic dimension with m_pairs > 1");
    return base;
  }
  return base * (1.0 + std::sqrt(std::log(double(m_pairs)) / dim));
}

CaliperContext::CaliperContext(const CenteredSample& s, const IndexFit& f,
                               const Eigen::MatrixXd& C,
                               const CaliperPolicy& policy)
    : policy_(policy),
      cov_(covariance_summary(s, f.beta)),
      index_(index_values(f, s)),
      x_(s.sample.x) {
  n1_ = s.sample.n_treated();
  n0_ = s.sample.n_control();
  p_ = s.p();
  chalf_rows_ = s.sample.x * sym_sqrt(C);
  picse_ = pic_se(cov_.S_perp, C);
  c_n_ = policy.c_n ? *policy.c_n : z_star(std::max(1, std::min(n0_, n1_)));
  nominal_ = nominal_sup(picse_, n0_, n1_, p_);
  hard66_ = hard_limit(picse_, n0_, n1_, p_);
  rr_ = rr_caliper(index_);
  euclid_ = euclidean_calipers(cov_.S, s.n(), p_);
}

Verdict CaliperContext::check(int i, int j) const {
  const double pic_ij = pic(i, j);
  switch (policy_.kind) {
    case PolicyKind::none:
      return Verdict::eligible;
    case PolicyKind::rr02:
      return std::abs(pic_ij) <= rr_ ? Verdict::eligible
                                     : Verdict::ineligible_pic;
    case PolicyKind::picse_fixed:
      return std::abs(pic_ij) <= c_n_ * picse_ ? Verdict::eligible
                                               : Verdict::ineligible_pic;
    case PolicyKind::hard66: {
      if (sed(i, j) > hard66_) return Verdict::ineligible_sed;
      return std::abs(pic_ij) <= c_n_ * picse_ ? Verdict::eligible
                                               : Verdict::ineligible_pic;
    }
    case PolicyKind::euclidean: {
      const Eigen::RowVectorXd d = x_.row(i) - x_.row(j);
      if (d.norm() > euclid_.global) return Verdict::ineligible_sed;
      for (int k = 0; k < p_; ++k)
        if (std::abs(d[k]) > euclid_.per_dim[k]) return Verdict::ineligible_sed;
      return std::abs(pic_ij) <= c_n_ * picse_ ? Verdict::eligible
                                               : Verdict::ineligible_pic;
    }
    case PolicyKind::picse_narrowed: {
      // Cheap reject before the O(p) distance: the narrowed threshold never
      // exceeds c_n * picse.
      if (std::abs(pic_ij) > c_n_ * picse_) {
        if (excess(sed(i, j), nominal_) >= picse_) return Verdict::ineligible_sed;
        return Verdict::ineligible_pic;
      }
      const double e = excess(sed(i, j), nominal_);
      if (e >= picse_) return Verdict::ineligible_sed;
      return std::abs(pic_ij) <= c_n_ * (picse_ - e) ? Verdict::eligible
                                                     : Verdict::ineligible_pic;
    }
  }
  return Verdict::ineligible_pic;
}

}  // namespace picmatch
