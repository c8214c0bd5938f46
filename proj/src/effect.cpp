#include "picmatch/effect.hpp"

#include <algorithm>
#include <cmath>

#include "picmatch/errors.hpp"

namespace picmatch {

namespace {

struct StratumStats {
  int size = 0;
  int n_treated = 0;
  double ybar1 = 0.0;
  double ybar0 = 0.0;
  double zbar = 0.0;
};

StratumStats stratum_stats(const std::vector<int>& stratum,
                           const Eigen::VectorXd& y,
                           const Eigen::VectorXd& z) {
  StratumStats st;
  st.size = static_cast<int>(stratum.size());
  double sum1 = 0.0, sum0 = 0.0;
  int n1 = 0, n0 = 0;
  for (int i : stratum) {
    if (z[i] == 1.0) {
      sum1 += y[i];
      ++n1;
    } else {
      sum0 += y[i];
      ++n0;
    }
  }
  st.n_treated = n1;
  st.zbar = double(n1) / double(st.size);
  st.ybar1 = n1 > 0 ? sum1 / n1 : 0.0;
  st.ybar0 = n0 > 0 ? sum0 / n0 : 0.0;
  return st;
}

double stratum_weight(const StratumStats& st, WeightKind w) {
  if (w == WeightKind::uniform) return 1.0;
  if (st.size <= 1) return 0.0;
  return 1.0 / (1.0 - st.zbar);  // zbar < 1 whenever the stratum is fine
}

// w~_s |s| and the within-stratum mean difference; contribution is zero for
// singletons and zero-weight strata.
bool stratum_term(const std::vector<int>& stratum, const Eigen::VectorXd& y,
                  const Eigen::VectorXd& z, WeightKind w, StratumTerm* out) {
  const StratumStats st = stratum_stats(stratum, y, z);
  const double wtilde = stratum_weight(st, w) * st.zbar * (1.0 - st.zbar);
  if (wtilde <= 0.0) return false;
  for (int i : stratum)
    if (!std::isfinite(y[i]))
      throw EstimationError("matched unit has a missing outcome");
  out->size = st.size;
  out->wtilde_size = wtilde * st.size;
  out->diff = st.ybar1 - st.ybar0;
  return true;
}

}  // namespace

double psi_value(const std::vector<std::vector<int>>& strata,
                 const Eigen::VectorXd& y, const Eigen::VectorXd& z,
                 WeightKind w, double eta) {
  double num = 0.0, den = 0.0;
  for (const auto& stratum : strata) {
    StratumTerm t;
    if (!stratum_term(stratum, y, z, w, &t)) continue;
    num += t.wtilde_size * (t.diff - eta);
    den += t.wtilde_size;
  }
  if (den <= 0.0)
    throw EstimationError("no informative strata (zero denominator)");
  return num / den;
}

EffectEstimate tau_hat(const std::vector<std::vector<int>>& strata,
                       const Eigen::VectorXd& y, const Eigen::VectorXd& z,
                       WeightKind w) {
  EffectEstimate out;
  double num = 0.0;
  int idx = 0;
  for (const auto& stratum : strata) {
    StratumTerm t;
    t.index = idx++;
    if (!stratum_term(stratum, y, z, w, &t)) continue;
    num += t.wtilde_size * t.diff;
    out.denominator += t.wtilde_size;
    out.terms.push_back(t);
    ++out.informative_strata;
  }
  if (out.denominator <= 0.0)
    throw EstimationError("no informative strata (zero denominator)");
  out.tau_hat = num / out.denominator;
  return out;
}

double assignment_prob(const Eigen::VectorXd& theta,
                       const std::vector<int>& zeta) {
  const int m = static_cast<int>(theta.size());
  if (static_cast<int>(zeta.size()) != m)
    throw DimensionError("zeta length does not match theta length");
  int count = 0;
  for (int v : zeta) {
    if (v != 0 && v != 1) throw SchemaError("zeta entries must be 0 or 1");
    count += v;
  }
  if (m == 1) return 1.0;
  const auto logsumexp = [&](double sign, int pick) {
    // log of exp(sign*theta_pick) / sum_j exp(sign*theta_j)
    double mx = sign * theta[0];
    for (int j = 1; j < m; ++j) mx = std::max(mx, sign * theta[j]);
    double denom = 0.0;
    for (int j = 0; j < m; ++j) denom += std::exp(sign * theta[j] - mx);
    return std::exp(sign * theta[pick] - mx) / denom;
  };
  if (count == 1) {
    for (int i = 0; i < m; ++i)
      if (zeta[i] == 1) return logsumexp(+1.0, i);
  }
  if (count == m - 1) {
    for (int i = 0; i < m; ++i)
      if (zeta[i] == 0) return logsumexp(-1.0, i);
  }
  throw EstimationError("assignment probabilities require a fine stratum");
}

double psi_tilde_value(const std::vector<std::vector<int>>& strata,
                       const Eigen::VectorXd& y, const Eigen::VectorXd& z,
                       WeightKind w, const Eigen::VectorXd& theta, double eta) {
  double num = 0.0, den = 0.0;
  for (const auto& stratum : strata) {
    StratumTerm t;
    if (!stratum_term(stratum, y, z, w, &t)) continue;
    Eigen::VectorXd th(stratum.size());
    std::vector<int> zeta(stratum.size());
    for (size_t k = 0; k < stratum.size(); ++k) {
      th[k] = theta[stratum[k]];
      zeta[k] = static_cast<int>(z[stratum[k]]);
    }
    const double pi = assignment_prob(th, zeta);
    if (pi <= 0.0)
      throw EstimationError("zero assignment probability (non-finite theta?)");
    // w~_s (Ybar1 - Ybar0 - eta) / pi_s, i.e. the stratum psi over |s| pi_s.
    num += (t.wtilde_size / t.size) * (t.diff - eta) / pi;
    den += t.wtilde_size;
  }
  if (den <= 0.0)
    throw EstimationError("no informative strata (zero denominator)");
  return num / den;
}

MspsErrCheck msps_err_check(const std::vector<Eigen::VectorXd>& stratum_thetas,
                            const std::vector<int>& treated_counts,
                            double delta) {
  if (stratum_thetas.size() != treated_counts.size())
    throw DimensionError("stratum_thetas and treated_counts differ in length");
  MspsErrCheck out;
  for (size_t s = 0; s < stratum_thetas.size(); ++s) {
    const Eigen::VectorXd& th = stratum_thetas[s];
    const int m = static_cast<int>(th.size());
    const int nt = treated_counts[s];
    if (m < 2) continue;
    if (nt != 1 && nt != m - 1)
      throw EstimationError("msps_err_check requires a fine stratum");
    const double spread = th.maxCoeff() - th.minCoeff();
    if (spread >= delta)
      throw EstimationError("within-stratum theta spread must be below delta");
    const double frac = 1.0 - 1.0 / double(m);
    const double rhs46 = frac * (std::exp(2.0 * delta) - 1.0);
    const double rhs80 = frac * (std::exp(4.0 * delta) - 1.0);
    // Every admissible pattern is determined by the singleton-arm unit.
    for (int i = 0; i < m; ++i) {
      std::vector<int> zeta(m, nt == 1 ? 0 : 1);
      zeta[i] = nt == 1 ? 1 : 0;
      const double pi = assignment_prob(th, zeta);
      const double lhs46 = std::abs(pi * m - 1.0);
      const double lhs80 = std::abs(1.0 / (pi * m) - 1.0);
      if (lhs46 > out.max_lhs46) {
        out.max_lhs46 = lhs46;
        out.rhs46 = rhs46;
      }
      if (lhs80 > out.max_lhs80) {
        out.max_lhs80 = lhs80;
        out.rhs80 = rhs80;
      }
      if (lhs46 > rhs46 + 1e-12) out.eq46_ok = false;
      if (lhs80 > rhs80 + 1e-12) out.eq80_ok = false;
    }
  }
  return out;
}

}  // namespace picmatch
