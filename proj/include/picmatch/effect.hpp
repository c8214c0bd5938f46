#pragma once

#include <Eigen/Dense>
#include <vector>

namespace picmatch {

enum class WeightKind {
  uniform,  // w_s = 1: the z-coefficient of y ~ z + matched-set indicators
  att,      // w_s = (1 - Zbar_s)^-1 for |s| > 1, 0 for singletons
};

struct StratumTerm {
  int index = 0;            // position in the stratification
  int size = 0;
  double wtilde_size = 0.0; // w_s * |s| * Zbar(1 - Zbar)
  double diff = 0.0;        // Ybar_treated - Ybar_control
};

struct EffectEstimate {
  double tau_hat = 0.0;
  double denominator = 0.0;  // sum of w~_s |s|
  std::vector<StratumTerm> terms;
  int informative_strata = 0;
};

// The fine-stratification estimating function at eta: affine in eta with
// slope exactly -1; singletons and zero-weight strata contribute 0 to both
// numerator and denominator.
double psi_value(const std::vector<std::vector<int>>& strata,
                 const Eigen::VectorXd& y, const Eigen::VectorXd& z,
                 WeightKind w, double eta);

// Closed-form root: weighted mean of within-stratum treated-control
// differences.
EffectEstimate tau_hat(const std::vector<std::vector<int>>& strata,
                       const Eigen::VectorXd& y, const Eigen::VectorXd& z,
                       WeightKind w);

// Conditional assignment probability of the pattern zeta within one fine
// stratum with oracle logits theta: exp(theta_i)/sum exp(theta_j) when one
// unit is treated, exp(-theta_i)/sum exp(-theta_j) when one is control.
double assignment_prob(const Eigen::VectorXd& theta,
                       const std::vector<int>& zeta);

// Oracle counterpart of psi_value with stratum terms divided by |s| pi_s(Z).
double psi_tilde_value(const std::vector<std::vector<int>>& strata,
                       const Eigen::VectorXd& y, const Eigen::VectorXd& z,
                       WeightKind w, const Eigen::VectorXd& theta, double eta);

struct MspsErrCheck {
  bool eq46_ok = true;
  bool eq80_ok = true;
  double max_lhs46 = 0.0;
  double rhs46 = 0.0;
  double max_lhs80 = 0.0;
  double rhs80 = 0.0;
};

// For each stratum (given its unit logits and observed pattern sum), checks
// |pi_s / |s|^-1 - 1| <= (1 - |s|^-1)(e^{2 delta} - 1) and
// ||s|^-1 / pi_s - 1| <= (1 - |s|^-1)(e^{4 delta} - 1)
// over every admissible assignment pattern.
MspsErrCheck msps_err_check(const std::vector<Eigen::VectorXd>& stratum_thetas,
                            const std::vector<int>& treated_counts,
                            double delta);

}  // namespace picmatch
