#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "picmatch/caliper.hpp"
#include "picmatch/sample.hpp"

namespace picmatch {

enum class CovFamily {
  gaussian_iid,
  gaussian_correlated,  // exchangeable correlation rho
  scaled_t,             // Student t scaled to unit variance (heavy tails)
};

struct DGPConfig {
  int n = 0;
  int p = 0;
  CovFamily family = CovFamily::gaussian_iid;
  double rho = 0.5;        // gaussian_correlated only
  double df = 4.0;         // scaled_t only; must exceed 2
  double target_s2 = 1.0;  // target population variance of the true index
  double tau = 1.0;        // constant treatment effect
  double noise_sd = 1.0;
  double intercept = 0.0;
  std::uint64_t seed = 0;
};

struct Truth {
  Eigen::VectorXd beta_true;  // slope p-vector
  Eigen::VectorXd theta;      // true logits, intercept + x beta_true
  double tau = 0.0;
};

// Population covariance of one covariate row under the config's family.
Eigen::MatrixXd population_sigma(const DGPConfig& cfg);

// Logistic-treatment, constant-effect data with strong ignorability through
// the true index. Deterministic given cfg.seed; both arms nonempty.
std::pair<Sample, Truth> generate(const DGPConfig& cfg);

struct Prop3Verdict {
  double mean_square_ratio = 0.0;  // empirical E(pair error)^2 / <2 Sigma, C>
  double ratio_se = 0.0;           // replicate-level standard error of the ratio
  bool ratio_ok = false;           // |ratio - 1| <= 3 ratio_se
  double mean_max = 0.0;           // empirical E max_k |pair error|
  double bound = 0.0;              // z*_m <2 Sigma, C>^1/2
  bool bound_ok = false;
  bool pass() const { return ratio_ok && bound_ok; }
};

// Pair differences ~ N(0, 2 Sigma), a common coefficient error ~ N(0, C) per
// replicate: checks the mean-square identity and the Gaussian max bound.
Prop3Verdict verify_prop3(const Eigen::MatrixXd& Sigma,
                          const Eigen::MatrixXd& C, int n_pairs, int reps,
                          std::uint64_t seed);

struct ChaosVerdict {
  double rms_max = 0.0;  // (E max_k dX_k' C dX_k)^1/2 over Gaussian pairs
  double bound = 0.0;
  double slack = 0.0;    // bound - rms_max
  bool ok = false;
};

ChaosVerdict verify_chaos(const Eigen::MatrixXd& Sigma,
                          const Eigen::MatrixXd& C, int m_pairs, int reps,
                          std::uint64_t seed);

struct ConsistencyRow {
  int n = 0;
  int p = 0;
  double hat = 0.0;     // mean over reps of <S_perp(beta_hat), C_hat>
  double oracle = 0.0;  // <S_perp(beta_true), C_mc> with C_mc across reps
  double err_over_rate = 0.0;  // |hat - oracle| / (p / n)
};

struct ConsistencyTable {
  std::vector<ConsistencyRow> rows;
  bool nonincreasing = false;  // err_over_rate along the grid
};

ConsistencyTable verify_picse_consistency(
    const std::vector<std::pair<int, int>>& np_grid, int reps,
    std::uint64_t seed, int threads = 1);

enum class PRule { fixed, pow04, pow06 };

int dimension_for(PRule rule, int fixed_p, int n);

struct RateRow {
  int n = 0;
  int p = 0;
  double med_true_gap = 0.0;   // median over reps of max matched |dx beta_true|
  double med_pic_error = 0.0;  // median of max matched |dx (beta_hat - beta_true)|
  double med_max_sed = 0.0;
};

struct RateStudy {
  std::vector<RateRow> rows;
  bool decreasing = false;  // med_true_gap strictly decreasing along n_grid
};

// 1-nearest-neighbor matching on simulated data under the given policy;
// replicate r of grid point g always uses the same generator stream.
RateStudy rate_study(PRule rule, int fixed_p, const std::vector<int>& n_grid,
                     int reps, const CaliperPolicy& policy, std::uint64_t seed,
                     int threads = 1);

struct EffectRow {
  int n = 0;
  double med_abs_err = 0.0;  // median |tau_hat - tau|
};

struct EffectStudy {
  std::vector<EffectRow> rows;
  bool decreasing = false;
};

EffectStudy verify_effect(const DGPConfig& base,
                          const std::vector<int>& n_grid, int reps,
                          std::uint64_t seed, int threads = 1);

struct BatteryItem {
  std::string name;
  bool ok = false;
  double stat = 0.0;
  double threshold = 0.0;
};

struct BatteryResult {
  std::vector<BatteryItem> items;
  bool all_ok = false;
};

// Reduced-size verification battery: identities, Gaussian bound checks,
// assignment-probability enumeration, and small trend studies. Writes
// rate_study.csv, effect_study.csv, picse_consistency.csv and verdicts.json
// under out_dir; byte-identical for identical (seed, threads-independent).
BatteryResult run_quick_battery(std::uint64_t seed, const std::string& out_dir,
                                int threads = 1);

// Deterministic helper: runs fn(0..count-1) across at most `threads` workers;
// each index owns its outputs, so results never depend on scheduling.
void parallel_for(int count, int threads, const std::function<void(int)>& fn);

}  // namespace picmatch
