#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "picmatch/caliper.hpp"

namespace picmatch {

struct Edge {
  int treated = 0;  // sample row index
  int control = 0;  // sample row index
  double pic = 0.0;
  double sed = 0.0;
};

/// All eligible cross-arm pairs under a caliper policy, with exclusion
/// counts by reason. Pairs never cross pre-existing strata.
struct EligibilityGraph {
  std::vector<Edge> edges;  // sorted by (treated row, control row)
  std::vector<int> treated_rows;
  std::vector<int> control_rows;
  long pairs_evaluated = 0;
  long excluded_pic = 0;
  long excluded_sed = 0;
};

/// A fine stratification: pairs (or m:1 sets from nearest-neighbor
/// matching) plus unmatched singletons.
struct MatchResult {
  std::vector<std::vector<int>> strata;  // row indices; every stratum fine
  std::vector<Edge> pair_records;        // matched (treated, control) edges
  std::vector<int> singletons;
  double max_abs_pic = 0.0;
  double mean_abs_pic = 0.0;
  double max_sed = 0.0;
  int cardinality = 0;  // number of matched treated units
  bool empty() const { return pair_records.empty(); }
};

struct MatchDiagnostics {
  double max_abs_pic = 0.0;
  double mean_abs_pic = 0.0;
  double max_sed = 0.0;
  long excluded_pic = 0;
  long excluded_sed = 0;
  int cardinality = 0;
  bool empty = true;
  // Simulation-only, when beta_true is supplied.
  std::optional<double> max_true_index_gap;
  std::optional<double> max_pic_error;
};

EligibilityGraph build_graph(const CenteredSample& s, const IndexFit& f,
                             const Eigen::MatrixXd& C,
                             const CaliperPolicy& policy);

EligibilityGraph build_graph(const CenteredSample& s, const CaliperContext& ctx);

// Among maximum-cardinality matchings of the graph, one minimizing the total
// |PIC|; min-cost assignment by successive shortest paths. Deterministic
// given input order.
MatchResult pair_match_optimal(const EligibilityGraph& g,
                               const CenteredSample& s);

// 1-nearest-neighbor with replacement: each treated unit takes its min-|pic|
// eligible control; shared controls merge into m:1 strata.
MatchResult nn_match_replacement(const EligibilityGraph& g,
                                 const CenteredSample& s);

MatchDiagnostics match_diagnostics(
    const MatchResult& m, const EligibilityGraph& g, const CenteredSample& s,
    const std::optional<Eigen::VectorXd>& beta_true = std::nullopt,
    const std::optional<Eigen::VectorXd>& beta_hat = std::nullopt);

}  // namespace picmatch
