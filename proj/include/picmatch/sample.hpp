#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

namespace picmatch {

/// Observational data: covariates, a binary treatment, an optional outcome
/// and optional pre-existing stratum labels.
struct Sample {
  Eigen::MatrixXd x;                  // n x p covariates
  Eigen::VectorXd z;                  // entries in {0, 1}
  std::optional<Eigen::VectorXd> y;   // outcome; NaN marks a missing entry
  std::vector<int> stratum;           // empty when unstratified, else labels 0..L-1
  std::vector<std::string> covariate_names;
  std::vector<std::string> stratum_names;

  int n() const { return static_cast<int>(x.rows()); }
  int p() const { return static_cast<int>(x.cols()); }
  bool stratified() const { return !stratum.empty(); }
  // Number of centering blocks: the stratum count, or 1 when unstratified
  // (matches the (n - L) divisor convention).
  int num_strata() const;
  int n_treated() const;
  int n_control() const;

  // Throws on violated invariants (non-binary z, p < 2, empty stratum, ...).
  void validate() const;
};

/// Sample with column (or within-stratum) means subtracted; the centering
/// record makes the original values recoverable.
struct CenteredSample {
  Sample sample;                 // x is centered
  Eigen::MatrixXd column_means;  // L x p (one row per centering block)

  int n() const { return sample.n(); }
  int p() const { return sample.p(); }
  int num_strata() const { return sample.num_strata(); }

  Eigen::MatrixXd uncentered_x() const;
};

CenteredSample center(const Sample& s);

/// Column-role declaration for CSV ingestion. Covariate columns may be listed
/// explicitly; when the list is empty every column not claimed by another
/// role is a covariate.
struct CsvSchema {
  std::string treatment;
  std::string outcome;             // empty: no outcome column
  std::string stratum;             // empty: unstratified
  std::vector<std::string> covariates;
};

// Parses "key = value" lines: treatment, outcome, stratum, covariates
// (comma-separated). Lines starting with '#' are ignored.
CsvSchema load_schema(const std::string& path);

Sample load_csv(const std::string& path, const CsvSchema& schema);

}  // namespace picmatch
