#include "picmatch/reports.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace picmatch {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

nlohmann::ordered_json vec_json(const Eigen::VectorXd& v) {
  nlohmann::ordered_json a = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

}  // namespace

nlohmann::ordered_json fit_report(const IndexFit& f, CovEstimator est) {
  nlohmann::ordered_json j;
  j["family"] = f.family.kind == FamilyKind::logistic ? "logistic" : "linear";
  j["converged"] = f.converged;
  j["score_norm"] = f.score_norm;
  j["intercepts"] = vec_json(f.beta0);
  j["coefficients"] = vec_json(f.beta);
  j["cond_a"] = f.cond_a;
  j["cond_b"] = f.cond_b;
  j["cov_estimator"] =
      est == CovEstimator::inverse_information ? "info" : "sandwich";
  return j;
}

nlohmann::ordered_json caliper_report(const CaliperContext& ctx) {
  nlohmann::ordered_json j;
  switch (ctx.kind()) {
    case PolicyKind::picse_fixed: j["policy"] = "picse-fixed"; break;
    case PolicyKind::picse_narrowed: j["policy"] = "picse-narrowed"; break;
    case PolicyKind::hard66: j["policy"] = "hard66"; break;
    case PolicyKind::rr02: j["policy"] = "rr02"; break;
    case PolicyKind::euclidean: j["policy"] = "euclidean"; break;
    case PolicyKind::none: j["policy"] = "none"; break;
  }
  j["picse"] = ctx.picse();
  j["multiplier"] = ctx.multiplier();
  j["fixed_width"] = ctx.multiplier() * ctx.picse();
  j["nominal_sup"] = ctx.nominal();
  j["hard_limit"] = ctx.hard66_threshold();
  j["rr_width"] = ctx.rr_width();
  j["index_degenerate"] = ctx.covariance().index_degenerate;
  j["s2_index"] = ctx.covariance().s2_index;
  return j;
}

nlohmann::ordered_json match_report(const MatchResult& m,
                                    const EligibilityGraph& g) {
  nlohmann::ordered_json j;
  j["cardinality"] = m.cardinality;
  j["strata"] = static_cast<int>(m.strata.size());
  j["singletons"] = static_cast<int>(m.singletons.size());
  j["max_abs_pic"] = m.max_abs_pic;
  j["mean_abs_pic"] = m.mean_abs_pic;
  j["max_sed"] = m.max_sed;
  j["pairs_evaluated"] = g.pairs_evaluated;
  j["excluded_pic"] = g.excluded_pic;
  j["excluded_sed"] = g.excluded_sed;
  return j;
}

nlohmann::ordered_json effect_report(const EffectEstimate& e, WeightKind w) {
  nlohmann::ordered_json j;
  j["tau_hat"] = e.tau_hat;
  j["weights"] = w == WeightKind::uniform ? "uniform" : "att";
  j["informative_strata"] = e.informative_strata;
  j["denominator"] = e.denominator;
  return j;
}

std::string match_csv(const MatchResult& m) {
  std::ostringstream out;
  out << "pair_id,treated_row,control_row,pic,sed\n";
  int id = 0;
  for (const Edge& e : m.pair_records) {
    out << id++ << ',' << e.treated << ',' << e.control << ','
        << format_double(e.pic) << ',' << format_double(e.sed) << '\n';
  }
  return out.str();
}

std::string effect_csv(const EffectEstimate& e) {
  std::ostringstream out;
  out << "stratum,size,weighted_size,mean_difference\n";
  for (const StratumTerm& t : e.terms) {
    out << t.index << ',' << t.size << ',' << format_double(t.wtilde_size)
        << ',' << format_double(t.diff) << '\n';
  }
  return out.str();
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << content;
}

}  // namespace picmatch
