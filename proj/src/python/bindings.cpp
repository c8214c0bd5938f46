#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

#include "picmatch/caliper.hpp"
#include "picmatch/effect.hpp"
#include "picmatch/errors.hpp"
#include "picmatch/index_model.hpp"
#include "picmatch/matcher.hpp"
#include "picmatch/sample.hpp"
#include "picmatch/simlab.hpp"

namespace py = pybind11;
using namespace picmatch;

namespace {

CenteredSample make_centered(const Eigen::MatrixXd& x, const Eigen::VectorXd& z,
                             const std::optional<Eigen::VectorXd>& y) {
  Sample s;
  s.x = x;
  s.z = z;
  s.y = y;
  s.validate();
  return center(s);
}

ScoreFamily family_of(const std::string& name) {
  if (name == "logistic") return ScoreFamily::logistic();
  if (name == "linear") return ScoreFamily::linear();
  throw SchemaError("unknown family: " + name);
}

CaliperPolicy policy_of(const std::string& name, std::optional<double> cn) {
  CaliperPolicy p;
  if (name == "picse-fixed") p.kind = PolicyKind::picse_fixed;
  else if (name == "picse-narrowed") p.kind = PolicyKind::picse_narrowed;
  else if (name == "hard66") p.kind = PolicyKind::hard66;
  else if (name == "rr02") p.kind = PolicyKind::rr02;
  else if (name == "euclidean") p.kind = PolicyKind::euclidean;
  else if (name == "none") p.kind = PolicyKind::none;
  else throw SchemaError("unknown caliper policy: " + name);
  p.c_n = cn;
  return p;
}

py::dict fit_dict(const IndexFit& f) {
  py::dict d;
  d["intercepts"] = f.beta0;
  d["beta"] = f.beta;
  d["converged"] = f.converged;
  d["score_norm"] = f.score_norm;
  d["cov_info"] = f.c_inv_info;
  d["cov_sandwich"] = f.c_sandwich;
  d["cond_a"] = f.cond_a;
  d["cond_b"] = f.cond_b;
  return d;
}

py::dict match_dict(const MatchResult& m, const EligibilityGraph& g) {
  py::list pairs;
  for (const Edge& e : m.pair_records)
    pairs.append(py::make_tuple(e.treated, e.control, e.pic, e.sed));
  py::dict d;
  d["pairs"] = pairs;
  d["strata"] = m.strata;
  d["singletons"] = m.singletons;
  d["cardinality"] = m.cardinality;
  d["max_abs_pic"] = m.max_abs_pic;
  d["mean_abs_pic"] = m.mean_abs_pic;
  d["max_sed"] = m.max_sed;
  d["excluded_pic"] = g.excluded_pic;
  d["excluded_sed"] = g.excluded_sed;
  return d;
}

}  // namespace

PYBIND11_MODULE(_picmatch, mod) {
  mod.doc() = "index-score matching toolkit";

  mod.def(
      "fit_index",
      [](const Eigen::MatrixXd& x, const Eigen::VectorXd& z,
         const std::optional<Eigen::VectorXd>& y, const std::string& family) {
        return fit_dict(fit(make_centered(x, z, y), family_of(family)));
      },
      py::arg("x"), py::arg("z"), py::arg("y") = std::nullopt,
      py::arg("family") = "logistic",
      "Fit the index model by estimating equations on centered covariates.");

  mod.def(
      "caliper_summary",
      [](const Eigen::MatrixXd& x, const Eigen::VectorXd& z,
         const std::string& family, const std::string& cov) {
        const CenteredSample cs = make_centered(x, z, std::nullopt);
        const IndexFit f = fit(cs, family_of(family));
        const Eigen::MatrixXd& C = f.cov(cov == "sandwich"
                                             ? CovEstimator::sandwich
                                             : CovEstimator::inverse_information);
        const CaliperContext ctx(cs, f, C,
                                 policy_of("picse-narrowed", std::nullopt));
        py::dict d;
        d["picse"] = ctx.picse();
        d["multiplier"] = ctx.multiplier();
        d["nominal_sup"] = ctx.nominal();
        d["hard_limit"] = ctx.hard66_threshold();
        d["rr_width"] = ctx.rr_width();
        return d;
      },
      py::arg("x"), py::arg("z"), py::arg("family") = "logistic",
      py::arg("cov") = "info", "PIC SE and the derived caliper widths.");

  mod.def(
      "match",
      [](const Eigen::MatrixXd& x, const Eigen::VectorXd& z,
         const std::string& family, const std::string& policy,
         std::optional<double> cn, const std::string& cov, bool optimal) {
        const CenteredSample cs = make_centered(x, z, std::nullopt);
        const IndexFit f = fit(cs, family_of(family));
        const Eigen::MatrixXd& C = f.cov(cov == "sandwich"
                                             ? CovEstimator::sandwich
                                             : CovEstimator::inverse_information);
        const CaliperContext ctx(cs, f, C, policy_of(policy, cn));
        const EligibilityGraph g = build_graph(cs, ctx);
        const MatchResult m =
            optimal ? pair_match_optimal(g, cs) : nn_match_replacement(g, cs);
        return match_dict(m, g);
      },
      py::arg("x"), py::arg("z"), py::arg("family") = "logistic",
      py::arg("policy") = "picse-narrowed", py::arg("cn") = std::nullopt,
      py::arg("cov") = "info", py::arg("optimal") = true,
      "Within-caliper matching; optimal pairs or 1-NN with replacement.");

  mod.def(
      "estimate",
      [](const Eigen::MatrixXd& x, const Eigen::VectorXd& z,
         const Eigen::VectorXd& y, const std::string& family,
         const std::string& policy, std::optional<double> cn,
         const std::string& weights, bool optimal) {
        const CenteredSample cs = make_centered(x, z, y);
        const IndexFit f = fit(cs, family_of(family));
        const CaliperContext ctx(cs, f, f.c_inv_info, policy_of(policy, cn));
        const EligibilityGraph g = build_graph(cs, ctx);
        const MatchResult m =
            optimal ? pair_match_optimal(g, cs) : nn_match_replacement(g, cs);
        const EffectEstimate e = tau_hat(
            m.strata, *cs.sample.y, cs.sample.z,
            weights == "att" ? WeightKind::att : WeightKind::uniform);
        py::dict d = match_dict(m, g);
        d["tau_hat"] = e.tau_hat;
        d["informative_strata"] = e.informative_strata;
        return d;
      },
      py::arg("x"), py::arg("z"), py::arg("y"),
      py::arg("family") = "logistic", py::arg("policy") = "picse-narrowed",
      py::arg("cn") = std::nullopt, py::arg("weights") = "uniform",
      py::arg("optimal") = true,
      "Full pipeline: fit, caliper, match, matched effect estimate.");

  mod.def(
      "generate",
      [](int n, int p, std::uint64_t seed, const std::string& dgp, double rho,
         double tau) {
        DGPConfig cfg;
        cfg.n = n;
        cfg.p = p;
        cfg.seed = seed;
        cfg.rho = rho;
        cfg.tau = tau;
        if (dgp == "gaussian") cfg.family = CovFamily::gaussian_iid;
        else if (dgp == "correlated") cfg.family = CovFamily::gaussian_correlated;
        else if (dgp == "t") cfg.family = CovFamily::scaled_t;
        else throw SchemaError("unknown dgp: " + dgp);
        const auto [s, truth] = generate(cfg);
        py::dict d;
        d["x"] = s.x;
        d["z"] = s.z;
        d["y"] = *s.y;
        d["beta_true"] = truth.beta_true;
        d["theta"] = truth.theta;
        d["tau"] = truth.tau;
        return d;
      },
      py::arg("n"), py::arg("p"), py::arg("seed") = 0,
      py::arg("dgp") = "gaussian", py::arg("rho") = 0.5, py::arg("tau") = 1.0,
      "Synthetic logistic-treatment data with known truth.");

  mod.def("z_star", &z_star, py::arg("m"),
          "Gaussian max-of-m scaling (2 log 2m)^0.5.");
  mod.def("pic_se", &pic_se, py::arg("s_perp"), py::arg("c"),
          "<2 S_perp, C>^0.5.");
}
