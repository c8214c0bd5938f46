#include <cstdint>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "picmatch/effect.hpp"
#include "picmatch/errors.hpp"
#include "picmatch/index_model.hpp"
#include "picmatch/matcher.hpp"
#include "picmatch/reports.hpp"
#include "picmatch/sample.hpp"
#include "picmatch/simlab.hpp"

namespace {

using namespace picmatch;
namespace fs = std::filesystem;

struct CommonArgs {
  std::string input;
  std::string schema;
  std::string family = "logistic";
  std::string cov = "info";
  std::string policy = "picse-narrowed";
  double cn = -1.0;  // negative: use the default multiplier
  std::string weights = "uniform";
  std::string out = ".";
  std::uint64_t seed = 0;
  int threads = 1;
  bool nn = false;
};

ScoreFamily family_of(const std::string& name) {
  if (name == "logistic") return ScoreFamily::logistic();
  if (name == "linear") return ScoreFamily::linear();
  throw SchemaError("unknown family: " + name);
}

CovEstimator cov_of(const std::string& name) {
  if (name == "info") return CovEstimator::inverse_information;
  if (name == "sandwich") return CovEstimator::sandwich;
  throw SchemaError("unknown covariance estimator: " + name);
}

CaliperPolicy policy_of(const CommonArgs& a) {
  CaliperPolicy p;
  if (a.policy == "picse-fixed") p.kind = PolicyKind::picse_fixed;
  else if (a.policy == "picse-narrowed") p.kind = PolicyKind::picse_narrowed;
  else if (a.policy == "hard66") p.kind = PolicyKind::hard66;
  else if (a.policy == "rr02") p.kind = PolicyKind::rr02;
  else if (a.policy == "euclidean") p.kind = PolicyKind::euclidean;
  else if (a.policy == "none") p.kind = PolicyKind::none;
  else throw SchemaError("unknown caliper policy: " + a.policy);
  if (a.cn > 0.0) p.c_n = a.cn;
  return p;
}

WeightKind weights_of(const std::string& name) {
  if (name == "uniform") return WeightKind::uniform;
  if (name == "att") return WeightKind::att;
  throw SchemaError("unknown weight scheme: " + name);
}

CenteredSample load_input(const CommonArgs& a) {
  if (a.input.empty() || a.schema.empty())
    throw SchemaError("--input and --schema are required");
  return center(load_csv(a.input, load_schema(a.schema)));
}

void add_common(CLI::App* cmd, CommonArgs& a, bool needs_input) {
  auto* in = cmd->add_option("--input", a.input, "input CSV");
  auto* sc = cmd->add_option("--schema", a.schema, "column-role config");
  if (needs_input) {
    in->required();
    sc->required();
  }
  cmd->add_option("--family", a.family, "logistic|linear");
  cmd->add_option("--cov", a.cov, "info|sandwich");
  cmd->add_option("--policy", a.policy,
                  "picse-fixed|picse-narrowed|hard66|rr02|euclidean|none");
  cmd->add_option("--cn", a.cn, "caliper multiplier override");
  cmd->add_option("--weights", a.weights, "uniform|att");
  cmd->add_option("--seed", a.seed, "master seed");
  cmd->add_option("--out", a.out, "output directory");
  cmd->add_option("--threads", a.threads, "replicate parallelism cap");
}

int run_fit(const CommonArgs& a) {
  const CenteredSample cs = load_input(a);
  const IndexFit f = fit(cs, family_of(a.family));
  fs::create_directories(a.out);
  write_text((fs::path(a.out) / "fit.json").string(),
             fit_report(f, cov_of(a.cov)).dump(2) + "\n");
  return 0;
}

int run_caliper(const CommonArgs& a) {
  const CenteredSample cs = load_input(a);
  const IndexFit f = fit(cs, family_of(a.family));
  const CaliperContext ctx(cs, f, f.cov(cov_of(a.cov)), policy_of(a));
  fs::create_directories(a.out);
  write_text((fs::path(a.out) / "fit.json").string(),
             fit_report(f, cov_of(a.cov)).dump(2) + "\n");
  write_text((fs::path(a.out) / "caliper.json").string(),
             caliper_report(ctx).dump(2) + "\n");
  return 0;
}

struct Matched {
  CenteredSample cs;
  IndexFit f;
  MatchResult m;
  EligibilityGraph g;
};

Matched run_match_pipeline(const CommonArgs& a) {
  CenteredSample cs = load_input(a);
  IndexFit f = fit(cs, family_of(a.family));
  const CaliperContext ctx(cs, f, f.cov(cov_of(a.cov)), policy_of(a));
  EligibilityGraph g = build_graph(cs, ctx);
  MatchResult m =
      a.nn ? nn_match_replacement(g, cs) : pair_match_optimal(g, cs);
  return {std::move(cs), std::move(f), std::move(m), std::move(g)};
}

int run_match(const CommonArgs& a) {
  const Matched r = run_match_pipeline(a);
  fs::create_directories(a.out);
  write_text((fs::path(a.out) / "match.csv").string(), match_csv(r.m));
  write_text((fs::path(a.out) / "match.json").string(),
             match_report(r.m, r.g).dump(2) + "\n");
  return 0;
}

int run_estimate(const CommonArgs& a) {
  const Matched r = run_match_pipeline(a);
  if (!r.cs.sample.y)
    throw EstimationError("estimate requires an outcome column");
  const WeightKind w = weights_of(a.weights);
  const EffectEstimate e =
      tau_hat(r.m.strata, *r.cs.sample.y, r.cs.sample.z, w);
  fs::create_directories(a.out);
  write_text((fs::path(a.out) / "match.csv").string(), match_csv(r.m));
  write_text((fs::path(a.out) / "match.json").string(),
             match_report(r.m, r.g).dump(2) + "\n");
  write_text((fs::path(a.out) / "effect.json").string(),
             effect_report(e, w).dump(2) + "\n");
  write_text((fs::path(a.out) / "effect.csv").string(), effect_csv(e));
  return 0;
}

int run_simulate(const CommonArgs& a, const DGPConfig& cfg_in,
                 const std::string& dgp) {
  DGPConfig cfg = cfg_in;
  cfg.seed = a.seed;
  if (dgp == "gaussian") cfg.family = CovFamily::gaussian_iid;
  else if (dgp == "correlated") cfg.family = CovFamily::gaussian_correlated;
  else if (dgp == "t") cfg.family = CovFamily::scaled_t;
  else throw SchemaError("unknown dgp: " + dgp);
  const auto [sample, truth] = generate(cfg);
  fs::create_directories(a.out);

  std::ostringstream csv;
  csv << "z,y";
  for (int j = 0; j < sample.p(); ++j) csv << ",x" << (j + 1);
  csv << '\n';
  for (int i = 0; i < sample.n(); ++i) {
    csv << int(sample.z[i]) << ',' << format_double((*sample.y)[i]);
    for (int j = 0; j < sample.p(); ++j)
      csv << ',' << format_double(sample.x(i, j));
    csv << '\n';
  }
  write_text((fs::path(a.out) / "sample.csv").string(), csv.str());

  std::ostringstream schema;
  schema << "treatment = z\noutcome = y\n";
  write_text((fs::path(a.out) / "sample.schema").string(), schema.str());

  nlohmann::ordered_json t;
  t["tau"] = truth.tau;
  nlohmann::ordered_json b = nlohmann::ordered_json::array();
  for (Eigen::Index j = 0; j < truth.beta_true.size(); ++j)
    b.push_back(truth.beta_true[j]);
  t["beta_true"] = b;
  write_text((fs::path(a.out) / "truth.json").string(), t.dump(2) + "\n");
  return 0;
}

int run_verify(const CommonArgs& a, bool quick) {
  (void)quick;  // only the reduced battery ships; the flag documents intent
  const BatteryResult r = run_quick_battery(a.seed, a.out, a.threads);
  for (const BatteryItem& it : r.items) {
    std::cout << (it.ok ? "PASS " : "FAIL ") << it.name
              << "  stat=" << format_double(it.stat)
              << "  threshold=" << format_double(it.threshold) << '\n';
  }
  std::cout << (r.all_ok ? "all checks passed" : "some checks FAILED") << '\n';
  return r.all_ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"index-score matching toolkit"};
  app.require_subcommand(1);
  CommonArgs a;

  auto* fit_cmd = app.add_subcommand("fit", "fit the index model");
  add_common(fit_cmd, a, true);
  auto* cal_cmd = app.add_subcommand("caliper", "compute caliper quantities");
  add_common(cal_cmd, a, true);
  auto* match_cmd = app.add_subcommand("match", "build a matched design");
  add_common(match_cmd, a, true);
  match_cmd->add_flag("--nn", a.nn, "1-NN with replacement instead of optimal");
  auto* est_cmd = app.add_subcommand("estimate", "matched effect estimate");
  add_common(est_cmd, a, true);
  est_cmd->add_flag("--nn", a.nn, "1-NN with replacement instead of optimal");

  auto* sim_cmd = app.add_subcommand("simulate", "generate synthetic data");
  add_common(sim_cmd, a, false);
  DGPConfig cfg;
  cfg.n = 500;
  cfg.p = 5;
  std::string dgp = "gaussian";
  sim_cmd->add_option("--n", cfg.n, "sample size");
  sim_cmd->add_option("--p", cfg.p, "covariate dimension");
  sim_cmd->add_option("--dgp", dgp, "gaussian|correlated|t");
  sim_cmd->add_option("--rho", cfg.rho, "exchangeable correlation");
  sim_cmd->add_option("--tau", cfg.tau, "constant treatment effect");
  sim_cmd->add_option("--noise-sd", cfg.noise_sd, "outcome noise sd");

  auto* ver_cmd = app.add_subcommand("verify", "run the verification battery");
  add_common(ver_cmd, a, false);
  bool quick = false;
  ver_cmd->add_flag("--quick", quick, "reduced-replicate battery");

  CLI11_PARSE(app, argc, argv);

  try {
    if (fit_cmd->parsed()) return run_fit(a);
    if (cal_cmd->parsed()) return run_caliper(a);
    if (match_cmd->parsed()) return run_match(a);
    if (est_cmd->parsed()) return run_estimate(a);
    if (sim_cmd->parsed()) return run_simulate(a, cfg, dgp);
    if (ver_cmd->parsed()) return run_verify(a, quick);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
