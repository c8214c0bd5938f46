#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "picmatch/index_model.hpp"
#include "picmatch/matcher.hpp"
#include "picmatch/rng.hpp"
#include "test_util.hpp"

using namespace picmatch;
using namespace picmatch::testutil;

namespace {

// Hand-built graph over abstract row ids; the matchers read nothing else.
EligibilityGraph make_graph(std::vector<int> treated, std::vector<int> control,
                            std::vector<Edge> edges) {
  EligibilityGraph g;
  g.treated_rows = std::move(treated);
  g.control_rows = std::move(control);
  g.edges = std::move(edges);
  g.pairs_evaluated =
      long(g.treated_rows.size()) * long(g.control_rows.size());
  return g;
}

struct BruteBest {
  int cardinality = 0;
  double cost = 0.0;
};

// Exhaustive max-cardinality min-cost matching by dynamic programming over
// the set of used controls. Small graphs only.
BruteBest brute_force(const EligibilityGraph& g) {
  const int T = static_cast<int>(g.treated_rows.size());
  const int C = static_cast<int>(g.control_rows.size());
  std::vector<std::vector<std::pair<int, double>>> adj(T);
  for (const Edge& e : g.edges) {
    int ti = -1, ci = -1;
    for (int k = 0; k < T; ++k)
      if (g.treated_rows[k] == e.treated) ti = k;
    for (int k = 0; k < C; ++k)
      if (g.control_rows[k] == e.control) ci = k;
    adj[ti].push_back({ci, std::abs(e.pic)});
  }
  const int masks = 1 << C;
  const double kInf = 1e300;
  std::vector<BruteBest> cur(masks, {0, 0.0}), next(masks, {0, kInf});
  std::vector<char> live(masks, 0);
  live[0] = 1;
  std::vector<char> live_next(masks, 0);
  for (int t = 0; t < T; ++t) {
    std::fill(next.begin(), next.end(), BruteBest{-1, kInf});
    std::fill(live_next.begin(), live_next.end(), 0);
    for (int m = 0; m < masks; ++m) {
      if (!live[m]) continue;
      auto relax = [&](int nm, int card, double cost) {
        if (!live_next[nm] || card > next[nm].cardinality ||
            (card == next[nm].cardinality && cost < next[nm].cost)) {
          next[nm] = {card, cost};
          live_next[nm] = 1;
        }
      };
      relax(m, cur[m].cardinality, cur[m].cost);  // leave t unmatched
      for (const auto& [c, w] : adj[t]) {
        if (m & (1 << c)) continue;
        relax(m | (1 << c), cur[m].cardinality + 1, cur[m].cost + w);
      }
    }
    cur.swap(next);
    live.swap(live_next);
  }
  BruteBest best{0, kInf};
  for (int m = 0; m < masks; ++m) {
    if (!live[m]) continue;
    if (cur[m].cardinality > best.cardinality ||
        (cur[m].cardinality == best.cardinality && cur[m].cost < best.cost))
      best = cur[m];
  }
  return best;
}

double total_abs_pic(const MatchResult& m) {
  double s = 0.0;
  for (const Edge& e : m.pair_records) s += std::abs(e.pic);
  return s;
}

const CenteredSample kDummy{};

}  // namespace

TEST_CASE("single eligible pair is matched") {
  const auto g = make_graph({0}, {1}, {{0, 1, 0.3, 0.1}});
  const MatchResult m = pair_match_optimal(g, kDummy);
  REQUIRE(m.cardinality == 1);
  CHECK(m.pair_records[0].treated == 0);
  CHECK(m.pair_records[0].control == 1);
  CHECK(m.singletons.empty());
  CHECK(m.max_abs_pic == doctest::Approx(0.3));
}

TEST_CASE("two by two cross costs resolve to the cheap diagonal") {
  // Costs |pic|: (t0,c0)=1 (t0,c1)=2 (t1,c0)=2 (t1,c1)=1. The identity
  // assignment totals 2, the swap totals 4.
  const auto g = make_graph({0, 1}, {2, 3},
                            {{0, 2, 1.0, 0}, {0, 3, 2.0, 0},
                             {1, 2, -2.0, 0}, {1, 3, -1.0, 0}});
  const MatchResult m = pair_match_optimal(g, kDummy);
  REQUIRE(m.cardinality == 2);
  CHECK(total_abs_pic(m) == doctest::Approx(2.0));
  CHECK(m.pair_records[0].control == 2);
  CHECK(m.pair_records[1].control == 3);
}

TEST_CASE("greedy trap requires an augmenting swap") {
  // t0 can use c0 (cost 0.1) or c1 (cost 0.5); t1 can only use c0 (cost 0.2).
  // Greedy gives t0-c0 and strands t1; the optimum matches both.
  const auto g = make_graph({0, 1}, {2, 3},
                            {{0, 2, 0.1, 0}, {0, 3, 0.5, 0}, {1, 2, 0.2, 0}});
  const MatchResult m = pair_match_optimal(g, kDummy);
  REQUIRE(m.cardinality == 2);
  CHECK(total_abs_pic(m) == doctest::Approx(0.7));
}

TEST_CASE("star graph keeps one pair and reports the rest as singletons") {
  const auto g = make_graph({0, 1, 2}, {9},
                            {{0, 9, 0.4, 0}, {1, 9, 0.1, 0}, {2, 9, 0.2, 0}});
  const MatchResult m = pair_match_optimal(g, kDummy);
  REQUIRE(m.cardinality == 1);
  CHECK(m.pair_records[0].treated == 1);  // the cheapest spoke
  REQUIRE(m.singletons.size() == 2);
  CHECK(m.singletons[0] == 0);
  CHECK(m.singletons[1] == 2);
}

TEST_CASE("optimal matching agrees with exhaustive search on random graphs") {
  SplitMix64 rng(71);
  for (int trial = 0; trial < 200; ++trial) {
    const int T = 1 + static_cast<int>(rng.uniform() * 8);
    const int C = 1 + static_cast<int>(rng.uniform() * 8);
    const double density = 0.2 + 0.7 * rng.uniform();
    std::vector<int> trows, crows;
    for (int k = 0; k < T; ++k) trows.push_back(k);
    for (int k = 0; k < C; ++k) crows.push_back(100 + k);
    std::vector<Edge> edges;
    for (int t : trows)
      for (int c : crows)
        if (rng.uniform() < density)
          edges.push_back({t, c, rng.normal(), rng.uniform()});
    const auto g = make_graph(trows, crows, edges);
    const MatchResult m = pair_match_optimal(g, kDummy);
    const BruteBest oracle = brute_force(g);
    REQUIRE(m.cardinality == oracle.cardinality);
    REQUIRE(total_abs_pic(m) ==
            doctest::Approx(oracle.cost).epsilon(1e-9));
  }
}

TEST_CASE("nearest neighbor picks the minimum contrast per treated unit") {
  const auto g = make_graph({0, 1}, {5, 6},
                            {{0, 5, 0.3, 0}, {0, 6, -0.1, 0},
                             {1, 5, 0.05, 0}, {1, 6, 0.4, 0}});
  const MatchResult m = nn_match_replacement(g, kDummy);
  REQUIRE(m.cardinality == 2);
  CHECK(m.pair_records[0].control == 6);
  CHECK(m.pair_records[1].control == 5);
  CHECK(m.strata.size() == 2);
}

TEST_CASE("nearest neighbor merges a shared control into one stratum") {
  const auto g = make_graph({0, 1, 2}, {5, 6},
                            {{0, 5, 0.1, 0}, {1, 5, -0.2, 0},
                             {2, 6, 0.3, 0}});
  const MatchResult m = nn_match_replacement(g, kDummy);
  CHECK(m.cardinality == 3);
  REQUIRE(m.strata.size() == 2);
  // Control 5 serves both 0 and 1: a 2:1 fine stratum.
  bool found = false;
  for (const auto& s : m.strata)
    if (s.size() == 3) {
      found = true;
      CHECK(s[0] == 0);
      CHECK(s[1] == 1);
      CHECK(s[2] == 5);
    }
  CHECK(found);
  CHECK(m.singletons.empty());
}

TEST_CASE("nearest neighbor tie breaks toward the lower control row") {
  const auto g =
      make_graph({0}, {4, 7}, {{0, 4, 0.2, 0}, {0, 7, -0.2, 0}});
  const MatchResult m = nn_match_replacement(g, kDummy);
  REQUIRE(m.cardinality == 1);
  CHECK(m.pair_records[0].control == 4);
}

TEST_CASE("isolated treated units stay unmatched under both matchers") {
  const auto g = make_graph({0, 1}, {5}, {{0, 5, 0.1, 0}});
  for (const MatchResult& m :
       {pair_match_optimal(g, kDummy), nn_match_replacement(g, kDummy)}) {
    CHECK(m.cardinality == 1);
    REQUIRE(m.singletons.size() == 1);
    CHECK(m.singletons[0] == 1);
  }
}

TEST_CASE("no policy yields the complete cross-arm graph") {
  const Sample s =
      gaussian_logit_sample(80, 3, 73, Eigen::Vector3d(0.5, -0.3, 0.1));
  const CenteredSample cs = center(s);
  const IndexFit f = fit(cs, ScoreFamily::logistic());
  const EligibilityGraph g =
      build_graph(cs, f, f.c_inv_info, {PolicyKind::none, std::nullopt});
  CHECK(long(g.edges.size()) ==
        long(s.n_treated()) * long(s.n_control()));
  CHECK(g.excluded_pic == 0);
  CHECK(g.excluded_sed == 0);
  // Edges come out sorted by (treated row, control row).
  for (size_t k = 1; k < g.edges.size(); ++k)
    CHECK(std::tie(g.edges[k - 1].treated, g.edges[k - 1].control) <
          std::tie(g.edges[k].treated, g.edges[k].control));
}

TEST_CASE("narrowed calipers only shrink the edge set") {
  const Sample s =
      gaussian_logit_sample(120, 4, 79,
                            (Eigen::VectorXd(4) << 0.7, 0.2, -0.5, 0.3).finished());
  const CenteredSample cs = center(s);
  const IndexFit f = fit(cs, ScoreFamily::logistic());
  const EligibilityGraph all =
      build_graph(cs, f, f.c_inv_info, {PolicyKind::none, std::nullopt});
  const EligibilityGraph nar = build_graph(
      cs, f, f.c_inv_info, {PolicyKind::picse_narrowed, std::nullopt});
  CHECK(nar.edges.size() <= all.edges.size());
  CHECK(nar.pairs_evaluated == all.pairs_evaluated);
  CHECK(long(nar.edges.size()) + nar.excluded_pic + nar.excluded_sed ==
        nar.pairs_evaluated);
  // Every surviving edge honors the narrowed rule when rechecked.
  const CaliperContext ctx(cs, f, f.c_inv_info,
                           {PolicyKind::picse_narrowed, std::nullopt});
  for (const Edge& e : nar.edges)
    CHECK(ctx.check(e.treated, e.control) == Verdict::eligible);
}

TEST_CASE("pre-existing strata are never crossed") {
  Sample s = gaussian_logit_sample(60, 2, 83, Eigen::Vector2d(0.4, 0.4));
  s.stratum.resize(60);
  for (int i = 0; i < 60; ++i) s.stratum[i] = i % 3;
  s.stratum_names = {"a", "b", "c"};
  const CenteredSample cs = center(s);
  const IndexFit f = fit(cs, ScoreFamily::logistic());
  const EligibilityGraph g =
      build_graph(cs, f, f.c_inv_info, {PolicyKind::none, std::nullopt});
  for (const Edge& e : g.edges)
    CHECK(s.stratum[e.treated] == s.stratum[e.control]);
}

TEST_CASE("diagnostics recompute the summaries from the matched pairs") {
  const Sample s =
      gaussian_logit_sample(100, 3, 89, Eigen::Vector3d(0.6, -0.2, 0.1));
  const CenteredSample cs = center(s);
  const IndexFit f = fit(cs, ScoreFamily::logistic());
  const EligibilityGraph g = build_graph(
      cs, f, f.c_inv_info, {PolicyKind::picse_narrowed, std::nullopt});
  const MatchResult m = pair_match_optimal(g, cs);
  const MatchDiagnostics d = match_diagnostics(m, g, cs);
  CHECK(d.cardinality == m.cardinality);
  CHECK(d.max_abs_pic == m.max_abs_pic);
  CHECK(d.excluded_pic == g.excluded_pic);
  CHECK(d.excluded_sed == g.excluded_sed);
  double mx = 0.0, sum = 0.0;
  for (const Edge& e : m.pair_records) {
    mx = std::max(mx, std::abs(e.pic));
    sum += std::abs(e.pic);
  }
  if (!m.pair_records.empty()) {
    CHECK(d.max_abs_pic == doctest::Approx(mx));
    CHECK(d.mean_abs_pic ==
          doctest::Approx(sum / double(m.pair_records.size())));
  }
}

TEST_CASE("true index gaps in diagnostics match a direct scan") {
  const Eigen::Vector3d beta_true(0.5, 0.5, -0.5);
  const Sample s = gaussian_logit_sample(90, 3, 97, beta_true);
  const CenteredSample cs = center(s);
  const IndexFit f = fit(cs, ScoreFamily::logistic());
  const EligibilityGraph g = build_graph(
      cs, f, f.c_inv_info, {PolicyKind::picse_narrowed, std::nullopt});
  const MatchResult m = nn_match_replacement(g, cs);
  const MatchDiagnostics d =
      match_diagnostics(m, g, cs, Eigen::VectorXd(beta_true), f.beta);
  REQUIRE(d.max_true_index_gap.has_value());
  REQUIRE(d.max_pic_error.has_value());
  const Eigen::VectorXd ti = cs.sample.x * beta_true;
  double gap = 0.0;
  for (const auto& st : m.strata)
    for (size_t a = 0; a < st.size(); ++a)
      for (size_t b = a + 1; b < st.size(); ++b)
        gap = std::max(gap, std::abs(ti[st[a]] - ti[st[b]]));
  CHECK(*d.max_true_index_gap == doctest::Approx(gap));
}
