#include "picmatch/matcher.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <queue>
#include <stdexcept>

namespace picmatch {

EligibilityGraph build_graph(const CenteredSample& s, const IndexFit& f,
                             const Eigen::MatrixXd& C,
                             const CaliperPolicy& policy) {
  return build_graph(s, CaliperContext(s, f, C, policy));
}

EligibilityGraph build_graph(const CenteredSample& s,
                             const CaliperContext& ctx) {
  EligibilityGraph g;
  const auto& z = s.sample.z;
  for (int i = 0; i < s.n(); ++i)
    (z[i] == 1.0 ? g.treated_rows : g.control_rows).push_back(i);
  const auto& strat = s.sample.stratum;
  for (int t : g.treated_rows) {
    for (int c : g.control_rows) {
      if (!strat.empty() && strat[t] != strat[c]) continue;
      ++g.pairs_evaluated;
      switch (ctx.check(t, c)) {
        case Verdict::eligible:
          g.edges.push_back({t, c, ctx.pic(t, c), ctx.sed(t, c)});
          break;
        case Verdict::ineligible_pic:
          ++g.excluded_pic;
          break;
        case Verdict::ineligible_sed:
          ++g.excluded_sed;
          break;
      }
    }
  }
  return g;
}

namespace {

void finalize(MatchResult& m, const EligibilityGraph& g) {
  std::sort(m.pair_records.begin(), m.pair_records.end(),
            [](const Edge& a, const Edge& b) {
              return std::tie(a.treated, a.control) <
                     std::tie(b.treated, b.control);
            });
  m.cardinality = 0;
  double sum_abs = 0.0;
  std::map<int, char> used_rows;
  for (const Edge& e : m.pair_records) {
    sum_abs += std::abs(e.pic);
    m.max_abs_pic = std::max(m.max_abs_pic, std::abs(e.pic));
    m.max_sed = std::max(m.max_sed, e.sed);
    used_rows[e.treated] = 1;
    used_rows[e.control] = 1;
    ++m.cardinality;
  }
  m.mean_abs_pic = m.pair_records.empty()
                       ? 0.0
                       : sum_abs / double(m.pair_records.size());
  m.singletons.clear();
  for (int r : g.treated_rows)
    if (!used_rows.count(r)) m.singletons.push_back(r);
  for (int r : g.control_rows)
    if (!used_rows.count(r)) m.singletons.push_back(r);
  std::sort(m.singletons.begin(), m.singletons.end());
}

// Every returned pair must re-pass eligibility; edges in the graph are
// eligible by construction, so membership is the assertion.
void assert_edges_eligible(const std::vector<Edge>& picked,
                           const EligibilityGraph& g) {
  // Graph edges come out of build_graph sorted by (treated, control).
  for (const Edge& e : picked) {
    const auto it = std::lower_bound(
        g.edges.begin(), g.edges.end(), e, [](const Edge& a, const Edge& b) {
          return std::tie(a.treated, a.control) < std::tie(b.treated, b.control);
        });
    if (it == g.edges.end() || it->treated != e.treated ||
        it->control != e.control)
      throw std::logic_error("matched pair fails the active eligibility rule");
  }
}

}  // namespace

MatchResult pair_match_optimal(const EligibilityGraph& g,
                               const CenteredSample& /*s*/) {
  const int T = static_cast<int>(g.treated_rows.size());
  const int C = static_cast<int>(g.control_rows.size());
  std::map<int, int> t_index, c_index;
  for (int k = 0; k < T; ++k) t_index[g.treated_rows[k]] = k;
  for (int k = 0; k < C; ++k) c_index[g.control_rows[k]] = k;

  // Adjacency over compact ids; costs are |pic| >= 0.
  std::vector<std::vector<std::pair<int, double>>> adj(T);
  std::vector<std::vector<std::pair<int, double>>> radj(C);
  for (const Edge& e : g.edges) {
    const int t = t_index.at(e.treated);
    const int c = c_index.at(e.control);
    adj[t].push_back({c, std::abs(e.pic)});
    radj[c].push_back({t, std::abs(e.pic)});
  }

  const double kInf = std::numeric_limits<double>::infinity();
  const int N = T + C;  // node ids: treated t, control T + c
  std::vector<int> match_t(T, -1), match_c(C, -1);
  std::vector<double> pot(N, 0.0);

  // Successive shortest augmenting paths with Dijkstra and potentials.
  // Augmenting to exhaustion yields maximum cardinality; shortest paths at
  // every step make the total cost minimal among such matchings.
  for (;;) {
    std::vector<double> dist(N, kInf);
    std::vector<int> parent(N, -1);
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<Item>> heap;
    for (int t = 0; t < T; ++t) {
      if (match_t[t] == -1) {
        dist[t] = 0.0;
        heap.push({0.0, t});
      }
    }
    while (!heap.empty()) {
      auto [d, u] = heap.top();
      heap.pop();
      if (d > dist[u]) continue;
      if (u < T) {
        const int t = u;
        for (const auto& [c, w] : adj[t]) {
          if (match_t[t] == c) continue;
          const int v = T + c;
          // Rounding can push a reduced cost a few ulps below zero, which
          // would break Dijkstra's label-setting property; clamp at 0.
          const double nd =
              dist[u] + std::max(0.0, w + pot[u] - pot[v]);
          if (nd < dist[v]) {
            dist[v] = nd;
            parent[v] = u;
            heap.push({nd, v});
          }
        }
      } else {
        const int c = u - T;
        const int t = match_c[c];
        if (t >= 0) {
          // Residual (backward) edge of the matched pair.
          double w = 0.0;
          for (const auto& [cc, ww] : adj[t])
            if (cc == c) {
              w = ww;
              break;
            }
          const double nd = dist[u] + std::max(0.0, -w + pot[u] - pot[t]);
          if (nd < dist[t]) {
            dist[t] = nd;
            parent[t] = u;
            heap.push({nd, t});
          }
        }
      }
    }

    // Best reachable unmatched control; index order breaks ties.
    int target = -1;
    for (int c = 0; c < C; ++c) {
      if (match_c[c] != -1 || dist[T + c] == kInf) continue;
      if (target == -1 || dist[T + c] < dist[T + target]) target = c;
    }
    if (target == -1) break;

    const double d_target = dist[T + target];
    for (int u = 0; u < N; ++u)
      if (dist[u] < kInf) pot[u] += std::min(dist[u], d_target);

    // Flip matches along the augmenting path. parent[T+c] is a treated id,
    // parent[t] is a control node id (backward edge) or -1 at the origin.
    for (int c = target;;) {
      const int t = parent[T + c];
      const int prev = parent[t];
      match_c[c] = t;
      match_t[t] = c;
      if (prev == -1) break;
      c = prev - T;
    }
  }

  MatchResult out;
  for (int t = 0; t < T; ++t) {
    if (match_t[t] == -1) continue;
    const int trow = g.treated_rows[t];
    const int crow = g.control_rows[match_t[t]];
    Edge key{trow, crow, 0.0, 0.0};
    const auto it = std::lower_bound(
        g.edges.begin(), g.edges.end(), key, [](const Edge& a, const Edge& b) {
          return std::tie(a.treated, a.control) < std::tie(b.treated, b.control);
        });
    if (it == g.edges.end() || it->treated != trow || it->control != crow)
      throw std::logic_error("assignment produced a pair outside the graph");
    out.pair_records.push_back(*it);
  }
  assert_edges_eligible(out.pair_records, g);
  for (const Edge& e : out.pair_records)
    out.strata.push_back({e.treated, e.control});
  finalize(out, g);
  return out;
}

MatchResult nn_match_replacement(const EligibilityGraph& g,
                                 const CenteredSample& /*s*/) {
  MatchResult out;
  std::map<int, const Edge*> best;  // treated row -> best edge
  for (const Edge& e : g.edges) {
    auto it = best.find(e.treated);
    if (it == best.end() || std::abs(e.pic) < std::abs(it->second->pic) ||
        (std::abs(e.pic) == std::abs(it->second->pic) &&
         e.control < it->second->control)) {
      best[e.treated] = &e;
    }
  }
  std::map<int, std::vector<int>> by_control;
  for (const auto& [trow, e] : best) {
    out.pair_records.push_back(*e);
    by_control[e->control].push_back(trow);
  }
  for (auto& [crow, treats] : by_control) {
    std::sort(treats.begin(), treats.end());
    std::vector<int> stratum = treats;  // m treated : 1 control
    stratum.push_back(crow);
    out.strata.push_back(std::move(stratum));
  }
  assert_edges_eligible(out.pair_records, g);
  finalize(out, g);
  return out;
}

MatchDiagnostics match_diagnostics(
    const MatchResult& m, const EligibilityGraph& g, const CenteredSample& s,
    const std::optional<Eigen::VectorXd>& beta_true,
    const std::optional<Eigen::VectorXd>& beta_hat) {
  MatchDiagnostics d;
  d.max_abs_pic = m.max_abs_pic;
  d.mean_abs_pic = m.mean_abs_pic;
  d.max_sed = m.max_sed;
  d.excluded_pic = g.excluded_pic;
  d.excluded_sed = g.excluded_sed;
  d.cardinality = m.cardinality;
  d.empty = m.empty();
  if (beta_true) {
    double max_gap = 0.0, max_err = 0.0;
    const Eigen::VectorXd true_index = s.sample.x * (*beta_true);
    Eigen::VectorXd err_index;
    if (beta_hat) err_index = s.sample.x * (*beta_hat - *beta_true);
    for (const auto& stratum : m.strata) {
      for (size_t a = 0; a < stratum.size(); ++a) {
        for (size_t b = a + 1; b < stratum.size(); ++b) {
          max_gap = std::max(
              max_gap, std::abs(true_index[stratum[a]] - true_index[stratum[b]]));
          if (beta_hat)
            max_err = std::max(
                max_err, std::abs(err_index[stratum[a]] - err_index[stratum[b]]));
        }
      }
    }
    d.max_true_index_gap = max_gap;
    if (beta_hat) d.max_pic_error = max_err;
  }
  return d;
}

}  // namespace picmatch
