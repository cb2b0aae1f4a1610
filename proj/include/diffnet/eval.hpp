#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "diffnet/model.hpp"
#include "diffnet/sampling.hpp"

namespace diffnet {

enum class Partition { Validation, Test };

// Candidates sorted by score descending; ties broken by ascending item index.
inline std::vector<int> rank_candidates(const DiffusionState& state, int user,
                                        std::vector<int> candidates) {
  std::vector<std::pair<double, int>> scored;
  scored.reserve(candidates.size());
  for (int item : candidates) scored.emplace_back(state.predict(user, item), item);
  std::sort(scored.begin(), scored.end(), [](const auto& x, const auto& y) {
    if (x.first != y.first) return x.first > y.first;
    return x.second < y.second;
  });
  std::vector<int> ranked;
  ranked.reserve(scored.size());
  for (const auto& [s, item] : scored) ranked.push_back(item);
  return ranked;
}

// |test items in top-N| / |test items|
inline double hr_at_n(const std::vector<int>& ranked, const std::vector<int>& test_items,
                      int n) {
  if (test_items.empty()) throw ConfigError("hr_at_n: empty test set");
  int hits = 0;
  const int top = std::min<int>(n, static_cast<int>(ranked.size()));
  for (int p = 0; p < top; ++p)
    if (std::binary_search(test_items.begin(), test_items.end(), ranked[p])) ++hits;
  return static_cast<double>(hits) / static_cast<double>(test_items.size());
}

// DCG over hit positions (1-based) discounted by 1/log2(p+1), normalized by
// the ideal DCG of min(N, |test|) leading hits.
inline double ndcg_at_n(const std::vector<int>& ranked, const std::vector<int>& test_items,
                        int n) {
  if (test_items.empty()) throw ConfigError("ndcg_at_n: empty test set");
  double dcg = 0.0;
  const int top = std::min<int>(n, static_cast<int>(ranked.size()));
  for (int p = 0; p < top; ++p)
    if (std::binary_search(test_items.begin(), test_items.end(), ranked[p]))
      dcg += 1.0 / std::log2(static_cast<double>(p) + 2.0);
  double idcg = 0.0;
  const int ideal = std::min<int>(n, static_cast<int>(test_items.size()));
  for (int p = 1; p <= ideal; ++p) idcg += 1.0 / std::log2(static_cast<double>(p) + 1.0);
  return dcg / idcg;
}

struct EvalOptions {
  std::vector<int> n_list = {5, 10, 15};
  int negatives = 1000;
  int repeats = 5;
  std::uint64_t seed = 0;
  std::vector<int> group_boundaries;  // empty -> no sparsity breakdown
  int threads = 1;
  bool all_items = false;  // rank against every non-interacted item instead of a sample
};

struct GroupMetrics {
  std::string label;
  int user_count = 0;
  std::vector<double> hr;    // aligned with n_list, mean over repeats
  std::vector<double> ndcg;
};

struct RankingReport {
  std::vector<int> n_list;
  // [repeat][n index]
  std::vector<std::vector<double>> hr_per_repeat;
  std::vector<std::vector<double>> ndcg_per_repeat;
  std::vector<double> hr_mean, hr_std;      // aligned with n_list
  std::vector<double> ndcg_mean, ndcg_std;
  std::vector<GroupMetrics> groups;         // empty groups omitted
  std::vector<std::string> empty_groups;
  std::size_t evaluated_users = 0;
  std::size_t excluded_users = 0;  // no training positive, cannot rank
  std::size_t short_candidate_sets = 0;

  double hr_at(int n) const {
    for (std::size_t i = 0; i < n_list.size(); ++i)
      if (n_list[i] == n) return hr_mean[i];
    throw ConfigError("report: N not evaluated: " + std::to_string(n));
  }
  double ndcg_at(int n) const {
    for (std::size_t i = 0; i < n_list.size(); ++i)
      if (n_list[i] == n) return ndcg_mean[i];
    throw ConfigError("report: N not evaluated: " + std::to_string(n));
  }
};

struct AttentionLayerStats {
  int layer = 0;  // 1-based diffusion layer
  double social_mean = 0.0;
  double interest_mean = 0.0;
  double social_var = 0.0;
  double interest_var = 0.0;
  std::size_t included_users = 0;  // both branches non-empty
};

struct AttentionStats {
  std::vector<AttentionLayerStats> layers;
  std::size_t empty_social_users = 0;
  std::size_t empty_interest_users = 0;
};

// Graph-level attention statistics over users with both branches non-empty.
inline AttentionStats attention_stats(const DiffusionState& state, const DiffusionGraph& g) {
  AttentionStats out;
  for (int a = 0; a < g.M; ++a) {
    if (g.social_deg[a] == 0) ++out.empty_social_users;
    if (g.user_deg[a] == 0) ++out.empty_interest_users;
  }
  for (std::size_t k = 0; k < state.gamma.size(); ++k) {
    AttentionLayerStats st;
    st.layer = static_cast<int>(k) + 1;
    double s1 = 0.0, s2 = 0.0;
    std::vector<double> g1, g2;
    for (int a = 0; a < g.M; ++a) {
      if (g.social_deg[a] == 0 || g.user_deg[a] == 0) continue;
      g1.push_back(state.gamma[k].at(a, 0));
      g2.push_back(state.gamma[k].at(a, 1));
      s1 += g1.back();
      s2 += g2.back();
    }
    st.included_users = g1.size();
    if (!g1.empty()) {
      st.social_mean = s1 / static_cast<double>(g1.size());
      st.interest_mean = s2 / static_cast<double>(g1.size());
      for (std::size_t i = 0; i < g1.size(); ++i) {
        st.social_var += (g1[i] - st.social_mean) * (g1[i] - st.social_mean);
        st.interest_var += (g2[i] - st.interest_mean) * (g2[i] - st.interest_mean);
      }
      st.social_var /= static_cast<double>(g1.size());
      st.interest_var /= static_cast<double>(g1.size());
    }
    out.layers.push_back(st);
  }
  return out;
}

namespace eval_detail {

inline void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  if (threads <= 1 || n < 2) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<int> next{0};
  const int workers = std::min(threads, n);
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&]() {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  for (auto& t : pool) t.join();
}

inline double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace eval_detail

// Ranks each evaluated user's target positives against `negatives` sampled
// non-interacted items, averaged over `repeats` fresh candidate draws.
// Diffusion runs over the training graph only.
inline RankingReport evaluate(const HeteroGraph& graph, const InteractionSplit& split,
                              const ParameterSet& params, const ModelConfig& config,
                              const EvalOptions& opts, Partition target = Partition::Test) {
  if (opts.n_list.empty()) throw ConfigError("evaluate: top-N list is empty");
  for (int n : opts.n_list)
    if (n < 1) throw ConfigError("evaluate: N must be >= 1");
  if (opts.repeats < 1) throw ConfigError("evaluate: repeats must be >= 1");
  if (!opts.all_items && opts.negatives < 1)
    throw ConfigError("evaluate: negatives must be >= 1");
  const auto& target_items =
      target == Partition::Test ? split.test_items : split.validation_items;

  DiffusionGraph dg = DiffusionGraph::training_graph(graph, split);
  const DiffusionState state = forward_all(dg, params, config);

  RankingReport report;
  report.n_list = opts.n_list;

  // users with a target positive but no training positive cannot be ranked
  std::vector<char> usable(split.M, 1);
  for (int a = 0; a < split.M; ++a) {
    if (target_items[a].empty()) continue;
    if (split.train_items[a].empty()) {
      usable[a] = 0;
      ++report.excluded_users;
    }
  }

  SparsityGrouping grouping;
  if (!opts.group_boundaries.empty()) grouping = sparsity_groups(split, opts.group_boundaries);
  const std::size_t n_groups = grouping.labels.size();
  const std::size_t n_n = opts.n_list.size();

  // accumulated per (repeat, group, n); group n_groups == "all users"
  std::vector<std::vector<double>> group_hr_sum, group_ndcg_sum;
  std::vector<std::vector<int>> group_count;

  const int negatives = opts.all_items ? split.N : opts.negatives;
  for (int r = 0; r < opts.repeats; ++r) {
    EvalCandidates cands = sample_eval_negatives(split, target_items, negatives, opts.seed + r);
    report.short_candidate_sets += cands.short_sets;

    std::vector<int> users;
    std::vector<const std::vector<int>*> negs;
    for (std::size_t ui = 0; ui < cands.users.size(); ++ui) {
      if (!usable[cands.users[ui]]) continue;
      users.push_back(cands.users[ui]);
      negs.push_back(&cands.negatives[ui]);
    }
    const int n_users = static_cast<int>(users.size());
    std::vector<std::vector<double>> hr_user(n_users), ndcg_user(n_users);

    eval_detail::parallel_for(n_users, opts.threads, [&](int ui) {
      const int a = users[ui];
      std::vector<int> candidates = *negs[ui];
      candidates.insert(candidates.end(), target_items[a].begin(), target_items[a].end());
      const std::vector<int> ranked = rank_candidates(state, a, std::move(candidates));
      hr_user[ui].resize(n_n);
      ndcg_user[ui].resize(n_n);
      for (std::size_t t = 0; t < n_n; ++t) {
        hr_user[ui][t] = hr_at_n(ranked, target_items[a], opts.n_list[t]);
        ndcg_user[ui][t] = ndcg_at_n(ranked, target_items[a], opts.n_list[t]);
      }
    });

    std::vector<double> hr_sums(n_n, 0.0), ndcg_sums(n_n, 0.0);
    std::vector<std::vector<double>> ghr(n_groups, std::vector<double>(n_n, 0.0));
    std::vector<std::vector<double>> gndcg(n_groups, std::vector<double>(n_n, 0.0));
    std::vector<int> gcount(n_groups, 0);
    for (int ui = 0; ui < n_users; ++ui) {
      for (std::size_t t = 0; t < n_n; ++t) {
        hr_sums[t] += hr_user[ui][t];
        ndcg_sums[t] += ndcg_user[ui][t];
      }
      if (n_groups > 0) {
        const int gidx = grouping.group_of_user[users[ui]];
        ++gcount[gidx];
        for (std::size_t t = 0; t < n_n; ++t) {
          ghr[gidx][t] += hr_user[ui][t];
          gndcg[gidx][t] += ndcg_user[ui][t];
        }
      }
    }
    report.evaluated_users = static_cast<std::size_t>(n_users);
    std::vector<double> hr_row(n_n), ndcg_row(n_n);
    for (std::size_t t = 0; t < n_n; ++t) {
      hr_row[t] = n_users > 0 ? hr_sums[t] / n_users : 0.0;
      ndcg_row[t] = n_users > 0 ? ndcg_sums[t] / n_users : 0.0;
    }
    report.hr_per_repeat.push_back(std::move(hr_row));
    report.ndcg_per_repeat.push_back(std::move(ndcg_row));

    if (n_groups > 0) {
      if (group_hr_sum.empty()) {
        group_hr_sum.assign(n_groups, std::vector<double>(n_n, 0.0));
        group_ndcg_sum.assign(n_groups, std::vector<double>(n_n, 0.0));
        group_count.assign(n_groups, std::vector<int>(1, 0));
      }
      for (std::size_t gi = 0; gi < n_groups; ++gi) {
        if (gcount[gi] == 0) continue;
        for (std::size_t t = 0; t < n_n; ++t) {
          group_hr_sum[gi][t] += ghr[gi][t] / gcount[gi];
          group_ndcg_sum[gi][t] += gndcg[gi][t] / gcount[gi];
        }
        group_count[gi][0] = gcount[gi];
      }
    }
  }

  for (std::size_t t = 0; t < n_n; ++t) {
    std::vector<double> hr_col, ndcg_col;
    for (int r = 0; r < opts.repeats; ++r) {
      hr_col.push_back(report.hr_per_repeat[r][t]);
      ndcg_col.push_back(report.ndcg_per_repeat[r][t]);
    }
    report.hr_mean.push_back(eval_detail::mean_of(hr_col));
    report.hr_std.push_back(eval_detail::sample_std(hr_col));
    report.ndcg_mean.push_back(eval_detail::mean_of(ndcg_col));
    report.ndcg_std.push_back(eval_detail::sample_std(ndcg_col));
  }

  if (n_groups > 0) {
    for (std::size_t gi = 0; gi < n_groups; ++gi) {
      if (group_count[gi][0] == 0) {
        report.empty_groups.push_back(grouping.labels[gi]);
        continue;
      }
      GroupMetrics gm;
      gm.label = grouping.labels[gi];
      gm.user_count = group_count[gi][0];
      for (std::size_t t = 0; t < n_n; ++t) {
        gm.hr.push_back(group_hr_sum[gi][t] / opts.repeats);
        gm.ndcg.push_back(group_ndcg_sum[gi][t] / opts.repeats);
      }
      report.groups.push_back(std::move(gm));
    }
  }
  return report;
}

}  // namespace diffnet
