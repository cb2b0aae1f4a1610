#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "diffnet/data.hpp"
#include "diffnet/errors.hpp"
#include "diffnet/rng.hpp"

namespace diffnet {

// Disjoint train/validation/test partitions of the positive pairs, plus each
// user's full positive set for negative-sampling exclusion.
struct InteractionSplit {
  int M = 0;
  int N = 0;
  std::vector<std::pair<int, int>> train;
  std::vector<std::pair<int, int>> validation;
  std::vector<std::pair<int, int>> test;
  std::vector<std::vector<int>> per_user_positives;  // union over partitions, sorted
  std::vector<std::vector<int>> train_items;         // per user, sorted
  std::vector<std::vector<int>> validation_items;    // per user, sorted
  std::vector<std::vector<int>> test_items;          // per user, sorted
  std::size_t forced_train_keeps = 0;

  bool is_positive(int user, int item) const {
    const auto& v = per_user_positives[user];
    return std::binary_search(v.begin(), v.end(), item);
  }
};

namespace detail {

inline void index_partition(const std::vector<std::pair<int, int>>& pairs,
                            std::vector<std::vector<int>>& by_user) {
  for (const auto& [a, i] : pairs) by_user[a].push_back(i);
  for (auto& v : by_user) std::sort(v.begin(), v.end());
}

}  // namespace detail

// Global random split: floor(test_frac * total) pairs to test, then
// floor(val_frac * remainder) to validation. Users left without a training
// positive get one moved back from validation (preferred) or test.
inline InteractionSplit split(const HeteroGraph& graph, double test_frac, double val_frac,
                              std::uint64_t seed) {
  auto pairs = graph.all_positives();
  if (pairs.empty()) throw DataError("split: graph has no positive interactions");
  Rng rng(mix_seed(seed, 0x5917));
  rng.shuffle(pairs);

  const std::size_t total = pairs.size();
  const std::size_t n_test = static_cast<std::size_t>(static_cast<double>(total) * test_frac);
  const std::size_t n_val =
      static_cast<std::size_t>(static_cast<double>(total - n_test) * val_frac);

  InteractionSplit s;
  s.M = graph.M;
  s.N = graph.N;
  s.test.assign(pairs.begin(), pairs.begin() + n_test);
  s.validation.assign(pairs.begin() + n_test, pairs.begin() + n_test + n_val);
  s.train.assign(pairs.begin() + n_test + n_val, pairs.end());

  std::vector<int> train_count(graph.M, 0);
  for (const auto& [a, i] : s.train) ++train_count[a];

  // keep at least one training positive per user
  auto reclaim = [&](std::vector<std::pair<int, int>>& part, int user) {
    int best = -1;
    for (std::size_t k = 0; k < part.size(); ++k)
      if (part[k].first == user && (best < 0 || part[k].second < part[best].second))
        best = static_cast<int>(k);
    if (best < 0) return false;
    s.train.push_back(part[best]);
    part.erase(part.begin() + best);
    return true;
  };
  for (int a = 0; a < graph.M; ++a) {
    if (train_count[a] > 0 || graph.user_items[a].empty()) continue;
    if (reclaim(s.validation, a) || reclaim(s.test, a)) ++s.forced_train_keeps;
  }

  auto by_pair = [](const std::pair<int, int>& x, const std::pair<int, int>& y) { return x < y; };
  std::sort(s.train.begin(), s.train.end(), by_pair);
  std::sort(s.validation.begin(), s.validation.end(), by_pair);
  std::sort(s.test.begin(), s.test.end(), by_pair);

  s.per_user_positives.resize(graph.M);
  s.train_items.resize(graph.M);
  s.validation_items.resize(graph.M);
  s.test_items.resize(graph.M);
  detail::index_partition(s.train, s.train_items);
  detail::index_partition(s.validation, s.validation_items);
  detail::index_partition(s.test, s.test_items);
  for (int a = 0; a < graph.M; ++a) {
    auto& all = s.per_user_positives[a];
    all.insert(all.end(), s.train_items[a].begin(), s.train_items[a].end());
    all.insert(all.end(), s.validation_items[a].begin(), s.validation_items[a].end());
    all.insert(all.end(), s.test_items[a].begin(), s.test_items[a].end());
    std::sort(all.begin(), all.end());
  }
  return s;
}

struct TrainTriple {
  int user;
  int pos_item;
  int neg_item;
};

struct TrainSample {
  std::vector<TrainTriple> triples;  // shuffled
  std::size_t skipped_users = 0;     // positives cover the whole item set
};

// `ratio` pseudo-negatives per training positive, resampled each epoch.
// Negatives are rejection-sampled outside the user's full positive set.
inline TrainSample sample_train_negatives(const InteractionSplit& split, int ratio,
                                          std::uint64_t epoch_seed) {
  if (ratio < 1) throw ConfigError("sample_train_negatives: ratio must be >= 1");
  TrainSample out;
  Rng rng(mix_seed(epoch_seed, 0x7e9));
  const int N = split.N;
  std::vector<bool> warned(split.M, false);
  for (const auto& [a, i] : split.train) {
    const auto& pos = split.per_user_positives[a];
    if (static_cast<int>(pos.size()) >= N) {
      if (!warned[a]) {
        warned[a] = true;
        ++out.skipped_users;
      }
      continue;
    }
    for (int r = 0; r < ratio; ++r) {
      int j = -1;
      for (int attempt = 0; attempt < 64; ++attempt) {
        const int cand = rng.uniform_int(N);
        if (!std::binary_search(pos.begin(), pos.end(), cand)) {
          j = cand;
          break;
        }
      }
      if (j < 0) {
        // dense positive row: pick from the explicit complement
        std::vector<int> complement;
        complement.reserve(N - pos.size());
        for (int cand = 0; cand < N; ++cand)
          if (!std::binary_search(pos.begin(), pos.end(), cand)) complement.push_back(cand);
        j = complement[rng.uniform_int(static_cast<int>(complement.size()))];
      }
      out.triples.push_back({a, i, j});
    }
  }
  rng.shuffle(out.triples);
  return out;
}

struct EvalCandidates {
  std::vector<int> users;                   // users with >= 1 positive in the target partition
  std::vector<std::vector<int>> negatives;  // aligned with `users`, sorted
  std::size_t short_sets = 0;               // users with fewer than `count` non-interacted items
};

// Per evaluated user: `count` items sampled without replacement from the
// items the user never interacted with (all partitions excluded). When fewer
// than `count` such items exist, all of them are used.
inline EvalCandidates sample_eval_negatives(const InteractionSplit& split,
                                            const std::vector<std::vector<int>>& target_items,
                                            int count, std::uint64_t repeat_seed) {
  EvalCandidates out;
  const int N = split.N;
  for (int a = 0; a < split.M; ++a) {
    if (target_items[a].empty()) continue;
    out.users.push_back(a);
    const auto& pos = split.per_user_positives[a];
    std::vector<int> complement;
    complement.reserve(N - pos.size());
    for (int i = 0; i < N; ++i)
      if (!std::binary_search(pos.begin(), pos.end(), i)) complement.push_back(i);
    if (static_cast<int>(complement.size()) <= count) {
      ++out.short_sets;
      out.negatives.push_back(std::move(complement));
      continue;
    }
    Rng rng(mix_seed(repeat_seed, 0xe7a0 + static_cast<std::uint64_t>(a)));
    // partial Fisher-Yates: first `count` entries become the sample
    for (int k = 0; k < count; ++k) {
      const int j = k + rng.uniform_int(static_cast<int>(complement.size()) - k);
      std::swap(complement[k], complement[j]);
    }
    complement.resize(count);
    std::sort(complement.begin(), complement.end());
    out.negatives.push_back(std::move(complement));
  }
  return out;
}

struct SparsityGrouping {
  std::vector<std::string> labels;  // "[0,8)", "[8,16)", ..., "[64,inf)"
  std::vector<int> group_of_user;   // indexed by user
};

// Buckets users by training-positive count into half-open intervals with
// open-ended first and last buckets.
inline SparsityGrouping sparsity_groups(const InteractionSplit& split,
                                        const std::vector<int>& boundaries) {
  for (std::size_t i = 1; i < boundaries.size(); ++i)
    if (boundaries[i] <= boundaries[i - 1])
      throw ConfigError("sparsity_groups: boundaries must be strictly increasing");
  if (boundaries.empty()) throw ConfigError("sparsity_groups: boundaries required");
  SparsityGrouping g;
  g.labels.push_back("[0," + std::to_string(boundaries.front()) + ")");
  for (std::size_t i = 0; i + 1 < boundaries.size(); ++i)
    g.labels.push_back("[" + std::to_string(boundaries[i]) + "," +
                       std::to_string(boundaries[i + 1]) + ")");
  g.labels.push_back("[" + std::to_string(boundaries.back()) + ",inf)");
  g.group_of_user.resize(split.M);
  for (int a = 0; a < split.M; ++a) {
    const int c = static_cast<int>(split.train_items[a].size());
    int idx = 0;
    while (idx < static_cast<int>(boundaries.size()) && c >= boundaries[idx]) ++idx;
    g.group_of_user[a] = idx;
  }
  return g;
}

}  // namespace diffnet
