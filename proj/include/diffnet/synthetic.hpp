#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "diffnet/data.hpp"
#include "diffnet/rng.hpp"

namespace diffnet {

// Planted-preference benchmark graph: users belong to interest blocks, rate
// mostly within their block, and follow mostly within-block users. Emitted as
// raw records so it exercises the full load/preprocess/split pipeline.
struct SyntheticSpec {
  int users = 200;
  int items = 300;
  int blocks = 4;
  int ratings_per_user = 25;
  int followees_per_user = 8;
  double homophily = 0.8;          // probability a social edge stays in-block
  double offblock_rating = 0.05;   // probability a rating leaves the block
  // finer taste communities inside each block: members prefer a core window
  // of the block's items, and within-block social edges stay mostly inside
  // the community, so the social graph resolves what ratings alone cannot
  int communities_per_block = 1;   // 1 = plain block structure
  double core_rating = 0.85;       // probability an in-block rating hits the core
  double within_community = 0.9;   // of the in-block social edges
  std::uint64_t seed = 7;
};

struct SyntheticData {
  InteractionSet interactions;
  SocialLinkSet links;
};

inline SyntheticData make_synthetic(const SyntheticSpec& spec) {
  Rng rng(mix_seed(spec.seed, 0x5f9e));
  SyntheticData out;
  const int users_per_block = spec.users / spec.blocks;
  const int items_per_block = spec.items / spec.blocks;
  const int subs = std::max(1, spec.communities_per_block);
  const int users_per_sub = std::max(1, users_per_block / subs);
  const int core_width = std::max(1, items_per_block / subs);
  auto user_block = [&](int u) { return std::min(u / users_per_block, spec.blocks - 1); };
  auto user_sub = [&](int u) {
    return std::min((u % users_per_block) / users_per_sub, subs - 1);
  };

  std::set<std::pair<int, int>> rated;
  for (int u = 0; u < spec.users; ++u) {
    const int block = user_block(u);
    const int core_lo = block * items_per_block + user_sub(u) * core_width;
    int placed = 0;
    int guard = 0;
    while (placed < spec.ratings_per_user && guard++ < 100000) {
      int item;
      if (rng.uniform_real() < spec.offblock_rating) {
        item = rng.uniform_int(spec.items);
      } else if (subs > 1 && rng.uniform_real() < spec.core_rating) {
        item = core_lo + rng.uniform_int(core_width);
      } else {
        item = block * items_per_block + rng.uniform_int(items_per_block);
      }
      if (!rated.emplace(u, item).second) continue;
      const long long value = 4 + rng.uniform_int(2);  // 4 or 5, always positive
      out.interactions.records.push_back(
          {"u" + std::to_string(u), "i" + std::to_string(item), value});
      ++placed;
    }
  }

  std::set<std::pair<int, int>> followed;
  for (int u = 0; u < spec.users; ++u) {
    const int block = user_block(u);
    const int sub_lo = block * users_per_block + user_sub(u) * users_per_sub;
    int placed = 0;
    int guard = 0;
    while (placed < spec.followees_per_user && guard++ < 100000) {
      int b;
      if (rng.uniform_real() < spec.homophily) {
        if (subs > 1 && rng.uniform_real() < spec.within_community) {
          b = sub_lo + rng.uniform_int(users_per_sub);
        } else {
          b = block * users_per_block + rng.uniform_int(users_per_block);
        }
      } else {
        b = rng.uniform_int(spec.users);
      }
      if (b == u) continue;
      if (!followed.emplace(u, b).second) continue;
      out.links.records.push_back({"u" + std::to_string(u), "u" + std::to_string(b)});
      ++placed;
    }
  }
  return out;
}

inline void write_interactions_tsv(const std::string& path, const InteractionSet& set) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  for (const auto& r : set.records)
    out << r.user << '\t' << r.item << '\t' << r.rating << '\n';
}

inline void write_links_tsv(const std::string& path, const SocialLinkSet& set) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  for (const auto& r : set.records) out << r.follower << '\t' << r.followee << '\n';
}

}  // namespace diffnet
