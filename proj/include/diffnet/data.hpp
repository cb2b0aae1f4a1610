#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "diffnet/errors.hpp"
#include "diffnet/tensor.hpp"

namespace diffnet {

struct InteractionRecord {
  std::string user;
  std::string item;
  long long rating = 0;
};

struct InteractionSet {
  std::vector<InteractionRecord> records;  // deduplicated on (user, item), first kept
  std::size_t malformed = 0;
  std::size_t duplicates = 0;
};

struct LinkRecord {
  std::string follower;
  std::string followee;
};

struct SocialLinkSet {
  std::vector<LinkRecord> records;  // directed, deduplicated, no self-links
  std::size_t malformed = 0;
  std::size_t duplicates = 0;
  std::size_t self_links = 0;
};

struct IdMap {
  std::vector<std::string> to_raw;
  std::unordered_map<std::string, int> to_dense;

  int add(const std::string& raw) {
    auto it = to_dense.find(raw);
    if (it != to_dense.end()) return it->second;
    const int id = static_cast<int>(to_raw.size());
    to_dense.emplace(raw, id);
    to_raw.push_back(raw);
    return id;
  }
  int lookup(const std::string& raw) const {
    auto it = to_dense.find(raw);
    return it == to_dense.end() ? -1 : it->second;
  }
  std::size_t size() const { return to_raw.size(); }
};

// The combined input graph: social adjacency S (row a = followees of a),
// binary interest adjacency R, optional feature matrices, id vocabularies.
struct HeteroGraph {
  int M = 0;  // users
  int N = 0;  // items
  std::vector<std::vector<int>> user_items;  // R_a, sorted
  std::vector<std::vector<int>> item_users;  // R_i, sorted
  std::vector<std::vector<int>> followees;   // S_a, sorted
  std::vector<std::vector<int>> followers;   // inverse of S, sorted
  Tensor user_features;  // M x d1, empty when absent
  Tensor item_features;  // N x d2, empty when absent
  IdMap users;
  IdMap items;

  std::size_t interaction_count = 0;
  std::size_t link_count = 0;

  bool has_user_features() const { return user_features.numel() > 0; }
  bool has_item_features() const { return item_features.numel() > 0; }

  std::vector<std::pair<int, int>> all_positives() const {
    std::vector<std::pair<int, int>> out;
    out.reserve(interaction_count);
    for (int a = 0; a < M; ++a)
      for (int i : user_items[a]) out.emplace_back(a, i);
    return out;
  }
};

struct ColumnSpec {
  char delimiter = '\0';  // '\0' = any run of whitespace
  std::size_t max_malformed = 0;
};

namespace detail {

inline std::vector<std::string> split_fields(const std::string& line, char delim) {
  std::vector<std::string> fields;
  if (delim == '\0') {
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) fields.push_back(tok);
  } else {
    std::string tok;
    std::istringstream ss(line);
    while (std::getline(ss, tok, delim)) fields.push_back(tok);
  }
  return fields;
}

inline bool parse_int(const std::string& s, long long& out) {
  if (s.empty()) return false;
  std::size_t pos = 0;
  try {
    out = std::stoll(s, &pos);
  } catch (...) {
    return false;
  }
  return pos == s.size();
}

inline bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  std::size_t pos = 0;
  try {
    out = std::stod(s, &pos);
  } catch (...) {
    return false;
  }
  return pos == s.size();
}

inline std::ifstream open_or_throw(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path);
  return in;
}

inline bool blank(const std::string& line) {
  return line.find_first_not_of(" \t\r\n") == std::string::npos;
}

}  // namespace detail

// TSV columns: user_id, item_id, rating; trailing columns ignored.
inline InteractionSet load_interactions(const std::string& path, ColumnSpec spec = {}) {
  auto in = detail::open_or_throw(path);
  InteractionSet out;
  std::set<std::pair<std::string, std::string>> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::blank(line)) continue;
    auto fields = detail::split_fields(line, spec.delimiter);
    long long rating = 0;
    if (fields.size() < 3 || !detail::parse_int(fields[2], rating)) {
      ++out.malformed;
      if (out.malformed > spec.max_malformed)
        throw DataError(path + ": malformed row at line " + std::to_string(line_no));
      continue;
    }
    if (!seen.emplace(fields[0], fields[1]).second) {
      ++out.duplicates;
      continue;
    }
    out.records.push_back({fields[0], fields[1], rating});
  }
  return out;
}

// TSV columns: follower_id, followee_id. Self-links dropped and counted.
inline SocialLinkSet load_social_links(const std::string& path, ColumnSpec spec = {}) {
  auto in = detail::open_or_throw(path);
  SocialLinkSet out;
  std::set<std::pair<std::string, std::string>> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::blank(line)) continue;
    auto fields = detail::split_fields(line, spec.delimiter);
    if (fields.size() < 2) {
      ++out.malformed;
      if (out.malformed > spec.max_malformed)
        throw DataError(path + ": malformed row at line " + std::to_string(line_no));
      continue;
    }
    if (fields[0] == fields[1]) {
      ++out.self_links;
      continue;
    }
    if (!seen.emplace(fields[0], fields[1]).second) {
      ++out.duplicates;
      continue;
    }
    out.records.push_back({fields[0], fields[1]});
  }
  return out;
}

struct FeatureLoad {
  Tensor matrix;            // aligned to the id map, zero rows for missing ids
  std::size_t width = 0;
  std::size_t dropped = 0;  // file rows whose id is not in the graph
  std::size_t missing = 0;  // graph entities with no feature row (zero-filled)
};

// TSV columns: id, then one field of comma-separated decimal floats.
inline FeatureLoad load_features(const std::string& path, const IdMap& ids,
                                 ColumnSpec spec = {}) {
  auto in = detail::open_or_throw(path);
  FeatureLoad out;
  std::vector<std::vector<double>> rows(ids.size());
  std::vector<bool> present(ids.size(), false);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::blank(line)) continue;
    auto fields = detail::split_fields(line, spec.delimiter);
    if (fields.size() < 2)
      throw DataError(path + ": malformed feature row at line " + std::to_string(line_no));
    std::vector<double> vec;
    std::string tok;
    std::istringstream vs(fields[1]);
    while (std::getline(vs, tok, ',')) {
      double v = 0.0;
      if (!detail::parse_double(tok, v))
        throw DataError(path + ": bad float at line " + std::to_string(line_no));
      vec.push_back(v);
    }
    if (out.width == 0) out.width = vec.size();
    if (vec.size() != out.width)
      throw DataError(path + ": feature width " + std::to_string(vec.size()) + " at line " +
                      std::to_string(line_no) + " differs from " + std::to_string(out.width));
    const int dense = ids.lookup(fields[0]);
    if (dense < 0) {
      ++out.dropped;
      continue;
    }
    rows[dense] = std::move(vec);
    present[dense] = true;
  }
  if (out.width == 0) throw DataError(path + ": no feature rows");
  out.matrix = Tensor::zeros(ids.size(), out.width);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (!present[r]) {
      ++out.missing;
      continue;
    }
    for (std::size_t c = 0; c < out.width; ++c) out.matrix.at(r, c) = rows[r][c];
  }
  return out;
}

// In-place per-column standardization to zero mean / unit variance
// (columns with zero variance are left centered).
inline void standardize_columns(Tensor& m) {
  if (m.numel() == 0) return;
  for (std::size_t c = 0; c < m.cols(); ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < m.rows(); ++r) mean += m.at(r, c);
    mean /= static_cast<double>(m.rows());
    double var = 0.0;
    for (std::size_t r = 0; r < m.rows(); ++r) {
      const double d = m.at(r, c) - mean;
      var += d * d;
    }
    var /= static_cast<double>(m.rows());
    const double sd = std::sqrt(var);
    for (std::size_t r = 0; r < m.rows(); ++r) {
      m.at(r, c) -= mean;
      if (sd > 0.0) m.at(r, c) /= sd;
    }
  }
}

struct PreprocessOptions {
  int min_ratings = 2;
  int min_links = 2;
  long long positive_threshold = 3;  // rating > threshold becomes a positive edge
};

// Binarize ratings, then iterate user/item filtering to a fixed point:
// users need >= min_ratings positives AND >= min_links incident link edges,
// items need >= min_ratings raters, all counted within the surviving graph.
inline HeteroGraph preprocess(const InteractionSet& interactions, const SocialLinkSet& links,
                              PreprocessOptions opts = {}) {
  // raw-id indexed working sets
  std::unordered_map<std::string, std::vector<int>> user_pos;  // indices into positives
  std::vector<std::pair<std::string, std::string>> positives;
  for (const auto& r : interactions.records) {
    if (r.rating > opts.positive_threshold) {
      user_pos[r.user].push_back(static_cast<int>(positives.size()));
      positives.emplace_back(r.user, r.item);
    }
  }
  std::unordered_map<std::string, std::vector<int>> item_pos;
  for (std::size_t e = 0; e < positives.size(); ++e)
    item_pos[positives[e].second].push_back(static_cast<int>(e));

  std::unordered_map<std::string, std::vector<std::size_t>> user_links;  // incident edges
  for (std::size_t e = 0; e < links.records.size(); ++e) {
    user_links[links.records[e].follower].push_back(e);
    user_links[links.records[e].followee].push_back(e);
  }

  std::unordered_set<std::string> dead_users, dead_items;
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& [user, edges] : user_pos) {
      if (dead_users.count(user)) continue;
      int ratings = 0;
      for (int e : edges)
        if (!dead_items.count(positives[e].second)) ++ratings;
      int link_deg = 0;
      auto lit = user_links.find(user);
      if (lit != user_links.end()) {
        for (std::size_t e : lit->second) {
          const auto& l = links.records[e];
          if (!dead_users.count(l.follower) && !dead_users.count(l.followee)) ++link_deg;
        }
      }
      if (ratings < opts.min_ratings || link_deg < opts.min_links) {
        dead_users.insert(user);
        changed = true;
      }
    }
    // users appearing only in the link file have zero ratings and are dead by
    // construction; mark them so link degrees of their neighbors drop
    for (const auto& [user, edges] : user_links) {
      if (!dead_users.count(user) && !user_pos.count(user)) {
        dead_users.insert(user);
        changed = true;
      }
    }
    for (const auto& [item, edges] : item_pos) {
      if (dead_items.count(item)) continue;
      int raters = 0;
      for (int e : edges)
        if (!dead_users.count(positives[e].first)) ++raters;
      if (raters < opts.min_ratings) {
        dead_items.insert(item);
        changed = true;
      }
    }
  }

  HeteroGraph g;
  for (const auto& [user, item] : positives) {
    if (dead_users.count(user) || dead_items.count(item)) continue;
    const int a = g.users.add(user);
    const int i = g.items.add(item);
    g.M = static_cast<int>(g.users.size());
    g.N = static_cast<int>(g.items.size());
    if (static_cast<int>(g.user_items.size()) < g.M) g.user_items.resize(g.M);
    if (static_cast<int>(g.item_users.size()) < g.N) g.item_users.resize(g.N);
    g.user_items[a].push_back(i);
    g.item_users[i].push_back(a);
    ++g.interaction_count;
  }
  if (g.M == 0 || g.N == 0) throw DataError("preprocess: graph is empty after filtering");

  g.followees.resize(g.M);
  g.followers.resize(g.M);
  for (const auto& l : links.records) {
    const int a = g.users.lookup(l.follower);
    const int b = g.users.lookup(l.followee);
    if (a < 0 || b < 0) continue;
    g.followees[a].push_back(b);
    g.followers[b].push_back(a);
    ++g.link_count;
  }
  for (auto& v : g.user_items) std::sort(v.begin(), v.end());
  for (auto& v : g.item_users) std::sort(v.begin(), v.end());
  for (auto& v : g.followees) std::sort(v.begin(), v.end());
  for (auto& v : g.followers) std::sort(v.begin(), v.end());
  return g;
}

}  // namespace diffnet
