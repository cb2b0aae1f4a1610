#pragma once

#include <json.hpp>
#include <filesystem>
#include <string>
#include <vector>

#include "diffnet/errors.hpp"
#include "diffnet/eval.hpp"
#include "diffnet/model.hpp"
#include "diffnet/train.hpp"

namespace diffnet {

using json = nlohmann::json;

struct DataConfig {
  std::string ratings;
  std::string links;
  std::string user_features;  // empty = absent
  std::string item_features;
  int min_ratings = 2;
  int min_links = 2;
  long long positive_threshold = 3;
  double test_fraction = 0.1;
  double validation_fraction = 0.1;
  bool standardize_features = false;
};

struct EvalSettings {
  std::vector<int> top_n = {5, 10, 15};
  int negatives = 1000;
  int repeats = 5;
  std::vector<int> groups;  // sparsity boundaries, empty = no breakdown
  bool all_items = false;   // rank against the full non-interacted item set
};

struct Seeds {
  std::uint64_t data = 1;
  std::uint64_t init = 2;
  std::uint64_t train = 3;
  std::uint64_t eval = 4;
};

struct RunConfig {
  DataConfig data;
  ModelConfig model;
  TrainConfig train;
  EvalSettings eval;
  Seeds seeds;
  std::string workdir = "runs/default";
  int threads = 1;
};

namespace config_detail {

inline void expect_keys(const json& j, const std::vector<std::string>& allowed,
                        const std::string& section) {
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const auto& a : allowed)
      if (key == a) ok = true;
    if (!ok) throw ConfigError("config: unknown key '" + key + "' in section " + section);
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) {
    try {
      out = j.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config: bad value for '") + key + "': " + e.what());
    }
  }
}

inline Variant parse_variant(const std::string& s) {
  if (s == "diffnetpp") return Variant::DiffNetPP;
  if (s == "diffnet") return Variant::DiffNet;
  if (s == "bpr") return Variant::Bpr;
  throw ConfigError("config: unknown variant '" + s + "' (diffnetpp|diffnet|bpr)");
}

inline AttentionMode parse_attention(const std::string& s) {
  if (s == "avg") return AttentionMode::Avg;
  if (s == "att") return AttentionMode::Att;
  throw ConfigError("config: unknown attention mode '" + s + "' (avg|att)");
}

inline GammaInput parse_gamma_input(const std::string& s) {
  if (s == "current") return GammaInput::Current;
  if (s == "previous") return GammaInput::Previous;
  throw ConfigError("config: unknown gamma_input '" + s + "' (current|previous)");
}

}  // namespace config_detail

inline RunConfig run_config_from_json(const json& j) {
  using namespace config_detail;
  RunConfig c;
  expect_keys(j, {"data", "model", "train", "eval", "seeds", "workdir", "threads"}, "root");
  if (j.contains("data")) {
    const json& d = j.at("data");
    expect_keys(d,
                {"ratings", "links", "user_features", "item_features", "min_ratings",
                 "min_links", "positive_threshold", "test_fraction", "validation_fraction",
                 "standardize_features"},
                "data");
    read(d, "ratings", c.data.ratings);
    read(d, "links", c.data.links);
    read(d, "user_features", c.data.user_features);
    read(d, "item_features", c.data.item_features);
    read(d, "min_ratings", c.data.min_ratings);
    read(d, "min_links", c.data.min_links);
    read(d, "positive_threshold", c.data.positive_threshold);
    read(d, "test_fraction", c.data.test_fraction);
    read(d, "validation_fraction", c.data.validation_fraction);
    read(d, "standardize_features", c.data.standardize_features);
  }
  if (j.contains("model")) {
    const json& m = j.at("model");
    expect_keys(m,
                {"variant", "embedding_dim", "depth", "node_attention", "graph_attention",
                 "attention_hidden", "share_attention_mlps", "gamma_input", "use_user_features",
                 "use_item_features"},
                "model");
    std::string s;
    read(m, "variant", s);
    if (!s.empty()) c.model.variant = parse_variant(s);
    read(m, "embedding_dim", c.model.D);
    read(m, "depth", c.model.K);
    s.clear();
    read(m, "node_attention", s);
    if (!s.empty()) c.model.node_attention = parse_attention(s);
    s.clear();
    read(m, "graph_attention", s);
    if (!s.empty()) c.model.graph_attention = parse_attention(s);
    read(m, "attention_hidden", c.model.H);
    read(m, "share_attention_mlps", c.model.share_attention_mlps);
    s.clear();
    read(m, "gamma_input", s);
    if (!s.empty()) c.model.gamma_input = parse_gamma_input(s);
    read(m, "use_user_features", c.model.use_user_features);
    read(m, "use_item_features", c.model.use_item_features);
  }
  if (j.contains("train")) {
    const json& t = j.at("train");
    expect_keys(t,
                {"learning_rate", "batch_size", "negative_ratio", "lambda", "max_epochs",
                 "patience", "validation_negatives"},
                "train");
    read(t, "learning_rate", c.train.learning_rate);
    read(t, "batch_size", c.train.batch_size);
    read(t, "negative_ratio", c.train.neg_ratio);
    read(t, "lambda", c.train.lambda_reg);
    read(t, "max_epochs", c.train.max_epochs);
    read(t, "patience", c.train.patience);
    read(t, "validation_negatives", c.train.val_negatives);
  }
  if (j.contains("eval")) {
    const json& e = j.at("eval");
    expect_keys(e, {"top_n", "negatives", "repeats", "groups", "all_items"}, "eval");
    read(e, "top_n", c.eval.top_n);
    read(e, "negatives", c.eval.negatives);
    read(e, "repeats", c.eval.repeats);
    read(e, "groups", c.eval.groups);
    read(e, "all_items", c.eval.all_items);
  }
  if (j.contains("seeds")) {
    const json& s = j.at("seeds");
    expect_keys(s, {"data", "init", "train", "eval"}, "seeds");
    read(s, "data", c.seeds.data);
    read(s, "init", c.seeds.init);
    read(s, "train", c.seeds.train);
    read(s, "eval", c.seeds.eval);
  }
  read(j, "workdir", c.workdir);
  read(j, "threads", c.threads);
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config: parse error in " + path + ": " + e.what());
  }
  return run_config_from_json(j);
}

// Resolved snapshot; stable key order (nlohmann objects sort keys).
inline json run_config_to_json(const RunConfig& c) {
  json j;
  j["data"] = {{"ratings", c.data.ratings},
               {"links", c.data.links},
               {"user_features", c.data.user_features},
               {"item_features", c.data.item_features},
               {"min_ratings", c.data.min_ratings},
               {"min_links", c.data.min_links},
               {"positive_threshold", c.data.positive_threshold},
               {"test_fraction", c.data.test_fraction},
               {"validation_fraction", c.data.validation_fraction},
               {"standardize_features", c.data.standardize_features}};
  j["model"] = {{"variant", to_string(c.model.variant)},
                {"embedding_dim", c.model.D},
                {"depth", c.model.K},
                {"node_attention", to_string(c.model.node_attention)},
                {"graph_attention", to_string(c.model.graph_attention)},
                {"attention_hidden", c.model.H},
                {"share_attention_mlps", c.model.share_attention_mlps},
                {"gamma_input", to_string(c.model.gamma_input)},
                {"use_user_features", c.model.use_user_features},
                {"use_item_features", c.model.use_item_features}};
  j["train"] = {{"learning_rate", c.train.learning_rate},
                {"batch_size", c.train.batch_size},
                {"negative_ratio", c.train.neg_ratio},
                {"lambda", c.train.lambda_reg},
                {"max_epochs", c.train.max_epochs},
                {"patience", c.train.patience},
                {"validation_negatives", c.train.val_negatives}};
  j["eval"] = {{"top_n", c.eval.top_n},
               {"negatives", c.eval.negatives},
               {"repeats", c.eval.repeats},
               {"groups", c.eval.groups},
               {"all_items", c.eval.all_items}};
  j["seeds"] = {{"data", c.seeds.data},
                {"init", c.seeds.init},
                {"train", c.seeds.train},
                {"eval", c.seeds.eval}};
  j["workdir"] = c.workdir;
  j["threads"] = c.threads;
  return j;
}

inline void validate_input_paths(const RunConfig& c) {
  namespace fs = std::filesystem;
  if (c.data.ratings.empty()) throw ConfigError("config: data.ratings path is required");
  if (c.data.links.empty()) throw ConfigError("config: data.links path is required");
  for (const auto& [label, path] :
       std::vector<std::pair<std::string, std::string>>{{"ratings", c.data.ratings},
                                                        {"links", c.data.links},
                                                        {"user_features", c.data.user_features},
                                                        {"item_features", c.data.item_features}}) {
    if (path.empty()) continue;
    if (!fs::exists(path)) throw ConfigError("config: " + label + " file not found: " + path);
  }
  if (c.model.use_user_features && c.data.user_features.empty())
    throw ConfigError("config: model.use_user_features requires data.user_features");
  if (c.model.use_item_features && c.data.item_features.empty())
    throw ConfigError("config: model.use_item_features requires data.item_features");
  if (c.threads < 1) throw ConfigError("config: threads must be >= 1");
}

// FNV-1a over the resolved config and raw input bytes; names artifacts so
// different runs never silently overwrite each other. Workdir and thread
// count are execution details that cannot change results, so they are
// excluded and identical experiments hash identically wherever they run.
inline std::string content_hash(const RunConfig& c) {
  std::uint64_t h = 1469598103934665603ULL;
  auto feed = [&](const std::string& s) {
    for (unsigned char ch : s) {
      h ^= ch;
      h *= 1099511628211ULL;
    }
  };
  json snapshot = run_config_to_json(c);
  snapshot.erase("workdir");
  snapshot.erase("threads");
  feed(snapshot.dump());
  for (const std::string& path :
       {c.data.ratings, c.data.links, c.data.user_features, c.data.item_features}) {
    if (path.empty()) continue;
    std::ifstream in(path, std::ios::binary);
    if (!in) continue;
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    feed(bytes);
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace diffnet
