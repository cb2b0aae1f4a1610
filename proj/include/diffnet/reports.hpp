#pragma once

#include <json.hpp>
#include <fstream>
#include <string>

#include "diffnet/eval.hpp"
#include "diffnet/train.hpp"

namespace diffnet {

inline nlohmann::json to_json(const RankingReport& r) {
  nlohmann::json j;
  j["n_list"] = r.n_list;
  j["evaluated_users"] = r.evaluated_users;
  j["excluded_users"] = r.excluded_users;
  j["short_candidate_sets"] = r.short_candidate_sets;
  nlohmann::json metrics = nlohmann::json::object();
  for (std::size_t t = 0; t < r.n_list.size(); ++t) {
    const std::string n = std::to_string(r.n_list[t]);
    metrics["hr@" + n] = {{"mean", r.hr_mean[t]}, {"std", r.hr_std[t]}};
    metrics["ndcg@" + n] = {{"mean", r.ndcg_mean[t]}, {"std", r.ndcg_std[t]}};
    nlohmann::json hr_reps = nlohmann::json::array(), nd_reps = nlohmann::json::array();
    for (std::size_t rep = 0; rep < r.hr_per_repeat.size(); ++rep) {
      hr_reps.push_back(r.hr_per_repeat[rep][t]);
      nd_reps.push_back(r.ndcg_per_repeat[rep][t]);
    }
    metrics["hr@" + n]["repeats"] = hr_reps;
    metrics["ndcg@" + n]["repeats"] = nd_reps;
  }
  j["metrics"] = metrics;
  if (!r.groups.empty()) {
    nlohmann::json groups = nlohmann::json::array();
    for (const auto& g : r.groups) {
      nlohmann::json gj;
      gj["label"] = g.label;
      gj["users"] = g.user_count;
      for (std::size_t t = 0; t < r.n_list.size(); ++t) {
        gj["hr@" + std::to_string(r.n_list[t])] = g.hr[t];
        gj["ndcg@" + std::to_string(r.n_list[t])] = g.ndcg[t];
      }
      groups.push_back(gj);
    }
    j["sparsity_groups"] = groups;
    j["empty_groups"] = r.empty_groups;
  }
  return j;
}

inline nlohmann::json to_json(const AttentionStats& s) {
  nlohmann::json j;
  j["empty_social_users"] = s.empty_social_users;
  j["empty_interest_users"] = s.empty_interest_users;
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : s.layers) {
    layers.push_back({{"layer", l.layer},
                      {"social_mean", l.social_mean},
                      {"interest_mean", l.interest_mean},
                      {"social_var", l.social_var},
                      {"interest_var", l.interest_var},
                      {"included_users", l.included_users}});
  }
  j["layers"] = layers;
  return j;
}

inline nlohmann::json to_json(const EpochLog& e) {
  return {{"epoch", e.epoch},
          {"loss", e.mean_loss},
          {"val_hr10", e.val_hr10},
          {"val_ndcg10", e.val_ndcg10},
          {"wall_seconds", e.wall_seconds},
          {"epoch_seed", e.epoch_seed}};
}

inline void write_train_log_jsonl(const std::string& path, const TrainLog& log) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  for (const auto& e : log.epochs) out << to_json(e).dump() << "\n";
  out << nlohmann::json({{"best_epoch", log.best_epoch},
                         {"best_val_hr10", log.best_val_hr10},
                         {"early_stopped", log.early_stopped}})
             .dump()
      << "\n";
}

inline void write_json_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << j.dump(2) << "\n";
}

}  // namespace diffnet
