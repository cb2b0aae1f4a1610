// Command-line front end wiring data -> model -> train -> eval.
// Exit codes: 0 success, 2 config error, 3 data error, 4 numeric failure.
#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include "diffnet/checkpoint.hpp"
#include "diffnet/config.hpp"
#include "diffnet/data.hpp"
#include "diffnet/eval.hpp"
#include "diffnet/gradcheck.hpp"
#include "diffnet/model.hpp"
#include "diffnet/model_matrix.hpp"
#include "diffnet/reports.hpp"
#include "diffnet/sampling.hpp"
#include "diffnet/train.hpp"

namespace fs = std::filesystem;
using namespace diffnet;

namespace {

struct Dataset {
  HeteroGraph graph;
  InteractionSplit split;
  InteractionSet raw_interactions;
  SocialLinkSet raw_links;
};

Dataset load_dataset(const RunConfig& cfg) {
  Dataset d;
  d.raw_interactions = load_interactions(cfg.data.ratings);
  d.raw_links = load_social_links(cfg.data.links);
  PreprocessOptions opts;
  opts.min_ratings = cfg.data.min_ratings;
  opts.min_links = cfg.data.min_links;
  opts.positive_threshold = cfg.data.positive_threshold;
  d.graph = preprocess(d.raw_interactions, d.raw_links, opts);
  if (!cfg.data.user_features.empty()) {
    auto f = load_features(cfg.data.user_features, d.graph.users);
    if (f.missing > 0)
      std::cerr << "note: " << f.missing << " users zero-filled in the feature matrix\n";
    if (cfg.data.standardize_features) standardize_columns(f.matrix);
    d.graph.user_features = std::move(f.matrix);
  }
  if (!cfg.data.item_features.empty()) {
    auto f = load_features(cfg.data.item_features, d.graph.items);
    if (f.missing > 0)
      std::cerr << "note: " << f.missing << " items zero-filled in the feature matrix\n";
    if (cfg.data.standardize_features) standardize_columns(f.matrix);
    d.graph.item_features = std::move(f.matrix);
  }
  d.split = split(d.graph, cfg.data.test_fraction, cfg.data.validation_fraction, cfg.seeds.data);
  return d;
}

ModelDims dims_of(const HeteroGraph& g) {
  return {g.M, g.N, g.has_user_features() ? static_cast<int>(g.user_features.cols()) : 0,
          g.has_item_features() ? static_cast<int>(g.item_features.cols()) : 0};
}

std::string hash_with_file(const RunConfig& cfg, const std::string& extra_path) {
  std::uint64_t h = 1469598103934665603ULL;
  auto feed = [&](const std::string& s) {
    for (unsigned char ch : s) {
      h ^= ch;
      h *= 1099511628211ULL;
    }
  };
  feed(content_hash(cfg));
  std::ifstream in(extra_path, std::ios::binary);
  if (in) {
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    feed(bytes);
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

EvalOptions eval_options(const RunConfig& cfg) {
  EvalOptions opts;
  opts.n_list = cfg.eval.top_n;
  opts.negatives = cfg.eval.negatives;
  opts.repeats = cfg.eval.repeats;
  opts.seed = cfg.seeds.eval;
  opts.group_boundaries = cfg.eval.groups;
  opts.threads = cfg.threads;
  opts.all_items = cfg.eval.all_items;
  return opts;
}

void write_group_tsv(const std::string& path, const RankingReport& r) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "group\tusers";
  for (int n : r.n_list) out << "\thr@" << n << "\tndcg@" << n;
  out << "\n";
  for (const auto& g : r.groups) {
    out << g.label << '\t' << g.user_count;
    for (std::size_t t = 0; t < r.n_list.size(); ++t) out << '\t' << g.hr[t] << '\t' << g.ndcg[t];
    out << "\n";
  }
}

int cmd_preprocess(const RunConfig& cfg) {
  validate_input_paths(cfg);
  Dataset d = load_dataset(cfg);
  const HeteroGraph& g = d.graph;

  const fs::path outdir = fs::path(cfg.workdir) / "preprocessed";
  fs::create_directories(outdir);

  {
    std::ofstream out(outdir / "interactions.tsv");
    for (int a = 0; a < g.M; ++a)
      for (int i : g.user_items[a]) out << a << '\t' << i << '\n';
  }
  {
    std::ofstream out(outdir / "links.tsv");
    for (int a = 0; a < g.M; ++a)
      for (int b : g.followees[a]) out << a << '\t' << b << '\n';
  }
  {
    std::ofstream out(outdir / "user_id_map.tsv");
    for (int a = 0; a < g.M; ++a) out << g.users.to_raw[a] << '\t' << a << '\n';
  }
  {
    std::ofstream out(outdir / "item_id_map.tsv");
    for (int i = 0; i < g.N; ++i) out << g.items.to_raw[i] << '\t' << i << '\n';
  }

  const double rating_density =
      static_cast<double>(g.interaction_count) / (static_cast<double>(g.M) * g.N);
  const double link_density =
      static_cast<double>(g.link_count) / (static_cast<double>(g.M) * g.M);
  json stats = {{"users", g.M},
                {"items", g.N},
                {"ratings", g.interaction_count},
                {"links", g.link_count},
                {"rating_density", rating_density},
                {"link_density", link_density},
                {"dropped_duplicate_ratings", d.raw_interactions.duplicates},
                {"dropped_self_links", d.raw_links.self_links},
                {"split",
                 {{"train", d.split.train.size()},
                  {"validation", d.split.validation.size()},
                  {"test", d.split.test.size()},
                  {"forced_train_keeps", d.split.forced_train_keeps}}}};
  write_json_file((outdir / "stats.json").string(), stats);

  std::printf("users    %d\n", g.M);
  std::printf("items    %d\n", g.N);
  std::printf("ratings  %zu\n", g.interaction_count);
  std::printf("links    %zu\n", g.link_count);
  std::printf("rating density  %.4f%%\n", 100.0 * rating_density);
  std::printf("link density    %.4f%%\n", 100.0 * link_density);
  std::printf("split    train=%zu validation=%zu test=%zu\n", d.split.train.size(),
              d.split.validation.size(), d.split.test.size());
  std::printf("artifacts written to %s\n", outdir.string().c_str());
  return 0;
}

int cmd_train(RunConfig cfg) {
  validate_input_paths(cfg);
  cfg.model.normalize();
  cfg.model.validate();
  cfg.train.validate();
  Dataset d = load_dataset(cfg);

  const auto t0 = std::chrono::steady_clock::now();
  ParameterSet init = init_parameters(cfg.model, dims_of(d.graph), cfg.seeds.init);
  TrainResult result = train(d.graph, d.split, cfg.model, cfg.train, std::move(init));
  const double train_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const std::string hash = content_hash(cfg);
  const fs::path ckpt_dir = fs::path(cfg.workdir) / "checkpoints";
  const fs::path report_dir = fs::path(cfg.workdir) / "reports";
  fs::create_directories(ckpt_dir);
  fs::create_directories(report_dir);

  const std::string ckpt_path = (ckpt_dir / ("ckpt_" + hash + ".bin")).string();
  save_checkpoint(ckpt_path, {cfg.model, dims_of(d.graph), cfg.seeds.init, result.best_params});
  write_train_log_jsonl((report_dir / ("train_log_" + hash + ".jsonl")).string(), result.log);

  json epochs = json::array();
  for (const auto& e : result.log.epochs) epochs.push_back(to_json(e));
  json record = {{"config", run_config_to_json(cfg)},
                 {"input_hash", hash},
                 {"checkpoint", ckpt_path},
                 {"train_log", epochs},
                 {"best_epoch", result.log.best_epoch},
                 {"best_val_hr10", result.log.best_val_hr10},
                 {"early_stopped", result.log.early_stopped},
                 {"train_seconds", train_seconds}};
  write_json_file((report_dir / ("experiment_" + hash + ".json")).string(), record);

  std::printf("trained %zu epochs (best epoch %d, validation HR@10 %.4f)\n",
              result.log.epochs.size(), result.log.best_epoch, result.log.best_val_hr10);
  std::printf("checkpoint: %s\n", ckpt_path.c_str());
  return 0;
}

int cmd_evaluate(const RunConfig& cfg, const std::string& checkpoint_path) {
  validate_input_paths(cfg);
  if (!fs::exists(checkpoint_path))
    throw DataError("checkpoint not found: " + checkpoint_path);
  Checkpoint ckpt = load_checkpoint(checkpoint_path);
  Dataset d = load_dataset(cfg);
  const ModelDims dims = dims_of(d.graph);
  if (dims.M != ckpt.dims.M || dims.N != ckpt.dims.N || dims.d1 != ckpt.dims.d1 ||
      dims.d2 != ckpt.dims.d2)
    throw DataError("checkpoint dimensions do not match the preprocessed dataset");

  const auto t0 = std::chrono::steady_clock::now();
  RankingReport report =
      evaluate(d.graph, d.split, ckpt.params, ckpt.config, eval_options(cfg), Partition::Test);
  DiffusionGraph dg = DiffusionGraph::training_graph(d.graph, d.split);
  AttentionStats stats = attention_stats(forward_all(dg, ckpt.params, ckpt.config), dg);
  const double eval_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  json out = to_json(report);
  out["attention"] = to_json(stats);
  out["checkpoint"] = fs::path(checkpoint_path).filename().string();
  out["variant"] = to_string(ckpt.config.variant);

  const fs::path report_dir = fs::path(cfg.workdir) / "reports";
  fs::create_directories(report_dir);
  const std::string hash = hash_with_file(cfg, checkpoint_path);
  const std::string path = (report_dir / ("eval_" + hash + ".json")).string();
  write_json_file(path, out);
  if (!report.groups.empty())
    write_group_tsv((report_dir / ("eval_" + hash + "_groups.tsv")).string(), report);

  json record = {{"config", run_config_to_json(cfg)},
                 {"input_hash", content_hash(cfg)},
                 {"checkpoint", checkpoint_path},
                 {"ranking_report", to_json(report)},
                 {"attention_stats", to_json(stats)},
                 {"eval_seconds", eval_seconds}};
  write_json_file((report_dir / ("experiment_eval_" + hash + ".json")).string(), record);

  for (std::size_t t = 0; t < report.n_list.size(); ++t)
    std::printf("HR@%-3d %.4f +- %.4f   NDCG@%-3d %.4f +- %.4f\n", report.n_list[t],
                report.hr_mean[t], report.hr_std[t], report.n_list[t], report.ndcg_mean[t],
                report.ndcg_std[t]);
  const std::size_t show = report.n_list.size() > 1 ? 1 : 0;
  for (const auto& g : report.groups)
    std::printf("group %-10s users=%-5d HR@%d %.4f\n", g.label.c_str(), g.user_count,
                report.n_list[show], g.hr[show]);
  std::printf("report: %s\n", path.c_str());
  return 0;
}

int cmd_export_attention(const RunConfig& cfg, const std::string& checkpoint_path) {
  validate_input_paths(cfg);
  if (!fs::exists(checkpoint_path))
    throw DataError("checkpoint not found: " + checkpoint_path);
  Checkpoint ckpt = load_checkpoint(checkpoint_path);
  Dataset d = load_dataset(cfg);
  DiffusionGraph dg = DiffusionGraph::training_graph(d.graph, d.split);
  AttentionStats stats = attention_stats(forward_all(dg, ckpt.params, ckpt.config), dg);

  const fs::path report_dir = fs::path(cfg.workdir) / "reports";
  fs::create_directories(report_dir);
  const std::string hash = hash_with_file(cfg, checkpoint_path);
  const std::string path = (report_dir / ("attention_" + hash + ".json")).string();
  write_json_file(path, to_json(stats));

  std::printf("layer  social mean (var)      interest mean (var)    users\n");
  for (const auto& l : stats.layers)
    std::printf("k=%-4d %.4f (%.6f)      %.4f (%.6f)      %zu\n", l.layer, l.social_mean,
                l.social_var, l.interest_mean, l.interest_var, l.included_users);
  std::printf("report: %s\n", path.c_str());
  return 0;
}

int cmd_check_gradients(const RunConfig& cfg, const std::string& variant_filter, double eps,
                        int samples, std::uint64_t seed) {
  struct Cell {
    Variant variant;
    AttentionMode node;
    AttentionMode graph;
  };
  std::vector<Cell> grid;
  for (Variant v : {Variant::Bpr, Variant::DiffNet, Variant::DiffNetPP})
    for (AttentionMode n : {AttentionMode::Avg, AttentionMode::Att})
      for (AttentionMode g : {AttentionMode::Avg, AttentionMode::Att})
        if (variant_filter.empty() || to_string(v) == variant_filter)
          grid.push_back({v, n, g});
  if (grid.empty()) throw ConfigError("check-gradients: unknown variant " + variant_filter);

  Rng rng(mix_seed(seed, 0x6d));
  // micro model: one random graph shared by all cells
  std::vector<std::pair<int, int>> interest, social;
  const int M = 8, N = 12;
  std::set<std::pair<int, int>> seen;
  for (int i = 0; i < N; ++i) {
    const int a = rng.uniform_int(M);
    interest.emplace_back(a, i);
    seen.emplace(a, i);
  }
  for (int a = 0; a < M; ++a)
    for (int i = 0; i < N; ++i)
      if (rng.uniform_real() < 0.25 && seen.emplace(a, i).second) interest.emplace_back(a, i);
  for (int a = 0; a < M; ++a)
    for (int b = 0; b < M; ++b)
      if (a != b && rng.uniform_real() < 0.25) social.emplace_back(a, b);
  DiffusionGraph g = DiffusionGraph::from_edges(M, N, interest, social);

  auto users = std::make_shared<std::vector<int>>(std::vector<int>{0, 1, 2, 3});
  auto pos = std::make_shared<std::vector<int>>(std::vector<int>{0, 1, 2, 3});
  auto neg = std::make_shared<std::vector<int>>(std::vector<int>{4, 5, 6, 7});

  json cells = json::array();
  double worst = 0.0;
  for (const Cell& cell : grid) {
    ModelConfig mc;
    mc.variant = cell.variant;
    mc.D = 4;
    mc.K = 2;
    mc.node_attention = cell.node;
    mc.graph_attention = cell.graph;
    mc.normalize();
    ParameterSet params = init_parameters(mc, {M, N, 0, 0}, mix_seed(seed, 0xd1));
    for (std::size_t i = 0; i < params.count(); ++i)
      for (std::size_t j = 0; j < params.tensor(i).numel(); ++j) params.tensor(i)[j] *= 20.0;

    auto loss_of = [&](const ParameterSet& p) {
      Tape tape;
      TapeBinding bind(tape, p);
      auto fwd = forward_on_tape(tape, bind, g, mc);
      ValueId loss = bpr_pairwise_loss(tape, score_on_tape(tape, fwd, users, pos),
                                       score_on_tape(tape, fwd, users, neg));
      return tape.value(tape.add(loss, l2_penalty(tape, bind, 0.01)))[0];
    };
    Tape tape;
    TapeBinding bind(tape, params);
    auto fwd = forward_on_tape(tape, bind, g, mc);
    ValueId loss = bpr_pairwise_loss(tape, score_on_tape(tape, fwd, users, pos),
                                     score_on_tape(tape, fwd, users, neg));
    loss = tape.add(loss, l2_penalty(tape, bind, 0.01));
    tape.backward(loss);
    auto report =
        finite_difference_audit(loss_of, params, bind.gradients(), samples, eps, seed);

    json arrays = json::object();
    for (const auto& [name, err] : report.per_array_max) arrays[name] = err;
    cells.push_back({{"variant", to_string(cell.variant)},
                     {"node_attention", to_string(cell.node)},
                     {"graph_attention", to_string(cell.graph)},
                     {"max_rel_error", report.max_rel_error},
                     {"per_array_max", arrays}});
    worst = std::max(worst, report.max_rel_error);
    std::printf("%-10s node=%-4s graph=%-4s  max rel error %.3e\n",
                to_string(cell.variant).c_str(), to_string(cell.node).c_str(),
                to_string(cell.graph).c_str(), report.max_rel_error);
  }

  const fs::path report_dir = fs::path(cfg.workdir) / "reports";
  fs::create_directories(report_dir);
  write_json_file((report_dir / "gradient_audit.json").string(),
                  {{"cells", cells}, {"max_rel_error", worst}, {"eps", eps}});
  std::printf("overall max rel error %.3e (tolerance 1e-3)\n", worst);
  if (worst >= 1e-3) throw NumericError("gradient audit exceeded tolerance");
  return 0;
}

int cmd_ablate(RunConfig cfg, const std::vector<int>& k_grid,
               const std::vector<std::string>& att_grid) {
  validate_input_paths(cfg);
  Dataset d = load_dataset(cfg);

  std::vector<AttentionMode> modes;
  for (const auto& s : att_grid) modes.push_back(config_detail::parse_attention(s));

  json rows = json::array();
  std::printf("%-3s %-9s %-10s %-8s %-8s\n", "K", "node_att", "graph_att", "HR@10", "NDCG@10");
  for (int k : k_grid) {
    for (AttentionMode node : modes) {
      for (AttentionMode graph : modes) {
        ModelConfig mc = cfg.model;
        mc.variant = k == 0 ? Variant::Bpr : Variant::DiffNetPP;
        mc.K = k;
        mc.node_attention = node;
        mc.graph_attention = graph;
        mc.normalize();
        ParameterSet init = init_parameters(mc, dims_of(d.graph), cfg.seeds.init);
        TrainConfig tc = cfg.train;
        tc.seed = cfg.seeds.train;
        TrainResult result = train(d.graph, d.split, mc, tc, std::move(init));

        EvalOptions opts = eval_options(cfg);
        opts.n_list = {10};
        RankingReport report =
            evaluate(d.graph, d.split, result.best_params, mc, opts, Partition::Test);
        rows.push_back({{"k", k},
                        {"node_attention", to_string(node)},
                        {"graph_attention", to_string(graph)},
                        {"hr10", report.hr_at(10)},
                        {"ndcg10", report.ndcg_at(10)},
                        {"epochs", result.log.epochs.size()}});
        std::printf("%-3d %-9s %-10s %-8.4f %-8.4f\n", k, to_string(node).c_str(),
                    to_string(graph).c_str(), report.hr_at(10), report.ndcg_at(10));
        if (k == 0) break;  // attention plays no role at depth zero
      }
      if (k == 0) break;
    }
  }

  const fs::path report_dir = fs::path(cfg.workdir) / "reports";
  fs::create_directories(report_dir);
  const std::string path =
      (report_dir / ("ablation_" + content_hash(cfg) + ".json")).string();
  write_json_file(path, {{"rows", rows}});
  std::printf("report: %s\n", path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"influence-and-interest diffusion recommender"};
  app.require_subcommand(1);

  std::string config_path;
  std::string workdir;
  std::optional<std::uint64_t> master_seed;
  int threads = 0;
  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--seed", master_seed, "master seed (derives data/init/train/eval seeds)");
  app.add_option("--workdir", workdir, "artifact directory (overrides config)");
  app.add_option("--threads", threads, "evaluation threads (overrides config)");

  auto* c_pre = app.add_subcommand("preprocess", "load raw files, filter, write dense artifacts");

  auto* c_train = app.add_subcommand("train", "train a model and write the best checkpoint");
  std::string variant, node_att, graph_att;
  int k_override = -1, dim_override = -1, epochs_override = -1, patience_override = -1;
  double lr_override = -1.0, lambda_override = -1.0;
  c_train->add_option("--variant", variant, "diffnetpp|diffnet|bpr");
  c_train->add_option("--k", k_override, "diffusion depth");
  c_train->add_option("--dim", dim_override, "embedding width");
  c_train->add_option("--node-attention", node_att, "avg|att");
  c_train->add_option("--graph-attention", graph_att, "avg|att");
  c_train->add_option("--epochs", epochs_override, "max epochs");
  c_train->add_option("--patience", patience_override, "early-stop patience");
  c_train->add_option("--lr", lr_override, "learning rate");
  c_train->add_option("--lambda", lambda_override, "L2 penalty");

  auto* c_eval = app.add_subcommand("evaluate", "rank test items under a trained checkpoint");
  std::string checkpoint;
  std::string groups_csv;
  int repeats_override = -1, negatives_override = -1;
  bool all_items = false;
  c_eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  c_eval->add_option("--groups", groups_csv, "sparsity boundaries, e.g. 8,16,32,64");
  c_eval->add_option("--repeats", repeats_override, "candidate resampling repeats");
  c_eval->add_option("--negatives", negatives_override, "sampled negatives per user");
  c_eval->add_flag("--all-items", all_items, "rank against every non-interacted item");

  auto* c_grad = app.add_subcommand("check-gradients",
                                    "finite-difference audit across model variants");
  std::string grad_variant;
  double grad_eps = 1e-5;  // central-difference optimum at 64-bit
  int grad_samples = 25;
  std::uint64_t grad_seed = 9;
  c_grad->add_option("--variant", grad_variant, "restrict to one variant");
  c_grad->add_option("--eps", grad_eps, "finite-difference step");
  c_grad->add_option("--samples", grad_samples, "sampled parameters per cell");
  c_grad->add_option("--audit-seed", grad_seed, "sampling seed");

  auto* c_ablate = app.add_subcommand("ablate", "train/evaluate a depth x attention grid");
  std::string k_grid_csv = "0,1,2,3";
  std::string att_grid_csv = "att";
  c_ablate->add_option("--k-grid", k_grid_csv, "comma-separated depths");
  c_ablate->add_option("--attention-grid", att_grid_csv, "comma-separated modes (avg,att)");

  auto* c_att = app.add_subcommand("export-attention", "graph-level attention statistics");
  std::string att_checkpoint;
  c_att->add_option("--checkpoint", att_checkpoint, "checkpoint file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    RunConfig cfg;
    if (!config_path.empty()) cfg = load_run_config(config_path);
    if (!workdir.empty()) cfg.workdir = workdir;
    if (threads > 0) cfg.threads = threads;
    if (master_seed) {
      cfg.seeds.data = mix_seed(*master_seed, 0);
      cfg.seeds.init = mix_seed(*master_seed, 1);
      cfg.seeds.train = mix_seed(*master_seed, 2);
      cfg.seeds.eval = mix_seed(*master_seed, 3);
    }
    cfg.train.seed = cfg.seeds.train;

    auto parse_csv_ints = [](const std::string& s) {
      std::vector<int> out;
      std::stringstream ss(s);
      std::string tok;
      while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        out.push_back(std::stoi(tok));
      }
      return out;
    };
    auto parse_csv = [](const std::string& s) {
      std::vector<std::string> out;
      std::stringstream ss(s);
      std::string tok;
      while (std::getline(ss, tok, ',')) {
        if (!tok.empty()) out.push_back(tok);
      }
      return out;
    };

    if (c_pre->parsed()) return cmd_preprocess(cfg);
    if (c_train->parsed()) {
      if (!variant.empty()) cfg.model.variant = config_detail::parse_variant(variant);
      if (k_override >= 0) cfg.model.K = k_override;
      if (dim_override > 0) cfg.model.D = dim_override;
      if (!node_att.empty()) cfg.model.node_attention = config_detail::parse_attention(node_att);
      if (!graph_att.empty())
        cfg.model.graph_attention = config_detail::parse_attention(graph_att);
      if (epochs_override > 0) cfg.train.max_epochs = epochs_override;
      if (patience_override > 0) cfg.train.patience = patience_override;
      if (lr_override >= 0.0) cfg.train.learning_rate = lr_override;
      if (lambda_override >= 0.0) cfg.train.lambda_reg = lambda_override;
      return cmd_train(cfg);
    }
    if (c_eval->parsed()) {
      if (!groups_csv.empty()) cfg.eval.groups = parse_csv_ints(groups_csv);
      if (repeats_override > 0) cfg.eval.repeats = repeats_override;
      if (negatives_override > 0) cfg.eval.negatives = negatives_override;
      if (all_items) cfg.eval.all_items = true;
      return cmd_evaluate(cfg, checkpoint);
    }
    if (c_grad->parsed())
      return cmd_check_gradients(cfg, grad_variant, grad_eps, grad_samples, grad_seed);
    if (c_ablate->parsed()) return cmd_ablate(cfg, parse_csv_ints(k_grid_csv),
                                              parse_csv(att_grid_csv));
    if (c_att->parsed()) return cmd_export_attention(cfg, att_checkpoint);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
