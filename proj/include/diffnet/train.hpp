#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "diffnet/errors.hpp"
#include "diffnet/eval.hpp"
#include "diffnet/model.hpp"
#include "diffnet/sampling.hpp"

namespace diffnet {

struct TrainConfig {
  double learning_rate = 0.001;
  int batch_size = 512;
  int neg_ratio = 8;
  double lambda_reg = 0.01;
  int max_epochs = 100;
  int patience = 10;  // epochs without validation HR@10 improvement
  std::uint64_t seed = 1;
  int val_negatives = 1000;

  void validate() const {
    if (learning_rate < 0) throw ConfigError("train: learning rate must be >= 0");
    if (batch_size <= 0) throw ConfigError("train: batch size must be positive");
    if (neg_ratio < 1) throw ConfigError("train: negative ratio must be >= 1");
    if (lambda_reg < 0) throw ConfigError("train: lambda must be >= 0");
    if (max_epochs <= 0) throw ConfigError("train: max epochs must be positive");
    if (patience < 1) throw ConfigError("train: patience must be >= 1");
  }
};

struct EpochLog {
  int epoch = 0;  // 1-based
  double mean_loss = 0.0;
  double val_hr10 = 0.0;
  double val_ndcg10 = 0.0;
  double wall_seconds = 0.0;
  std::uint64_t epoch_seed = 0;
};

struct TrainLog {
  std::vector<EpochLog> epochs;
  int best_epoch = 0;
  double best_val_hr10 = 0.0;
  bool early_stopped = false;
};

// sum over the batch of -ln sigma(pos - neg), via softplus(neg - pos)
inline ValueId bpr_pairwise_loss(Tape& tape, ValueId score_pos, ValueId score_neg) {
  return tape.sum(tape.softplus(tape.sub(score_neg, score_pos)));
}

// lambda * sum of squared Frobenius norms over every parameter array
inline ValueId l2_penalty(Tape& tape, const TapeBinding& bind, double lambda) {
  ValueId total = -1;
  for (const auto& [name, id] : bind.all()) {
    ValueId sq = tape.sum_squares(id);
    total = total < 0 ? sq : tape.add(total, sq);
  }
  return tape.scale(total, lambda);
}

// full training objective for one batch of scored pairs
inline ValueId bpr_loss(Tape& tape, const TapeBinding& bind, ValueId score_pos,
                        ValueId score_neg, double lambda) {
  ValueId loss = bpr_pairwise_loss(tape, score_pos, score_neg);
  if (lambda > 0) loss = tape.add(loss, l2_penalty(tape, bind, lambda));
  return loss;
}

// Adam with bias-corrected first/second moments (0.9 / 0.999, eps 1e-8).
class AdamOptimizer {
 public:
  explicit AdamOptimizer(const ParameterSet& params, double beta1 = 0.9, double beta2 = 0.999,
                         double eps = 1e-8)
      : m_(params.zeros_like()), v_(params.zeros_like()), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(ParameterSet& params, const GradientBundle& grads, double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (std::size_t i = 0; i < params.count(); ++i) {
      Tensor& p = params.tensor(i);
      const Tensor& g = grads.tensor(i);
      if (!g.all_finite())
        throw NumericError("adam: non-finite gradient in array " + params.name(i));
      Tensor& m = m_.tensor(i);
      Tensor& v = v_.tensor(i);
      for (std::size_t j = 0; j < p.numel(); ++j) {
        m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
        v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
        const double mhat = m[j] / bc1;
        const double vhat = v[j] / bc2;
        p[j] -= lr * mhat / (std::sqrt(vhat) + eps_);
      }
    }
  }

  long long steps() const { return t_; }

 private:
  ParameterSet m_;
  ParameterSet v_;
  double beta1_, beta2_, eps_;
  long long t_ = 0;
};

struct TrainResult {
  ParameterSet best_params;
  TrainLog log;
};

// One training batch: full diffusion over the training graph, pairwise loss
// over the triples plus the L2 penalty, one Adam step. Returns the batch loss.
inline double train_batch(ParameterSet& params, AdamOptimizer& opt, const DiffusionGraph& dg,
                          const ModelConfig& mc, const TrainConfig& tc,
                          const std::vector<TrainTriple>& triples, std::size_t begin,
                          std::size_t end) {
  auto users = std::make_shared<std::vector<int>>();
  auto pos = std::make_shared<std::vector<int>>();
  auto neg = std::make_shared<std::vector<int>>();
  for (std::size_t i = begin; i < end; ++i) {
    users->push_back(triples[i].user);
    pos->push_back(triples[i].pos_item);
    neg->push_back(triples[i].neg_item);
  }
  Tape tape;
  TapeBinding bind(tape, params);
  ForwardIds fwd = forward_on_tape(tape, bind, dg, mc);
  ValueId loss = bpr_loss(tape, bind, score_on_tape(tape, fwd, users, pos),
                          score_on_tape(tape, fwd, users, neg), tc.lambda_reg);
  const double loss_value = tape.value(loss)[0];
  tape.backward(loss);
  GradientBundle grads = bind.gradients();
  opt.step(params, grads, tc.learning_rate);
  return loss_value;
}

// Epoch loop: resample negatives, shuffle, batch, validate on HR@10, keep the
// best-validation parameters, stop after `patience` non-improving epochs.
inline TrainResult train(const HeteroGraph& graph, const InteractionSplit& split,
                         const ModelConfig& mc, const TrainConfig& tc, ParameterSet params) {
  mc.validate();
  tc.validate();
  DiffusionGraph dg = DiffusionGraph::training_graph(graph, split);

  AdamOptimizer opt(params);
  TrainResult result;
  result.best_params = params;

  EvalOptions val_opts;
  val_opts.n_list = {10};
  val_opts.negatives = tc.val_negatives;
  val_opts.repeats = 1;
  val_opts.seed = mix_seed(tc.seed, 0x7a1);

  int epochs_since_best = 0;
  for (int epoch = 1; epoch <= tc.max_epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    EpochLog log;
    log.epoch = epoch;
    log.epoch_seed = mix_seed(tc.seed, static_cast<std::uint64_t>(epoch));

    TrainSample sample = sample_train_negatives(split, tc.neg_ratio, log.epoch_seed);
    double loss_sum = 0.0;
    const std::size_t total = sample.triples.size();
    for (std::size_t b = 0; b < total; b += tc.batch_size) {
      const std::size_t e = std::min(total, b + tc.batch_size);
      try {
        loss_sum += train_batch(params, opt, dg, mc, tc, sample.triples, b, e);
      } catch (const NumericError& err) {
        throw NumericError("training diverged at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(b / tc.batch_size) + ": " + err.what());
      }
    }
    log.mean_loss = total > 0 ? loss_sum / static_cast<double>(total) : 0.0;

    RankingReport val =
        evaluate(graph, split, params, mc, val_opts, Partition::Validation);
    log.val_hr10 = val.hr_at(10);
    log.val_ndcg10 = val.ndcg_at(10);
    log.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.log.epochs.push_back(log);

    if (log.val_hr10 > result.log.best_val_hr10 || result.log.best_epoch == 0) {
      result.log.best_val_hr10 = log.val_hr10;
      result.log.best_epoch = epoch;
      result.best_params = params;
      epochs_since_best = 0;
    } else {
      ++epochs_since_best;
      if (epochs_since_best >= tc.patience) {
        result.log.early_stopped = true;
        break;
      }
    }
  }
  return result;
}

inline TrainResult train(const HeteroGraph& graph, const InteractionSplit& split,
                         const ModelConfig& mc, const TrainConfig& tc, std::uint64_t init_seed) {
  ModelDims dims{graph.M, graph.N,
                 graph.has_user_features() ? static_cast<int>(graph.user_features.cols()) : 0,
                 graph.has_item_features() ? static_cast<int>(graph.item_features.cols()) : 0};
  return train(graph, split, mc, tc, init_parameters(mc, dims, init_seed));
}

}  // namespace diffnet
