#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "diffnet/gradcheck.hpp"
#include "diffnet/synthetic.hpp"
#include "diffnet/train.hpp"
#include "oracle.hpp"

using namespace diffnet;

namespace {

struct SmallProblem {
  HeteroGraph graph;
  InteractionSplit split;
};

SmallProblem small_problem(std::uint64_t seed = 7) {
  SyntheticSpec spec;
  spec.users = 60;
  spec.items = 80;
  spec.blocks = 4;
  spec.ratings_per_user = 10;
  spec.followees_per_user = 4;
  spec.seed = seed;
  auto data = make_synthetic(spec);
  SmallProblem p;
  p.graph = preprocess(data.interactions, data.links);
  p.split = split(p.graph, 0.1, 0.1, seed);
  return p;
}

}  // namespace

TEST_CASE("pairwise loss values match the closed forms") {
  Tape tape;
  ValueId pos = tape.leaf(Tensor::vector({1.0, 2.0, 0.5}));
  ValueId neg = tape.leaf(Tensor::vector({1.0, 2.0 - std::log(3.0), 0.5 - 1000.0}));
  ValueId loss = bpr_pairwise_loss(tape, pos, neg);
  // equal scores -> ln 2; margin ln 3 -> -ln(3/4); huge margin -> ~0
  const double expected = std::log(2.0) + 0.287682072451781 + 0.0;
  CHECK(tape.value(loss)[0] == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("pairwise loss strictly decreases in the score margin") {
  double prev = 1e300;
  for (double margin = -5.0; margin <= 5.0; margin += 0.25) {
    Tape tape;
    ValueId pos = tape.leaf(Tensor::vector({margin}));
    ValueId neg = tape.leaf(Tensor::vector({0.0}));
    const double value = tape.value(bpr_pairwise_loss(tape, pos, neg))[0];
    CHECK(value < prev);
    prev = value;
  }
}

TEST_CASE("regularization-only gradient equals 2 lambda theta exactly") {
  Rng rng(4);
  ParameterSet p;
  Tensor t = Tensor::zeros(3, 4);
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.normal();
  p.add("P", t);
  Tensor q = Tensor::zeros(5);
  for (std::size_t i = 0; i < q.numel(); ++i) q[i] = rng.normal();
  p.add("Q", q);

  const double lambda = 0.01;
  Tape tape;
  TapeBinding bind(tape, p);
  tape.backward(l2_penalty(tape, bind, lambda));
  GradientBundle g = bind.gradients();
  for (std::size_t i = 0; i < p.count(); ++i)
    for (std::size_t j = 0; j < p.tensor(i).numel(); ++j)
      CHECK(g.tensor(i)[j] == 2.0 * lambda * p.tensor(i)[j]);
}

TEST_CASE("adam leaves parameters alone under zero gradients") {
  ParameterSet p;
  p.add("x", Tensor::vector({1.0, -2.0}));
  ParameterSet before = p;
  AdamOptimizer opt(p);
  opt.step(p, p.zeros_like(), 0.1);
  for (std::size_t i = 0; i < 2; ++i) CHECK(p.at("x")[i] == before.at("x")[i]);
}

TEST_CASE("one adam step from zero state moves by about the learning rate") {
  ParameterSet p;
  p.add("x", Tensor::vector({0.0}));
  GradientBundle g = p.zeros_like();
  g.at("x")[0] = 0.5;
  AdamOptimizer opt(p);
  opt.step(p, g, 0.001);
  // bias-corrected ratio is 1, so the step is lr * g/(|g| + eps) ~ lr
  CHECK(std::abs(p.at("x")[0] + 0.001) < 1e-8);
}

TEST_CASE("adam rejects non-finite gradients") {
  ParameterSet p;
  p.add("x", Tensor::vector({0.0}));
  GradientBundle g = p.zeros_like();
  g.at("x")[0] = std::numeric_limits<double>::quiet_NaN();
  AdamOptimizer opt(p);
  CHECK_THROWS_AS(opt.step(p, g, 0.001), NumericError);
}

TEST_CASE("zero learning rate freezes parameters and patience stops training") {
  auto prob = small_problem();
  ModelConfig mc;
  mc.D = 4;
  mc.K = 1;
  mc.node_attention = AttentionMode::Avg;
  mc.graph_attention = AttentionMode::Avg;
  TrainConfig tc;
  tc.learning_rate = 0.0;
  tc.max_epochs = 10;
  tc.patience = 1;
  tc.seed = 3;
  tc.val_negatives = 100;
  auto result = train(prob.graph, prob.split, mc, tc, 17);

  // frozen validation: first epoch is best, second triggers patience
  CHECK(result.log.epochs.size() == 2);
  CHECK(result.log.early_stopped);
  CHECK(result.log.best_epoch == 1);
  CHECK(result.log.epochs[0].val_hr10 == result.log.epochs[1].val_hr10);

  ParameterSet fresh = init_parameters(mc, {prob.graph.M, prob.graph.N, 0, 0}, 17);
  for (std::size_t i = 0; i < fresh.count(); ++i)
    for (std::size_t j = 0; j < fresh.tensor(i).numel(); ++j)
      CHECK(result.best_params.tensor(i)[j] == fresh.tensor(i)[j]);
}

TEST_CASE("training is reproducible and the loss drops on planted preferences") {
  auto prob = small_problem();
  ModelConfig mc;
  mc.D = 8;
  mc.K = 1;
  mc.node_attention = AttentionMode::Att;
  mc.graph_attention = AttentionMode::Att;
  TrainConfig tc;
  tc.learning_rate = 0.01;
  tc.max_epochs = 5;
  tc.patience = 5;
  tc.seed = 11;
  tc.val_negatives = 100;

  auto r1 = train(prob.graph, prob.split, mc, tc, 21);
  auto r2 = train(prob.graph, prob.split, mc, tc, 21);
  REQUIRE(r1.log.epochs.size() == r2.log.epochs.size());
  for (std::size_t e = 0; e < r1.log.epochs.size(); ++e) {
    CHECK(r1.log.epochs[e].mean_loss == r2.log.epochs[e].mean_loss);
    CHECK(r1.log.epochs[e].val_hr10 == r2.log.epochs[e].val_hr10);
    CHECK(r1.log.epochs[e].epoch_seed == r2.log.epochs[e].epoch_seed);
  }
  for (std::size_t i = 0; i < r1.best_params.count(); ++i)
    for (std::size_t j = 0; j < r1.best_params.tensor(i).numel(); ++j)
      CHECK(r1.best_params.tensor(i)[j] == r2.best_params.tensor(i)[j]);

  CHECK(r1.log.epochs.back().mean_loss < r1.log.epochs.front().mean_loss);
}

TEST_CASE("divergent parameters abort with the offending batch identified") {
  auto prob = small_problem();
  ModelConfig mc;
  mc.D = 4;
  mc.K = 1;
  mc.node_attention = AttentionMode::Avg;
  mc.graph_attention = AttentionMode::Avg;
  TrainConfig tc;
  tc.max_epochs = 1;
  tc.seed = 5;
  ParameterSet p = init_parameters(mc, {prob.graph.M, prob.graph.N, 0, 0}, 9);
  p.at("P")[0] = 1e200;  // overflow in the first forward
  CHECK_THROWS_WITH_AS(train(prob.graph, prob.split, mc, tc, std::move(p)),
                       doctest::Contains("epoch 1"), NumericError);
}

TEST_CASE("full batched loss passes the audit for representative variants") {
  Rng rng(31);
  auto g = oracle::random_micro_graph(rng, 6, 8, 0.3, 0.3);
  auto users = std::make_shared<std::vector<int>>(std::vector<int>{0, 1, 2});
  auto pos = std::make_shared<std::vector<int>>(std::vector<int>{0, 1, 2});
  auto neg = std::make_shared<std::vector<int>>(std::vector<int>{3, 4, 5});

  auto run = [&](Variant variant, AttentionMode node, AttentionMode graph, int K) {
    ModelConfig mc;
    mc.variant = variant;
    mc.D = 4;
    mc.K = K;
    mc.node_attention = node;
    mc.graph_attention = graph;
    mc.normalize();
    ParameterSet p = init_parameters(mc, {g.M, g.N, 0, 0}, 77);
    for (std::size_t i = 0; i < p.count(); ++i)
      for (std::size_t j = 0; j < p.tensor(i).numel(); ++j) p.tensor(i)[j] *= 30.0;

    auto loss_of = [&](const ParameterSet& params) {
      Tape tape;
      TapeBinding bind(tape, params);
      auto fwd = forward_on_tape(tape, bind, g, mc);
      ValueId loss = bpr_pairwise_loss(tape, score_on_tape(tape, fwd, users, pos),
                                       score_on_tape(tape, fwd, users, neg));
      return tape.value(tape.add(loss, l2_penalty(tape, bind, 0.01)))[0];
    };
    Tape tape;
    TapeBinding bind(tape, p);
    auto fwd = forward_on_tape(tape, bind, g, mc);
    ValueId loss = bpr_pairwise_loss(tape, score_on_tape(tape, fwd, users, pos),
                                     score_on_tape(tape, fwd, users, neg));
    loss = tape.add(loss, l2_penalty(tape, bind, 0.01));
    tape.backward(loss);
    auto report = finite_difference_audit(loss_of, p, bind.gradients(), 60, 1e-4, 123);
    CHECK(report.max_rel_error < 1e-3);
  };

  run(Variant::Bpr, AttentionMode::Avg, AttentionMode::Avg, 0);
  run(Variant::DiffNet, AttentionMode::Avg, AttentionMode::Avg, 2);
  run(Variant::DiffNetPP, AttentionMode::Att, AttentionMode::Att, 2);
  run(Variant::DiffNetPP, AttentionMode::Avg, AttentionMode::Att, 1);
}

TEST_CASE("model-loss backward is linear in the loss combination") {
  Rng rng(808);
  auto g = oracle::random_micro_graph(rng, 5, 7, 0.3, 0.3);
  ModelConfig mc;
  mc.D = 4;
  mc.K = 1;
  ParameterSet p = init_parameters(mc, {g.M, g.N, 0, 0}, 5);
  for (std::size_t i = 0; i < p.count(); ++i)
    for (std::size_t j = 0; j < p.tensor(i).numel(); ++j) p.tensor(i)[j] *= 30.0;

  auto users = std::make_shared<std::vector<int>>(std::vector<int>{0, 1});
  auto pos = std::make_shared<std::vector<int>>(std::vector<int>{0, 1});
  auto neg = std::make_shared<std::vector<int>>(std::vector<int>{2, 3});
  const double ca = 0.7, cb = -1.3;

  auto grads_of = [&](int mode) {
    Tape tape;
    TapeBinding bind(tape, p);
    auto fwd = forward_on_tape(tape, bind, g, mc);
    ValueId l1 = bpr_pairwise_loss(tape, score_on_tape(tape, fwd, users, pos),
                                   score_on_tape(tape, fwd, users, neg));
    ValueId l2 = l2_penalty(tape, bind, 0.01);
    ValueId loss = mode == 0 ? l1
                 : mode == 1 ? l2
                             : tape.add(tape.scale(l1, ca), tape.scale(l2, cb));
    tape.backward(loss);
    return bind.gradients();
  };
  GradientBundle g1 = grads_of(0), g2 = grads_of(1), gc = grads_of(2);
  for (std::size_t i = 0; i < gc.count(); ++i)
    for (std::size_t j = 0; j < gc.tensor(i).numel(); ++j)
      CHECK(gc.tensor(i)[j] ==
            doctest::Approx(ca * g1.tensor(i)[j] + cb * g2.tensor(i)[j]).epsilon(1e-10));
}

TEST_CASE("config validation rejects bad settings") {
  TrainConfig tc;
  tc.batch_size = 0;
  CHECK_THROWS_AS(tc.validate(), ConfigError);
  TrainConfig tc2;
  tc2.patience = 0;
  CHECK_THROWS_AS(tc2.validate(), ConfigError);
  ModelConfig mc;
  mc.variant = Variant::Bpr;
  mc.K = 2;
  CHECK_THROWS_AS(mc.validate(), ConfigError);
  mc.normalize();
  CHECK(mc.K == 0);
}
