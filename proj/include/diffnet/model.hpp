#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "diffnet/data.hpp"
#include "diffnet/errors.hpp"
#include "diffnet/params.hpp"
#include "diffnet/rng.hpp"
#include "diffnet/sampling.hpp"
#include "diffnet/tape.hpp"

namespace diffnet {

enum class Variant { DiffNetPP, DiffNet, Bpr };
enum class AttentionMode { Avg, Att };
enum class GammaInput { Current, Previous };

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::DiffNetPP: return "diffnetpp";
    case Variant::DiffNet: return "diffnet";
    case Variant::Bpr: return "bpr";
  }
  return "?";
}
inline std::string to_string(AttentionMode m) { return m == AttentionMode::Avg ? "avg" : "att"; }
inline std::string to_string(GammaInput g) {
  return g == GammaInput::Current ? "current" : "previous";
}

struct ModelConfig {
  Variant variant = Variant::DiffNetPP;
  int D = 64;  // embedding width
  int K = 2;   // diffusion depth
  bool use_user_features = false;
  bool use_item_features = false;
  AttentionMode node_attention = AttentionMode::Att;
  AttentionMode graph_attention = AttentionMode::Att;
  int H = 0;  // attention MLP hidden width, 0 -> D
  bool share_attention_mlps = false;  // one MLP set reused at every depth
  GammaInput gamma_input = GammaInput::Current;
  double mlp_leak = 0.01;

  int hidden() const { return H > 0 ? H : D; }
  int depth_param_sets() const { return K == 0 ? 0 : (share_attention_mlps ? 1 : K); }
  int mlp_set(int k) const { return share_attention_mlps ? 0 : k; }

  // BPR is the zero-depth ablation; normalizing here makes `--variant bpr`
  // force K=0 regardless of the configured depth.
  void normalize() {
    if (variant == Variant::Bpr) K = 0;
  }
  void validate() const {
    if (D <= 0) throw ConfigError("model: embedding dim must be positive");
    if (K < 0) throw ConfigError("model: diffusion depth must be >= 0");
    if (variant == Variant::Bpr && K != 0) throw ConfigError("model: bpr requires K=0");
  }
};

struct ModelDims {
  int M = 0;
  int N = 0;
  int d1 = 0;  // user feature width (0 = none)
  int d2 = 0;  // item feature width
};

// Training-graph view used by the diffusion layers: interest edges come from
// the TRAIN partition only (test/validation edges are prediction targets and
// must not leak into message passing); social edges are all links.
struct DiffusionGraph {
  int M = 0;
  int N = 0;
  std::shared_ptr<std::vector<int>> edge_user;  // interest edge endpoints
  std::shared_ptr<std::vector<int>> edge_item;
  std::shared_ptr<std::vector<int>> soc_src;  // follower a
  std::shared_ptr<std::vector<int>> soc_dst;  // followee b in S_a
  std::vector<int> user_deg;   // |R_a| within this graph
  std::vector<int> item_deg;   // |R_i|
  std::vector<int> social_deg;  // |S_a|
  Tensor user_features;  // empty when absent
  Tensor item_features;

  static DiffusionGraph from_edges(int M, int N, std::vector<std::pair<int, int>> interest,
                                   std::vector<std::pair<int, int>> social) {
    DiffusionGraph g;
    g.M = M;
    g.N = N;
    std::sort(interest.begin(), interest.end());
    std::sort(social.begin(), social.end());
    g.edge_user = std::make_shared<std::vector<int>>();
    g.edge_item = std::make_shared<std::vector<int>>();
    g.soc_src = std::make_shared<std::vector<int>>();
    g.soc_dst = std::make_shared<std::vector<int>>();
    g.user_deg.assign(M, 0);
    g.item_deg.assign(N, 0);
    g.social_deg.assign(M, 0);
    for (const auto& [a, i] : interest) {
      g.edge_user->push_back(a);
      g.edge_item->push_back(i);
      ++g.user_deg[a];
      ++g.item_deg[i];
    }
    for (const auto& [a, b] : social) {
      g.soc_src->push_back(a);
      g.soc_dst->push_back(b);
      ++g.social_deg[a];
    }
    return g;
  }

  static DiffusionGraph training_graph(const HeteroGraph& graph, const InteractionSplit& split) {
    std::vector<std::pair<int, int>> social;
    for (int a = 0; a < graph.M; ++a)
      for (int b : graph.followees[a]) social.emplace_back(a, b);
    DiffusionGraph g = from_edges(graph.M, graph.N, split.train, std::move(social));
    g.user_features = graph.user_features;
    g.item_features = graph.item_features;
    return g;
  }

  std::size_t interest_edge_count() const { return edge_user->size(); }
  std::size_t social_edge_count() const { return soc_src->size(); }
};

// Gaussian(0, 0.01^2) init for every weight array, zero biases.
inline ParameterSet init_parameters(const ModelConfig& config, const ModelDims& dims,
                                    std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x1417));
  auto gaussian = [&](std::size_t r, std::size_t c) {
    Tensor t = Tensor::zeros(r, c);
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.normal(0.0, 0.01);
    return t;
  };
  const int D = config.D;
  const int H = config.hidden();

  ParameterSet p;
  p.add("P", gaussian(dims.M, D));
  p.add("Q", gaussian(dims.N, D));
  if (config.use_user_features) {
    if (dims.d1 <= 0) throw ConfigError("init: user features enabled but width is 0");
    p.add("W1", gaussian(dims.d1, D));
  }
  if (config.use_item_features) {
    if (dims.d2 <= 0) throw ConfigError("init: item features enabled but width is 0");
    p.add("W2", gaussian(dims.d2, D));
  }
  for (int k = 0; k < config.depth_param_sets(); ++k) {
    const std::string depth = std::to_string(k);
    if (config.variant == Variant::DiffNetPP) {
      if (config.node_attention == AttentionMode::Att) {
        for (const char* m : {"mlp1", "mlp2", "mlp3"}) {
          const std::string prefix = std::string(m) + "." + depth;
          p.add(prefix + ".wh", gaussian(2 * D, H));
          p.add(prefix + ".bh", Tensor::zeros(H));
          p.add(prefix + ".wo", gaussian(H, 1));
          p.add(prefix + ".bo", Tensor::zeros(1));
        }
      }
      if (config.graph_attention == AttentionMode::Att) {
        const std::string prefix = "mlp4." + depth;
        p.add(prefix + ".wh", gaussian(2 * D, H));
        p.add(prefix + ".bh", Tensor::zeros(H));
        p.add(prefix + ".wo", gaussian(H, 1));
        p.add(prefix + ".bo", Tensor::zeros(1));
      }
    } else if (config.variant == Variant::DiffNet) {
      p.add("diff." + depth + ".w", gaussian(2 * D, D));
      p.add("diff." + depth + ".b", Tensor::zeros(D));
    }
  }
  return p;
}

// Per-layer user/item representations and attention weights. Attention
// vectors are stored edge-aligned (same order as the DiffusionGraph edges).
struct DiffusionState {
  int K = 0;
  std::vector<Tensor> u;      // K+1 of [M,D]
  std::vector<Tensor> v;      // K+1 of [N,D]
  std::vector<Tensor> eta;    // K of [E_interest]
  std::vector<Tensor> alpha;  // K of [E_social]
  std::vector<Tensor> beta;   // K of [E_interest]
  std::vector<Tensor> gamma;  // K of [M,2]

  // layer-concatenated inner product: sum_k u^k_a . v^k_i
  double predict(int a, int i) const {
    double s = 0.0;
    for (int k = 0; k <= K; ++k) {
      const Tensor& U = u[k];
      const Tensor& V = v[k];
      for (std::size_t d = 0; d < U.cols(); ++d) s += U.at(a, d) * V.at(i, d);
    }
    return s;
  }
};

// Tape handles produced by one recorded forward pass.
struct ForwardIds {
  std::vector<ValueId> u;
  std::vector<ValueId> v;
  std::vector<ValueId> eta;
  std::vector<ValueId> alpha;
  std::vector<ValueId> beta;
  std::vector<ValueId> gamma;
};

namespace detail {

inline ValueId mlp_apply(Tape& t, const TapeBinding& b, const std::string& prefix, ValueId in,
                         double leak) {
  ValueId h = t.add_row(t.matmul(in, b.id(prefix + ".wh")), b.id(prefix + ".bh"));
  h = t.leaky_relu(h, leak);
  return t.add_row(t.matmul(h, b.id(prefix + ".wo")), b.id(prefix + ".bo"));
}

inline std::shared_ptr<std::vector<int>> pair_segments(int rows) {
  auto seg = std::make_shared<std::vector<int>>();
  seg->reserve(2 * rows);
  for (int r = 0; r < rows; ++r) {
    seg->push_back(r);
    seg->push_back(r);
  }
  return seg;
}

inline Tensor uniform_edge_weights(const std::vector<int>& owners, const std::vector<int>& deg) {
  Tensor w = Tensor::zeros(owners.size());
  for (std::size_t e = 0; e < owners.size(); ++e) w[e] = 1.0 / static_cast<double>(deg[owners[e]]);
  return w;
}

// gamma override masks for degenerate neighbor sets: no social mass when S_a
// is empty, no interest mass when R_a is empty, untouched self otherwise
inline void gamma_masks(const DiffusionGraph& g, Tensor& keep, Tensor& fill) {
  keep = Tensor::zeros(g.M, 2);
  fill = Tensor::zeros(g.M, 2);
  for (int a = 0; a < g.M; ++a) {
    const bool has_social = g.social_deg[a] > 0;
    const bool has_interest = g.user_deg[a] > 0;
    if (has_social && has_interest) {
      keep.at(a, 0) = 1.0;
      keep.at(a, 1) = 1.0;
    } else if (has_social) {
      fill.at(a, 0) = 1.0;
    } else if (has_interest) {
      fill.at(a, 1) = 1.0;
    } else {
      fill.at(a, 0) = 0.5;  // both aggregates are zero; keep the row a distribution
      fill.at(a, 1) = 0.5;
    }
  }
}

}  // namespace detail

// Records the full diffusion forward pass on `tape`. Layer-0 fusion adds the
// feature transform to the free embeddings when features are enabled; each of
// the K layers then updates items from their raters and users from their
// social and interest neighbors under node- and graph-level attention.
inline ForwardIds forward_on_tape(Tape& tape, const TapeBinding& bind, const DiffusionGraph& g,
                                  const ModelConfig& config) {
  config.validate();
  ForwardIds out;
  const int M = g.M;
  const int N = g.N;

  // fusion layer (disappears without features)
  ValueId u0 = bind.id("P");
  if (config.use_user_features) {
    if (g.user_features.numel() == 0) throw ConfigError("forward: user features missing");
    ValueId x = tape.constant(g.user_features);
    u0 = tape.add(tape.matmul(x, bind.id("W1")), u0);
  }
  ValueId v0 = bind.id("Q");
  if (config.use_item_features) {
    if (g.item_features.numel() == 0) throw ConfigError("forward: item features missing");
    ValueId y = tape.constant(g.item_features);
    v0 = tape.add(tape.matmul(y, bind.id("W2")), v0);
  }
  out.u.push_back(u0);
  out.v.push_back(v0);

  if (config.K == 0) return out;

  const auto& eu = g.edge_user;
  const auto& ei = g.edge_item;
  const auto& ss = g.soc_src;
  const auto& sd = g.soc_dst;

  if (config.variant == Variant::DiffNet) {
    // social-only diffusion: average-pooled followee embeddings, per-layer
    // affine transform of [pooled, self]; items are not diffused
    ValueId avg_w = tape.constant(detail::uniform_edge_weights(*ss, g.social_deg));
    for (int k = 0; k < config.K; ++k) {
      ValueId uk = out.u.back();
      ValueId pooled = tape.segment_sum(tape.row_scale(tape.row_gather(uk, sd), avg_w), ss, M);
      ValueId cat = tape.concat_cols(pooled, uk);
      const std::string prefix = "diff." + std::to_string(config.mlp_set(k));
      ValueId next = tape.add_row(tape.matmul(cat, bind.id(prefix + ".w")), bind.id(prefix + ".b"));
      out.u.push_back(next);
      out.v.push_back(out.v.back());
      out.alpha.push_back(avg_w);
    }
    return out;
  }

  Tensor keep_rows, fill_rows;
  detail::gamma_masks(g, keep_rows, fill_rows);
  ValueId gamma_keep = tape.constant(keep_rows);
  ValueId gamma_fill = tape.constant(fill_rows);
  auto gamma_seg = detail::pair_segments(M);

  ValueId eta_avg = -1, alpha_avg = -1, beta_avg = -1;
  if (config.node_attention == AttentionMode::Avg) {
    eta_avg = tape.constant(detail::uniform_edge_weights(*ei, g.item_deg));
    alpha_avg = tape.constant(detail::uniform_edge_weights(*ss, g.social_deg));
    beta_avg = tape.constant(detail::uniform_edge_weights(*eu, g.user_deg));
  }
  ValueId gamma_avg = -1;
  if (config.graph_attention == AttentionMode::Avg) {
    Tensor half = Tensor::zeros(M, 2);
    for (std::size_t i = 0; i < half.numel(); ++i) half[i] = 0.5;
    // same degenerate-row handling as the learned path
    Tensor masked = half;
    for (std::size_t i = 0; i < masked.numel(); ++i)
      masked[i] = masked[i] * keep_rows[i] + fill_rows[i];
    gamma_avg = tape.constant(masked);
  }

  ValueId prev_ptilde = -1, prev_qtilde = -1;
  for (int k = 0; k < config.K; ++k) {
    ValueId uk = out.u.back();
    ValueId vk = out.v.back();
    const int mk = config.mlp_set(k);

    ValueId u_by_edge = tape.row_gather(uk, eu);  // interest edges, user side
    ValueId v_by_edge = tape.row_gather(vk, ei);  // interest edges, item side

    // item update: v^{k+1}_i = v^k_i + sum_{a in R_i} eta_ia u^k_a
    ValueId eta;
    if (config.node_attention == AttentionMode::Att) {
      ValueId scores =
          detail::mlp_apply(tape, bind, "mlp1." + std::to_string(mk),
                            tape.concat_cols(v_by_edge, u_by_edge), config.mlp_leak);
      eta = tape.exp_normalize(scores, ei, N);
    } else {
      eta = eta_avg;
    }
    ValueId v_next = tape.add(vk, tape.segment_sum(tape.row_scale(u_by_edge, eta), ei, N));

    // social aggregate: p~_a = sum_{b in S_a} alpha_ab u^k_b
    ValueId u_src = tape.row_gather(uk, ss);
    ValueId u_dst = tape.row_gather(uk, sd);
    ValueId alpha;
    if (config.node_attention == AttentionMode::Att) {
      ValueId scores = detail::mlp_apply(tape, bind, "mlp2." + std::to_string(mk),
                                         tape.concat_cols(u_src, u_dst), config.mlp_leak);
      alpha = tape.exp_normalize(scores, ss, M);
    } else {
      alpha = alpha_avg;
    }
    ValueId ptilde = tape.segment_sum(tape.row_scale(u_dst, alpha), ss, M);

    // interest aggregate: q~_a = sum_{i in R_a} beta_ai v^k_i
    ValueId beta;
    if (config.node_attention == AttentionMode::Att) {
      ValueId scores = detail::mlp_apply(tape, bind, "mlp3." + std::to_string(mk),
                                         tape.concat_cols(u_by_edge, v_by_edge), config.mlp_leak);
      beta = tape.exp_normalize(scores, eu, M);
    } else {
      beta = beta_avg;
    }
    ValueId qtilde = tape.segment_sum(tape.row_scale(v_by_edge, beta), eu, M);

    // graph-level weights over the two aggregates
    ValueId gamma;
    if (config.graph_attention == AttentionMode::Att) {
      ValueId p_in = ptilde, q_in = qtilde;
      if (config.gamma_input == GammaInput::Previous) {
        if (prev_ptilde < 0) {
          prev_ptilde = tape.constant(Tensor::zeros(M, config.D));
          prev_qtilde = prev_ptilde;
        }
        p_in = prev_ptilde;
        q_in = prev_qtilde;
      }
      const std::string prefix = "mlp4." + std::to_string(mk);
      ValueId s1 =
          detail::mlp_apply(tape, bind, prefix, tape.concat_cols(uk, p_in), config.mlp_leak);
      ValueId s2 =
          detail::mlp_apply(tape, bind, prefix, tape.concat_cols(uk, q_in), config.mlp_leak);
      ValueId raw = tape.exp_normalize(tape.concat_cols(s1, s2), gamma_seg, M);
      gamma = tape.add(tape.mul(raw, gamma_keep), gamma_fill);
    } else {
      gamma = gamma_avg;
    }

    ValueId u_next = tape.add(
        uk, tape.add(tape.row_scale(ptilde, tape.col_slice(gamma, 0)),
                     tape.row_scale(qtilde, tape.col_slice(gamma, 1))));

    out.u.push_back(u_next);
    out.v.push_back(v_next);
    out.eta.push_back(eta);
    out.alpha.push_back(alpha);
    out.beta.push_back(beta);
    out.gamma.push_back(gamma);
    prev_ptilde = ptilde;
    prev_qtilde = qtilde;
  }
  return out;
}

namespace detail {

inline Tensor flatten(const Tensor& t) {
  Tensor out = Tensor::zeros(t.numel());
  for (std::size_t i = 0; i < t.numel(); ++i) out[i] = t[i];
  return out;
}

}  // namespace detail

// Pure inference forward: records on a scratch tape and extracts the values.
inline DiffusionState forward_all(const DiffusionGraph& g, const ParameterSet& params,
                                  const ModelConfig& config) {
  Tape tape;
  TapeBinding bind(tape, params);
  ForwardIds ids = forward_on_tape(tape, bind, g, config);
  DiffusionState s;
  s.K = config.K;
  for (ValueId id : ids.u) s.u.push_back(tape.value(id));
  for (ValueId id : ids.v) s.v.push_back(tape.value(id));
  for (ValueId id : ids.eta) s.eta.push_back(detail::flatten(tape.value(id)));
  for (ValueId id : ids.alpha) s.alpha.push_back(detail::flatten(tape.value(id)));
  for (ValueId id : ids.beta) s.beta.push_back(detail::flatten(tape.value(id)));
  for (ValueId id : ids.gamma) s.gamma.push_back(tape.value(id));
  return s;
}

// Batch scores on the tape: sum over layers of the per-row inner product
// between gathered user and item representations.
inline ValueId score_on_tape(Tape& tape, const ForwardIds& fwd,
                             std::shared_ptr<std::vector<int>> users,
                             std::shared_ptr<std::vector<int>> items) {
  ValueId total = -1;
  for (std::size_t k = 0; k < fwd.u.size(); ++k) {
    ValueId term =
        tape.row_sum(tape.mul(tape.row_gather(fwd.u[k], users), tape.row_gather(fwd.v[k], items)));
    total = total < 0 ? term : tape.add(total, term);
  }
  return total;
}

}  // namespace diffnet
