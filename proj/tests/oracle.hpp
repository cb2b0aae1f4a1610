#pragma once

// Test-only reference implementations, written per-node from the update rules
// with no shared code with the library forward passes. Softmax here uses the
// plain exp/sum form (scores in micro tests are small).

#include <cmath>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "diffnet/model.hpp"
#include "diffnet/params.hpp"
#include "diffnet/rng.hpp"
#include "diffnet/tensor.hpp"

namespace oracle {

using diffnet::AttentionMode;
using diffnet::GammaInput;
using diffnet::ModelConfig;
using diffnet::ParameterSet;
using diffnet::Rng;
using diffnet::Tensor;

struct AdjGraph {
  int M = 0, N = 0;
  std::vector<std::vector<int>> items_of;   // R_a
  std::vector<std::vector<int>> users_of;   // R_i
  std::vector<std::vector<int>> followees;  // S_a
};

inline AdjGraph adjacency(const diffnet::DiffusionGraph& g) {
  AdjGraph a;
  a.M = g.M;
  a.N = g.N;
  a.items_of.resize(g.M);
  a.users_of.resize(g.N);
  a.followees.resize(g.M);
  for (std::size_t e = 0; e < g.interest_edge_count(); ++e) {
    a.items_of[(*g.edge_user)[e]].push_back((*g.edge_item)[e]);
    a.users_of[(*g.edge_item)[e]].push_back((*g.edge_user)[e]);
  }
  for (std::size_t e = 0; e < g.social_edge_count(); ++e)
    a.followees[(*g.soc_src)[e]].push_back((*g.soc_dst)[e]);
  return a;
}

inline double ref_mlp(const ParameterSet& p, const std::string& prefix,
                      const std::vector<double>& x, double leak) {
  const Tensor& wh = p.at(prefix + ".wh");
  const Tensor& bh = p.at(prefix + ".bh");
  const Tensor& wo = p.at(prefix + ".wo");
  const Tensor& bo = p.at(prefix + ".bo");
  double out = bo[0];
  for (std::size_t h = 0; h < bh.numel(); ++h) {
    double pre = bh[h];
    for (std::size_t d = 0; d < x.size(); ++d) pre += x[d] * wh.at(d, h);
    const double act = pre >= 0.0 ? pre : leak * pre;
    out += act * wo.at(h, 0);
  }
  return out;
}

inline std::vector<double> ref_softmax(std::vector<double> s) {
  double denom = 0.0;
  for (double& v : s) {
    v = std::exp(v);
    denom += v;
  }
  for (double& v : s) v /= denom;
  return s;
}

inline std::vector<double> row(const Tensor& t, int r) {
  std::vector<double> out(t.cols());
  for (std::size_t c = 0; c < t.cols(); ++c) out[c] = t.at(r, c);
  return out;
}

inline std::vector<double> cat(std::vector<double> a, const std::vector<double>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

// One DiffNet++ layer, node by node. Returns {U_next, V_next}; optionally
// exposes the gamma matrix.
inline std::pair<Tensor, Tensor> reference_layer(const AdjGraph& g, const ParameterSet& p,
                                                 const ModelConfig& cfg, int k, const Tensor& U,
                                                 const Tensor& V, const Tensor* prev_pt,
                                                 const Tensor* prev_qt, Tensor* pt_out = nullptr,
                                                 Tensor* qt_out = nullptr,
                                                 Tensor* gamma_out = nullptr) {
  const int D = cfg.D;
  const std::string depth = std::to_string(cfg.mlp_set(k));
  const bool att = cfg.node_attention == AttentionMode::Att;

  Tensor Vn = V;
  for (int i = 0; i < g.N; ++i) {
    const auto& raters = g.users_of[i];
    if (raters.empty()) continue;
    std::vector<double> w;
    if (att) {
      std::vector<double> scores;
      for (int a : raters)
        scores.push_back(ref_mlp(p, "mlp1." + depth, cat(row(V, i), row(U, a)), cfg.mlp_leak));
      w = ref_softmax(scores);
    } else {
      w.assign(raters.size(), 1.0 / static_cast<double>(raters.size()));
    }
    for (std::size_t t = 0; t < raters.size(); ++t)
      for (int d = 0; d < D; ++d) Vn.at(i, d) += w[t] * U.at(raters[t], d);
  }

  Tensor Pt = Tensor::zeros(g.M, D), Qt = Tensor::zeros(g.M, D);
  for (int a = 0; a < g.M; ++a) {
    const auto& fol = g.followees[a];
    if (!fol.empty()) {
      std::vector<double> w;
      if (att) {
        std::vector<double> scores;
        for (int b : fol)
          scores.push_back(ref_mlp(p, "mlp2." + depth, cat(row(U, a), row(U, b)), cfg.mlp_leak));
        w = ref_softmax(scores);
      } else {
        w.assign(fol.size(), 1.0 / static_cast<double>(fol.size()));
      }
      for (std::size_t t = 0; t < fol.size(); ++t)
        for (int d = 0; d < D; ++d) Pt.at(a, d) += w[t] * U.at(fol[t], d);
    }
    const auto& its = g.items_of[a];
    if (!its.empty()) {
      std::vector<double> w;
      if (att) {
        std::vector<double> scores;
        for (int i : its)
          scores.push_back(ref_mlp(p, "mlp3." + depth, cat(row(U, a), row(V, i)), cfg.mlp_leak));
        w = ref_softmax(scores);
      } else {
        w.assign(its.size(), 1.0 / static_cast<double>(its.size()));
      }
      for (std::size_t t = 0; t < its.size(); ++t)
        for (int d = 0; d < D; ++d) Qt.at(a, d) += w[t] * V.at(its[t], d);
    }
  }

  Tensor gamma = Tensor::zeros(g.M, 2);
  Tensor Un = U;
  for (int a = 0; a < g.M; ++a) {
    const bool has_s = !g.followees[a].empty();
    const bool has_r = !g.items_of[a].empty();
    double g1, g2;
    if (!has_s && !has_r) {
      g1 = g2 = 0.5;
    } else if (!has_s) {
      g1 = 0.0;
      g2 = 1.0;
    } else if (!has_r) {
      g1 = 1.0;
      g2 = 0.0;
    } else if (cfg.graph_attention == AttentionMode::Att) {
      std::vector<double> pin(D, 0.0), qin(D, 0.0);
      if (cfg.gamma_input == GammaInput::Current) {
        pin = row(Pt, a);
        qin = row(Qt, a);
      } else if (prev_pt != nullptr && prev_pt->numel() > 0) {
        pin = row(*prev_pt, a);
        qin = row(*prev_qt, a);
      }
      auto sm = ref_softmax({ref_mlp(p, "mlp4." + depth, cat(row(U, a), pin), cfg.mlp_leak),
                             ref_mlp(p, "mlp4." + depth, cat(row(U, a), qin), cfg.mlp_leak)});
      g1 = sm[0];
      g2 = sm[1];
    } else {
      g1 = g2 = 0.5;
    }
    gamma.at(a, 0) = g1;
    gamma.at(a, 1) = g2;
    for (int d = 0; d < D; ++d) Un.at(a, d) += g1 * Pt.at(a, d) + g2 * Qt.at(a, d);
  }
  if (pt_out) *pt_out = Pt;
  if (qt_out) *qt_out = Qt;
  if (gamma_out) *gamma_out = gamma;
  return {Un, Vn};
}

// Full reference forward (fusion + K layers) for DiffNet++.
inline diffnet::DiffusionState reference_forward(const diffnet::DiffusionGraph& g,
                                                 const ParameterSet& p, const ModelConfig& cfg) {
  AdjGraph adj = adjacency(g);
  diffnet::DiffusionState s;
  s.K = cfg.K;
  Tensor U = p.at("P");
  if (cfg.use_user_features) {
    const Tensor& X = g.user_features;
    const Tensor& W1 = p.at("W1");
    for (int a = 0; a < g.M; ++a)
      for (int d = 0; d < cfg.D; ++d) {
        double v = U.at(a, d);
        for (std::size_t f = 0; f < X.cols(); ++f) v += X.at(a, f) * W1.at(f, d);
        U.at(a, d) = v;
      }
  }
  Tensor V = p.at("Q");
  if (cfg.use_item_features) {
    const Tensor& Y = g.item_features;
    const Tensor& W2 = p.at("W2");
    for (int i = 0; i < g.N; ++i)
      for (int d = 0; d < cfg.D; ++d) {
        double v = V.at(i, d);
        for (std::size_t f = 0; f < Y.cols(); ++f) v += Y.at(i, f) * W2.at(f, d);
        V.at(i, d) = v;
      }
  }
  s.u.push_back(U);
  s.v.push_back(V);
  Tensor prev_pt, prev_qt;
  for (int k = 0; k < cfg.K; ++k) {
    Tensor pt, qt, gamma;
    auto [Un, Vn] = reference_layer(adj, p, cfg, k, s.u.back(), s.v.back(), &prev_pt, &prev_qt,
                                    &pt, &qt, &gamma);
    s.u.push_back(Un);
    s.v.push_back(Vn);
    s.gamma.push_back(gamma);
    prev_pt = pt;
    prev_qt = qt;
  }
  return s;
}

// Random micro graph: every item keeps at least one rater (as after
// preprocessing); users may have empty interest or social rows.
inline diffnet::DiffusionGraph random_micro_graph(Rng& rng, int M, int N,
                                                  double interest_density = 0.15,
                                                  double social_density = 0.15,
                                                  int feature_d1 = 0, int feature_d2 = 0) {
  std::vector<std::pair<int, int>> interest, social;
  std::set<std::pair<int, int>> seen;
  for (int i = 0; i < N; ++i) {
    const int a = rng.uniform_int(M);
    interest.emplace_back(a, i);
    seen.emplace(a, i);
  }
  for (int a = 0; a < M; ++a)
    for (int i = 0; i < N; ++i)
      if (rng.uniform_real() < interest_density && seen.emplace(a, i).second)
        interest.emplace_back(a, i);
  for (int a = 0; a < M; ++a)
    for (int b = 0; b < M; ++b)
      if (a != b && rng.uniform_real() < social_density) social.emplace_back(a, b);
  auto g = diffnet::DiffusionGraph::from_edges(M, N, std::move(interest), std::move(social));
  if (feature_d1 > 0) {
    g.user_features = Tensor::zeros(M, feature_d1);
    for (std::size_t i = 0; i < g.user_features.numel(); ++i)
      g.user_features[i] = rng.normal();
  }
  if (feature_d2 > 0) {
    g.item_features = Tensor::zeros(N, feature_d2);
    for (std::size_t i = 0; i < g.item_features.numel(); ++i)
      g.item_features[i] = rng.normal();
  }
  return g;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace oracle
