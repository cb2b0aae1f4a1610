#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "diffnet/model.hpp"

namespace diffnet {

namespace matrix_detail {

// scalar two-layer MLP: in (width 2D) -> hidden (leaky) -> score
inline double mlp_score(const ParameterSet& p, const std::string& prefix,
                        const std::vector<double>& in, double leak) {
  const Tensor& wh = p.at(prefix + ".wh");
  const Tensor& bh = p.at(prefix + ".bh");
  const Tensor& wo = p.at(prefix + ".wo");
  const Tensor& bo = p.at(prefix + ".bo");
  double score = bo[0];
  for (std::size_t h = 0; h < wh.cols(); ++h) {
    double z = bh[h];
    for (std::size_t i = 0; i < in.size(); ++i) z += in[i] * wh.at(i, h);
    if (z < 0.0) z *= leak;
    score += z * wo.at(h, 0);
  }
  return score;
}

inline void softmax_inplace(std::vector<double>& scores) {
  if (scores.empty()) return;
  double m = -std::numeric_limits<double>::infinity();
  for (double s : scores) m = std::max(m, s);
  double sum = 0.0;
  for (double& s : scores) {
    s = std::exp(s - m);
    sum += s;
  }
  for (double& s : scores) s /= sum;
}

inline std::vector<double> row_of(const Tensor& t, int r) {
  std::vector<double> out(t.cols());
  for (std::size_t c = 0; c < t.cols(); ++c) out[c] = t.at(r, c);
  return out;
}

inline std::vector<double> concat(std::vector<double> a, const std::vector<double>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace matrix_detail

// Dense matrix formulation of the diffusion layers: per layer, the stacked
// embeddings [U; V] are multiplied by the block matrix
//   [ I + S.*A.*G1 , R.*B.*G2 ]
//   [ R^T.*H       , I        ]
// where A, B, H are the masked node-attention matrices and G1/G2 replicate
// the graph-attention columns. Shares nothing with the tape implementation;
// used as an equivalence oracle for forward_all.
inline DiffusionState forward_matrix(const DiffusionGraph& g, const ParameterSet& params,
                                     const ModelConfig& config) {
  config.validate();
  const int M = g.M, N = g.N, D = config.D;

  // adjacency lists from the edge arrays
  std::vector<std::vector<int>> r_items(M), r_users(N), s_out(M);
  for (std::size_t e = 0; e < g.interest_edge_count(); ++e) {
    r_items[(*g.edge_user)[e]].push_back((*g.edge_item)[e]);
    r_users[(*g.edge_item)[e]].push_back((*g.edge_user)[e]);
  }
  for (std::size_t e = 0; e < g.social_edge_count(); ++e)
    s_out[(*g.soc_src)[e]].push_back((*g.soc_dst)[e]);

  DiffusionState state;
  state.K = config.K;

  // fusion
  Tensor U = params.at("P");
  if (config.use_user_features) {
    if (g.user_features.numel() == 0) throw ConfigError("forward_matrix: user features missing");
    const Tensor& X = g.user_features;
    const Tensor& W1 = params.at("W1");
    for (int a = 0; a < M; ++a)
      for (int d = 0; d < D; ++d) {
        double s = 0.0;
        for (std::size_t f = 0; f < X.cols(); ++f) s += X.at(a, f) * W1.at(f, d);
        U.at(a, d) = s + U.at(a, d);
      }
  }
  Tensor V = params.at("Q");
  if (config.use_item_features) {
    if (g.item_features.numel() == 0) throw ConfigError("forward_matrix: item features missing");
    const Tensor& Y = g.item_features;
    const Tensor& W2 = params.at("W2");
    for (int i = 0; i < N; ++i)
      for (int d = 0; d < D; ++d) {
        double s = 0.0;
        for (std::size_t f = 0; f < Y.cols(); ++f) s += Y.at(i, f) * W2.at(f, d);
        V.at(i, d) = s + V.at(i, d);
      }
  }
  state.u.push_back(U);
  state.v.push_back(V);

  Tensor prev_pt, prev_qt;  // previous-layer aggregates for gamma_input=previous
  for (int k = 0; k < config.K; ++k) {
    const Tensor& Uk = state.u.back();
    const Tensor& Vk = state.v.back();
    const int mk = config.mlp_set(k);
    const std::string depth = std::to_string(mk);

    if (config.variant == Variant::DiffNet) {
      Tensor Un = Tensor::zeros(M, D);
      const Tensor& W = params.at("diff." + depth + ".w");
      const Tensor& b = params.at("diff." + depth + ".b");
      Tensor alpha = Tensor::zeros(g.social_edge_count());
      for (std::size_t e = 0; e < g.social_edge_count(); ++e)
        alpha[e] = 1.0 / static_cast<double>(s_out[(*g.soc_src)[e]].size());
      for (int a = 0; a < M; ++a) {
        std::vector<double> cat(2 * D, 0.0);
        if (!s_out[a].empty()) {
          const double w = 1.0 / static_cast<double>(s_out[a].size());
          for (int b2 : s_out[a])
            for (int d = 0; d < D; ++d) cat[d] += w * Uk.at(b2, d);
        }
        for (int d = 0; d < D; ++d) cat[D + d] = Uk.at(a, d);
        for (int d = 0; d < D; ++d) {
          double s = b[d];
          for (int i = 0; i < 2 * D; ++i) s += cat[i] * W.at(i, d);
          Un.at(a, d) = s;
        }
      }
      state.u.push_back(std::move(Un));
      state.v.push_back(Vk);
      state.alpha.push_back(std::move(alpha));
      continue;
    }

    const bool node_att = config.node_attention == AttentionMode::Att;
    const bool graph_att = config.graph_attention == AttentionMode::Att;

    // H: N x M masked item-side attention
    std::vector<std::vector<double>> H(N);
    for (int i = 0; i < N; ++i) {
      auto& row = H[i];
      row.resize(r_users[i].size());
      if (node_att) {
        const auto vi = matrix_detail::row_of(Vk, i);
        for (std::size_t t = 0; t < r_users[i].size(); ++t)
          row[t] = matrix_detail::mlp_score(
              params, "mlp1." + depth,
              matrix_detail::concat(vi, matrix_detail::row_of(Uk, r_users[i][t])),
              config.mlp_leak);
        matrix_detail::softmax_inplace(row);
      } else {
        for (auto& w : row) w = 1.0 / static_cast<double>(r_users[i].size());
      }
    }
    // A: M x M masked social attention
    std::vector<std::vector<double>> A(M);
    for (int a = 0; a < M; ++a) {
      auto& row = A[a];
      row.resize(s_out[a].size());
      if (node_att) {
        const auto ua = matrix_detail::row_of(Uk, a);
        for (std::size_t t = 0; t < s_out[a].size(); ++t)
          row[t] = matrix_detail::mlp_score(
              params, "mlp2." + depth,
              matrix_detail::concat(ua, matrix_detail::row_of(Uk, s_out[a][t])), config.mlp_leak);
        matrix_detail::softmax_inplace(row);
      } else {
        for (auto& w : row) w = 1.0 / static_cast<double>(s_out[a].size());
      }
    }
    // B: M x N masked interest attention
    std::vector<std::vector<double>> B(M);
    for (int a = 0; a < M; ++a) {
      auto& row = B[a];
      row.resize(r_items[a].size());
      if (node_att) {
        const auto ua = matrix_detail::row_of(Uk, a);
        for (std::size_t t = 0; t < r_items[a].size(); ++t)
          row[t] = matrix_detail::mlp_score(
              params, "mlp3." + depth,
              matrix_detail::concat(ua, matrix_detail::row_of(Vk, r_items[a][t])),
              config.mlp_leak);
        matrix_detail::softmax_inplace(row);
      } else {
        for (auto& w : row) w = 1.0 / static_cast<double>(r_items[a].size());
      }
    }

    // aggregates feeding the graph attention
    Tensor Pt = Tensor::zeros(M, D), Qt = Tensor::zeros(M, D);
    for (int a = 0; a < M; ++a) {
      for (std::size_t t = 0; t < s_out[a].size(); ++t)
        for (int d = 0; d < D; ++d) Pt.at(a, d) += A[a][t] * Uk.at(s_out[a][t], d);
      for (std::size_t t = 0; t < r_items[a].size(); ++t)
        for (int d = 0; d < D; ++d) Qt.at(a, d) += B[a][t] * Vk.at(r_items[a][t], d);
    }

    // Gamma: M x 2
    Tensor G = Tensor::zeros(M, 2);
    for (int a = 0; a < M; ++a) {
      const bool has_social = !s_out[a].empty();
      const bool has_interest = !r_items[a].empty();
      if (!has_social && !has_interest) {
        G.at(a, 0) = 0.5;
        G.at(a, 1) = 0.5;
        continue;
      }
      if (!has_social) {
        G.at(a, 1) = 1.0;
        continue;
      }
      if (!has_interest) {
        G.at(a, 0) = 1.0;
        continue;
      }
      if (graph_att) {
        const auto ua = matrix_detail::row_of(Uk, a);
        std::vector<double> pin(D, 0.0), qin(D, 0.0);
        if (config.gamma_input == GammaInput::Current) {
          pin = matrix_detail::row_of(Pt, a);
          qin = matrix_detail::row_of(Qt, a);
        } else if (k > 0) {
          pin = matrix_detail::row_of(prev_pt, a);
          qin = matrix_detail::row_of(prev_qt, a);
        }
        std::vector<double> scores = {
            matrix_detail::mlp_score(params, "mlp4." + depth, matrix_detail::concat(ua, pin),
                                     config.mlp_leak),
            matrix_detail::mlp_score(params, "mlp4." + depth, matrix_detail::concat(ua, qin),
                                     config.mlp_leak)};
        matrix_detail::softmax_inplace(scores);
        G.at(a, 0) = scores[0];
        G.at(a, 1) = scores[1];
      } else {
        G.at(a, 0) = 0.5;
        G.at(a, 1) = 0.5;
      }
    }

    // block update of [U; V]
    Tensor Un = Uk, Vn = Vk;
    for (int a = 0; a < M; ++a)
      for (int d = 0; d < D; ++d)
        Un.at(a, d) += G.at(a, 0) * Pt.at(a, d) + G.at(a, 1) * Qt.at(a, d);
    for (int i = 0; i < N; ++i)
      for (std::size_t t = 0; t < r_users[i].size(); ++t)
        for (int d = 0; d < D; ++d) Vn.at(i, d) += H[i][t] * Uk.at(r_users[i][t], d);

    // export edge-aligned attention vectors
    Tensor eta = Tensor::zeros(g.interest_edge_count());
    Tensor beta = Tensor::zeros(g.interest_edge_count());
    Tensor alpha = Tensor::zeros(g.social_edge_count());
    {
      std::vector<std::size_t> it_pos(N, 0), us_pos(M, 0), so_pos(M, 0);
      // edges are sorted by (user, item); reconstruct positions per row
      for (std::size_t e = 0; e < g.interest_edge_count(); ++e) {
        const int a = (*g.edge_user)[e];
        beta[e] = B[a][us_pos[a]++];
      }
      std::vector<std::vector<std::size_t>> edge_by_item(N);
      for (std::size_t e = 0; e < g.interest_edge_count(); ++e)
        edge_by_item[(*g.edge_item)[e]].push_back(e);
      for (int i = 0; i < N; ++i)
        for (std::size_t t = 0; t < edge_by_item[i].size(); ++t) eta[edge_by_item[i][t]] = H[i][t];
      for (std::size_t e = 0; e < g.social_edge_count(); ++e) {
        const int a = (*g.soc_src)[e];
        alpha[e] = A[a][so_pos[a]++];
      }
    }

    state.u.push_back(std::move(Un));
    state.v.push_back(std::move(Vn));
    state.eta.push_back(std::move(eta));
    state.alpha.push_back(std::move(alpha));
    state.beta.push_back(std::move(beta));
    state.gamma.push_back(G);
    prev_pt = Pt;
    prev_qt = Qt;
  }
  return state;
}

}  // namespace diffnet
