#pragma once

#include <algorithm>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "diffnet/errors.hpp"
#include "diffnet/tensor.hpp"

namespace diffnet {

using ValueId = int;

inline double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// ln(1 + e^x) without overflow
inline double stable_softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

// Eagerly evaluated reverse-mode tape over Tensor values. One tape records
// one forward computation (one training batch); backward() may run once.
class Tape {
 public:
  enum class Op {
    Leaf,
    MatMul,        // [r,k] x [k,c] -> [r,c]
    Add,           // same shape
    AddRow,        // [r,c] + row vector [c], broadcast over rows
    Sub,           // same shape
    Mul,           // elementwise, same shape
    Scale,         // multiply by compile-time constant
    RowScale,      // row i of a scaled by w[i]
    ConcatCols,    // [r,c1] || [r,c2] -> [r,c1+c2]
    RowGather,     // rows of a selected by index list
    SegmentSum,    // rows of a scatter-added into segments
    Sigmoid,
    LeakyRelu,
    Softplus,
    ExpNormalize,  // softmax over each segment of a flat score list
    RowSum,        // [r,c] -> [r]
    Sum,           // -> scalar [1]
    SumSquares,    // -> scalar [1]
    ColSlice,      // column j of [r,c] -> [r]
  };

  explicit Tape(bool check_finite = true) : check_finite_(check_finite) {}

  std::size_t size() const { return nodes_.size(); }

  const Tensor& value(ValueId id) const { return nodes_[id].value; }

  // Gradient of the most recent backward() target w.r.t. node `id`.
  // Zero-filled for differentiable nodes untouched by the loss.
  const Tensor& grad(ValueId id) const {
    if (!backward_done_) throw NumericError("tape: grad queried before backward");
    return nodes_[id].grad;
  }

  bool requires_grad(ValueId id) const { return nodes_[id].requires_grad; }

  ValueId leaf(Tensor t, bool requires_grad = true) {
    Node n;
    n.op = Op::Leaf;
    n.value = std::move(t);
    n.requires_grad = requires_grad;
    return push(std::move(n));
  }

  ValueId constant(Tensor t) { return leaf(std::move(t), false); }

  ValueId matmul(ValueId a, ValueId b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (A.rank() != 2 || B.rank() != 2 || A.cols() != B.rows())
      throw NumericError("matmul: incompatible shapes " + A.shape_str() + " x " + B.shape_str());
    Tensor out = Tensor::zeros(A.rows(), B.cols());
    const std::size_t R = A.rows(), K = A.cols(), C = B.cols();
    for (std::size_t i = 0; i < R; ++i)
      for (std::size_t k = 0; k < K; ++k) {
        const double aik = A.at(i, k);
        if (aik == 0.0) continue;
        for (std::size_t j = 0; j < C; ++j) out.at(i, j) += aik * B.at(k, j);
      }
    return push_op(Op::MatMul, a, b, std::move(out));
  }

  ValueId add(ValueId a, ValueId b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (!A.same_shape(B))
      throw NumericError("add: shape mismatch " + A.shape_str() + " vs " + B.shape_str());
    Tensor out = A;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] += B[i];
    return push_op(Op::Add, a, b, std::move(out));
  }

  ValueId add_row(ValueId a, ValueId row) {
    const Tensor& A = val(a);
    const Tensor& B = val(row);
    if (A.rank() != 2 || B.numel() != A.cols())
      throw NumericError("add_row: row width " + B.shape_str() + " vs " + A.shape_str());
    Tensor out = A;
    for (std::size_t i = 0; i < A.rows(); ++i)
      for (std::size_t j = 0; j < A.cols(); ++j) out.at(i, j) += B[j];
    return push_op(Op::AddRow, a, row, std::move(out));
  }

  ValueId sub(ValueId a, ValueId b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (!A.same_shape(B))
      throw NumericError("sub: shape mismatch " + A.shape_str() + " vs " + B.shape_str());
    Tensor out = A;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= B[i];
    return push_op(Op::Sub, a, b, std::move(out));
  }

  ValueId mul(ValueId a, ValueId b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (!A.same_shape(B))
      throw NumericError("mul: shape mismatch " + A.shape_str() + " vs " + B.shape_str());
    Tensor out = A;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= B[i];
    return push_op(Op::Mul, a, b, std::move(out));
  }

  ValueId scale(ValueId a, double c) {
    Tensor out = val(a);
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= c;
    Node n;
    n.op = Op::Scale;
    n.a = a;
    n.scalar = c;
    n.value = std::move(out);
    n.requires_grad = nodes_[a].requires_grad;
    return push(std::move(n));
  }

  // out[i,:] = a[i,:] * w[i]
  ValueId row_scale(ValueId a, ValueId w) {
    const Tensor& A = val(a);
    const Tensor& W = val(w);
    if (A.rank() != 2 || W.numel() != A.rows())
      throw NumericError("row_scale: weights " + W.shape_str() + " vs " + A.shape_str());
    Tensor out = A;
    for (std::size_t i = 0; i < A.rows(); ++i)
      for (std::size_t j = 0; j < A.cols(); ++j) out.at(i, j) *= W[i];
    return push_op(Op::RowScale, a, w, std::move(out));
  }

  ValueId concat_cols(ValueId a, ValueId b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (A.rank() != 2 || B.rank() != 2 || A.rows() != B.rows())
      throw NumericError("concat_cols: " + A.shape_str() + " vs " + B.shape_str());
    Tensor out = Tensor::zeros(A.rows(), A.cols() + B.cols());
    for (std::size_t i = 0; i < A.rows(); ++i) {
      for (std::size_t j = 0; j < A.cols(); ++j) out.at(i, j) = A.at(i, j);
      for (std::size_t j = 0; j < B.cols(); ++j) out.at(i, A.cols() + j) = B.at(i, j);
    }
    return push_op(Op::ConcatCols, a, b, std::move(out));
  }

  ValueId row_gather(ValueId a, std::shared_ptr<const std::vector<int>> idx) {
    const Tensor& A = val(a);
    if (A.rank() != 2) throw NumericError("row_gather: rank-2 input required");
    Tensor out = Tensor::zeros(idx->size(), A.cols());
    for (std::size_t e = 0; e < idx->size(); ++e) {
      const int r = (*idx)[e];
      for (std::size_t j = 0; j < A.cols(); ++j) out.at(e, j) = A.at(r, j);
    }
    Node n;
    n.op = Op::RowGather;
    n.a = a;
    n.indices = std::move(idx);
    n.value = std::move(out);
    n.requires_grad = nodes_[a].requires_grad;
    return push(std::move(n));
  }

  // out[s,:] = sum over rows e with seg[e] == s
  ValueId segment_sum(ValueId a, std::shared_ptr<const std::vector<int>> seg, int num_segments) {
    const Tensor& A = val(a);
    if (A.rank() != 2 || seg->size() != A.rows())
      throw NumericError("segment_sum: segment ids must match row count");
    Tensor out = Tensor::zeros(static_cast<std::size_t>(num_segments), A.cols());
    for (std::size_t e = 0; e < A.rows(); ++e) {
      const int s = (*seg)[e];
      for (std::size_t j = 0; j < A.cols(); ++j) out.at(s, j) += A.at(e, j);
    }
    Node n;
    n.op = Op::SegmentSum;
    n.a = a;
    n.indices = std::move(seg);
    n.value = std::move(out);
    n.requires_grad = nodes_[a].requires_grad;
    return push(std::move(n));
  }

  ValueId sigmoid(ValueId a) {
    Tensor out = val(a);
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = stable_sigmoid(out[i]);
    return push_op(Op::Sigmoid, a, -1, std::move(out));
  }

  ValueId leaky_relu(ValueId a, double slope = 0.01) {
    Tensor out = val(a);
    for (std::size_t i = 0; i < out.numel(); ++i)
      if (out[i] < 0.0) out[i] *= slope;
    Node n;
    n.op = Op::LeakyRelu;
    n.a = a;
    n.scalar = slope;
    n.value = std::move(out);
    n.requires_grad = nodes_[a].requires_grad;
    return push(std::move(n));
  }

  ValueId softplus(ValueId a) {
    Tensor out = val(a);
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = stable_softplus(out[i]);
    return push_op(Op::Softplus, a, -1, std::move(out));
  }

  // Softmax over each segment of the flattened input. The max score of each
  // segment is subtracted before exponentiation (overflow-safe, same result).
  ValueId exp_normalize(ValueId a, std::shared_ptr<const std::vector<int>> seg, int num_segments) {
    const Tensor& A = val(a);
    if (seg->size() != A.numel())
      throw NumericError("exp_normalize: segment ids must match element count");
    std::vector<double> seg_max(num_segments, -std::numeric_limits<double>::infinity());
    for (std::size_t e = 0; e < A.numel(); ++e)
      seg_max[(*seg)[e]] = std::max(seg_max[(*seg)[e]], A[e]);
    Tensor out = A;
    std::vector<double> seg_sum(num_segments, 0.0);
    for (std::size_t e = 0; e < A.numel(); ++e) {
      out[e] = std::exp(A[e] - seg_max[(*seg)[e]]);
      seg_sum[(*seg)[e]] += out[e];
    }
    for (std::size_t e = 0; e < A.numel(); ++e) out[e] /= seg_sum[(*seg)[e]];
    Node n;
    n.op = Op::ExpNormalize;
    n.a = a;
    n.indices = std::move(seg);
    n.segments = num_segments;
    n.value = std::move(out);
    n.requires_grad = nodes_[a].requires_grad;
    return push(std::move(n));
  }

  ValueId row_sum(ValueId a) {
    const Tensor& A = val(a);
    if (A.rank() != 2) throw NumericError("row_sum: rank-2 input required");
    Tensor out = Tensor::zeros(A.rows());
    for (std::size_t i = 0; i < A.rows(); ++i)
      for (std::size_t j = 0; j < A.cols(); ++j) out[i] += A.at(i, j);
    return push_op(Op::RowSum, a, -1, std::move(out));
  }

  ValueId sum(ValueId a) {
    const Tensor& A = val(a);
    double s = 0.0;
    for (std::size_t i = 0; i < A.numel(); ++i) s += A[i];
    return push_op(Op::Sum, a, -1, Tensor::vector({s}));
  }

  ValueId sum_squares(ValueId a) {
    const Tensor& A = val(a);
    double s = 0.0;
    for (std::size_t i = 0; i < A.numel(); ++i) s += A[i] * A[i];
    return push_op(Op::SumSquares, a, -1, Tensor::vector({s}));
  }

  ValueId col_slice(ValueId a, std::size_t j) {
    const Tensor& A = val(a);
    if (A.rank() != 2 || j >= A.cols()) throw NumericError("col_slice: column out of range");
    Tensor out = Tensor::zeros(A.rows());
    for (std::size_t i = 0; i < A.rows(); ++i) out[i] = A.at(i, j);
    Node n;
    n.op = Op::ColSlice;
    n.a = a;
    n.column = j;
    n.value = std::move(out);
    n.requires_grad = nodes_[a].requires_grad;
    return push(std::move(n));
  }

  // Reverse sweep from a scalar loss. Fills grads for every node that
  // requires gradients; nodes never reached by the loss keep zeros.
  void backward(ValueId loss) {
    if (backward_done_) throw NumericError("tape: backward already called on this recording");
    if (val(loss).numel() != 1) throw NumericError("tape: backward target must be scalar");
    backward_done_ = true;
    for (auto& n : nodes_) {
      if (!n.requires_grad) continue;
      n.grad = n.value.rank() == 1 ? Tensor::zeros(n.value.numel())
                                   : Tensor::zeros(n.value.rows(), n.value.cols());
    }
    if (!nodes_[loss].requires_grad) return;  // loss is a constant
    nodes_[loss].grad[0] = 1.0;
    for (int id = loss; id >= 0; --id) {
      Node& n = nodes_[id];
      if (!n.requires_grad) continue;
      propagate(n);
    }
  }

 private:
  struct Node {
    Op op = Op::Leaf;
    ValueId a = -1;
    ValueId b = -1;
    double scalar = 0.0;
    std::size_t column = 0;
    int segments = 0;
    std::shared_ptr<const std::vector<int>> indices;
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
  };

  const Tensor& val(ValueId id) const { return nodes_[id].value; }

  ValueId push(Node n) {
    if (check_finite_ && !n.value.all_finite())
      throw NumericError("tape: non-finite value produced by op " +
                         std::to_string(static_cast<int>(n.op)));
    nodes_.push_back(std::move(n));
    return static_cast<ValueId>(nodes_.size()) - 1;
  }

  ValueId push_op(Op op, ValueId a, ValueId b, Tensor out) {
    Node n;
    n.op = op;
    n.a = a;
    n.b = b;
    n.value = std::move(out);
    n.requires_grad =
        (a >= 0 && nodes_[a].requires_grad) || (b >= 0 && nodes_[b].requires_grad);
    return push(std::move(n));
  }

  bool wants(ValueId id) const { return id >= 0 && nodes_[id].requires_grad; }

  void propagate(Node& n) {
    const Tensor& g = n.grad;
    switch (n.op) {
      case Op::Leaf:
        break;
      case Op::MatMul: {
        const Tensor& A = val(n.a);
        const Tensor& B = val(n.b);
        if (wants(n.a)) {
          Tensor& dA = nodes_[n.a].grad;
          for (std::size_t i = 0; i < A.rows(); ++i)
            for (std::size_t j = 0; j < B.cols(); ++j) {
              const double gij = g.at(i, j);
              if (gij == 0.0) continue;
              for (std::size_t k = 0; k < A.cols(); ++k) dA.at(i, k) += gij * B.at(k, j);
            }
        }
        if (wants(n.b)) {
          Tensor& dB = nodes_[n.b].grad;
          for (std::size_t i = 0; i < A.rows(); ++i)
            for (std::size_t k = 0; k < A.cols(); ++k) {
              const double aik = A.at(i, k);
              if (aik == 0.0) continue;
              for (std::size_t j = 0; j < B.cols(); ++j) dB.at(k, j) += aik * g.at(i, j);
            }
        }
        break;
      }
      case Op::Add:
        if (wants(n.a)) accumulate(n.a, g);
        if (wants(n.b)) accumulate(n.b, g);
        break;
      case Op::AddRow: {
        if (wants(n.a)) accumulate(n.a, g);
        if (wants(n.b)) {
          Tensor& dB = nodes_[n.b].grad;
          for (std::size_t i = 0; i < g.rows(); ++i)
            for (std::size_t j = 0; j < g.cols(); ++j) dB[j] += g.at(i, j);
        }
        break;
      }
      case Op::Sub:
        if (wants(n.a)) accumulate(n.a, g);
        if (wants(n.b)) {
          Tensor& dB = nodes_[n.b].grad;
          for (std::size_t i = 0; i < g.numel(); ++i) dB[i] -= g[i];
        }
        break;
      case Op::Mul: {
        if (wants(n.a)) {
          const Tensor& B = val(n.b);
          Tensor& dA = nodes_[n.a].grad;
          for (std::size_t i = 0; i < g.numel(); ++i) dA[i] += g[i] * B[i];
        }
        if (wants(n.b)) {
          const Tensor& A = val(n.a);
          Tensor& dB = nodes_[n.b].grad;
          for (std::size_t i = 0; i < g.numel(); ++i) dB[i] += g[i] * A[i];
        }
        break;
      }
      case Op::Scale:
        if (wants(n.a)) {
          Tensor& dA = nodes_[n.a].grad;
          for (std::size_t i = 0; i < g.numel(); ++i) dA[i] += n.scalar * g[i];
        }
        break;
      case Op::RowScale: {
        const Tensor& A = val(n.a);
        const Tensor& W = val(n.b);
        if (wants(n.a)) {
          Tensor& dA = nodes_[n.a].grad;
          for (std::size_t i = 0; i < A.rows(); ++i)
            for (std::size_t j = 0; j < A.cols(); ++j) dA.at(i, j) += g.at(i, j) * W[i];
        }
        if (wants(n.b)) {
          Tensor& dW = nodes_[n.b].grad;
          for (std::size_t i = 0; i < A.rows(); ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < A.cols(); ++j) s += g.at(i, j) * A.at(i, j);
            dW[i] += s;
          }
        }
        break;
      }
      case Op::ConcatCols: {
        const Tensor& A = val(n.a);
        const Tensor& B = val(n.b);
        if (wants(n.a)) {
          Tensor& dA = nodes_[n.a].grad;
          for (std::size_t i = 0; i < A.rows(); ++i)
            for (std::size_t j = 0; j < A.cols(); ++j) dA.at(i, j) += g.at(i, j);
        }
        if (wants(n.b)) {
          Tensor& dB = nodes_[n.b].grad;
          for (std::size_t i = 0; i < B.rows(); ++i)
            for (std::size_t j = 0; j < B.cols(); ++j) dB.at(i, j) += g.at(i, A.cols() + j);
        }
        break;
      }
      case Op::RowGather: {
        if (wants(n.a)) {
          Tensor& dA = nodes_[n.a].grad;
          const auto& idx = *n.indices;
          for (std::size_t e = 0; e < idx.size(); ++e)
            for (std::size_t j = 0; j < g.cols(); ++j) dA.at(idx[e], j) += g.at(e, j);
        }
        break;
      }
      case Op::SegmentSum: {
        if (wants(n.a)) {
          Tensor& dA = nodes_[n.a].grad;
          const auto& seg = *n.indices;
          for (std::size_t e = 0; e < seg.size(); ++e)
            for (std::size_t j = 0; j < g.cols(); ++j) dA.at(e, j) += g.at(seg[e], j);
        }
        break;
      }
      case Op::Sigmoid:
        if (wants(n.a)) {
          Tensor& dA = nodes_[n.a].grad;
          const Tensor& y = n.value;
          for (std::size_t i = 0; i < g.numel(); ++i) dA[i] += g[i] * y[i] * (1.0 - y[i]);
        }
        break;
      case Op::LeakyRelu:
        if (wants(n.a)) {
          Tensor& dA = nodes_[n.a].grad;
          const Tensor& x = val(n.a);
          for (std::size_t i = 0; i < g.numel(); ++i)
            dA[i] += g[i] * (x[i] >= 0.0 ? 1.0 : n.scalar);
        }
        break;
      case Op::Softplus:
        if (wants(n.a)) {
          Tensor& dA = nodes_[n.a].grad;
          const Tensor& x = val(n.a);
          for (std::size_t i = 0; i < g.numel(); ++i) dA[i] += g[i] * stable_sigmoid(x[i]);
        }
        break;
      case Op::ExpNormalize: {
        if (wants(n.a)) {
          // dx_e = y_e * (g_e - sum_{e' in same segment} g_e' * y_e')
          Tensor& dA = nodes_[n.a].grad;
          const Tensor& y = n.value;
          const auto& seg = *n.indices;
          std::vector<double> seg_dot(n.segments, 0.0);
          for (std::size_t e = 0; e < y.numel(); ++e) seg_dot[seg[e]] += g[e] * y[e];
          for (std::size_t e = 0; e < y.numel(); ++e)
            dA[e] += y[e] * (g[e] - seg_dot[seg[e]]);
        }
        break;
      }
      case Op::RowSum:
        if (wants(n.a)) {
          Tensor& dA = nodes_[n.a].grad;
          for (std::size_t i = 0; i < dA.rows(); ++i)
            for (std::size_t j = 0; j < dA.cols(); ++j) dA.at(i, j) += g[i];
        }
        break;
      case Op::Sum:
        if (wants(n.a)) {
          Tensor& dA = nodes_[n.a].grad;
          for (std::size_t i = 0; i < dA.numel(); ++i) dA[i] += g[0];
        }
        break;
      case Op::SumSquares:
        if (wants(n.a)) {
          Tensor& dA = nodes_[n.a].grad;
          const Tensor& A = val(n.a);
          for (std::size_t i = 0; i < dA.numel(); ++i) dA[i] += 2.0 * g[0] * A[i];
        }
        break;
      case Op::ColSlice:
        if (wants(n.a)) {
          Tensor& dA = nodes_[n.a].grad;
          for (std::size_t i = 0; i < g.numel(); ++i) dA.at(i, n.column) += g[i];
        }
        break;
    }
  }

  void accumulate(ValueId id, const Tensor& g) {
    Tensor& dst = nodes_[id].grad;
    for (std::size_t i = 0; i < g.numel(); ++i) dst[i] += g[i];
  }

  std::vector<Node> nodes_;
  bool check_finite_ = true;
  bool backward_done_ = false;
};

}  // namespace diffnet
