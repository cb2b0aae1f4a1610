#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "diffnet/errors.hpp"

namespace diffnet {

// Dense row-major array of doubles, rank 1 or 2. All model state and
// gradients flow through this type; every op output is checked for
// non-finite values at creation (see Tape).
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::size_t n) { return Tensor(n, std::vector<double>(n, 0.0)); }
  static Tensor zeros(std::size_t r, std::size_t c) {
    return Tensor(r, c, std::vector<double>(r * c, 0.0));
  }
  static Tensor vector(std::vector<double> values) {
    const std::size_t n = values.size();
    return Tensor(n, std::move(values));
  }
  static Tensor matrix(std::size_t r, std::size_t c, std::vector<double> values) {
    if (values.size() != r * c) throw ConfigError("tensor: value count does not match shape");
    return Tensor(r, c, std::move(values));
  }

  int rank() const { return rank_; }
  std::size_t numel() const { return data_.size(); }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  bool same_shape(const Tensor& o) const {
    return rank_ == o.rank_ && rows_ == o.rows_ && cols_ == o.cols_;
  }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  std::string shape_str() const {
    if (rank_ == 1) return "[" + std::to_string(rows_) + "]";
    return "[" + std::to_string(rows_) + "x" + std::to_string(cols_) + "]";
  }

 private:
  Tensor(std::size_t n, std::vector<double> values)
      : rank_(1), rows_(n), cols_(1), data_(std::move(values)) {}
  Tensor(std::size_t r, std::size_t c, std::vector<double> values)
      : rank_(2), rows_(r), cols_(c), data_(std::move(values)) {}

  int rank_ = 1;
  std::size_t rows_ = 0;
  std::size_t cols_ = 1;
  std::vector<double> data_;
};

}  // namespace diffnet
