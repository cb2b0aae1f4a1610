#pragma once

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "diffnet/errors.hpp"
#include "diffnet/tape.hpp"
#include "diffnet/tensor.hpp"

namespace diffnet {

// Ordered collection of named trainable arrays. Declaration order is part of
// the checkpoint contract, so arrays live in a vector with a name index.
class ParameterSet {
 public:
  void add(const std::string& name, Tensor t) {
    if (index_.count(name)) throw ConfigError("parameter already declared: " + name);
    index_[name] = arrays_.size();
    arrays_.emplace_back(name, std::move(t));
  }

  bool has(const std::string& name) const { return index_.count(name) != 0; }

  Tensor& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
    return arrays_[it->second].second;
  }
  const Tensor& at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
    return arrays_[it->second].second;
  }

  std::size_t count() const { return arrays_.size(); }
  const std::string& name(std::size_t i) const { return arrays_[i].first; }
  Tensor& tensor(std::size_t i) { return arrays_[i].second; }
  const Tensor& tensor(std::size_t i) const { return arrays_[i].second; }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : arrays_) n += t.numel();
    return n;
  }

  bool all_finite() const {
    for (const auto& [name, t] : arrays_)
      if (!t.all_finite()) return false;
    return true;
  }

  // Same-shaped zero copy; used for gradients and optimizer moments.
  ParameterSet zeros_like() const {
    ParameterSet out;
    for (const auto& [name, t] : arrays_)
      out.add(name, t.rank() == 1 ? Tensor::zeros(t.numel()) : Tensor::zeros(t.rows(), t.cols()));
    return out;
  }

 private:
  std::vector<std::pair<std::string, Tensor>> arrays_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Gradients are shape-congruent with their ParameterSet.
using GradientBundle = ParameterSet;

// Leaf ids of one ParameterSet registered on one tape.
class TapeBinding {
 public:
  TapeBinding(Tape& tape, const ParameterSet& params) : tape_(&tape) {
    for (std::size_t i = 0; i < params.count(); ++i) {
      ids_.emplace_back(params.name(i), tape.leaf(params.tensor(i), true));
    }
  }

  ValueId id(const std::string& name) const {
    for (const auto& [n, id] : ids_)
      if (n == name) return id;
    throw ConfigError("parameter not bound on tape: " + name);
  }

  const std::vector<std::pair<std::string, ValueId>>& all() const { return ids_; }

  // Collects leaf gradients after tape.backward(); untouched leaves yield zeros.
  GradientBundle gradients() const {
    GradientBundle g;
    for (const auto& [name, id] : ids_) g.add(name, tape_->grad(id));
    return g;
  }

 private:
  Tape* tape_;
  std::vector<std::pair<std::string, ValueId>> ids_;
};

}  // namespace diffnet
