/**
 * Copyright 2026 The incprompt Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Reverse-mode automatic differentiation over dense row-major matrices.
//
// A Tape records every intermediate value of one forward computation. Each
// recorded node keeps the closure that maps its output gradient onto the
// gradients of its inputs. Parameters enter the tape through
// Tape::parameter(); frozen parameters (trainable == false) become constants
// and never receive a gradient.

#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "incprompt/core/errors.hpp"

namespace incprompt {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
struct Parameter {
  std::string name;
  Matrix<Scalar> value;
  bool trainable = true;

  Parameter() = default;
  Parameter(std::string n, Matrix<Scalar> v, bool train = true)
      : name(std::move(n)), value(std::move(v)), trainable(train) {}

  Eigen::Index size() const { return value.size(); }
};

template <typename Scalar>
class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy.
template <typename Scalar>
class Var {
 public:
  Var() = default;
  Var(Tape<Scalar>* tape, std::size_t index) : tape_(tape), index_(index) {}

  Tape<Scalar>& tape() const { return *tape_; }
  std::size_t index() const { return index_; }
  bool valid() const { return tape_ != nullptr; }

  const Matrix<Scalar>& value() const { return tape_->value(index_); }
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Scalar scalar() const { return value()(0, 0); }
  bool requires_grad() const { return tape_->requires_grad(index_); }

 private:
  Tape<Scalar>* tape_ = nullptr;
  std::size_t index_ = 0;
};

template <typename Scalar>
class Tape {
 public:
  using Mat = Matrix<Scalar>;
  using Backward = std::function<void(Tape&, const Mat&)>;

  /// With gradients disabled nothing but values is recorded.
  explicit Tape(bool enable_grad = true) : enable_grad_(enable_grad) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool grad_enabled() const { return enable_grad_; }

  Var<Scalar> constant(Mat value) { return push(std::move(value), false, nullptr); }

  Var<Scalar> constant(Scalar value) {
    Mat m(1, 1);
    m(0, 0) = value;
    return constant(std::move(m));
  }

  /// One node per parameter per tape; repeated calls return the same node.
  Var<Scalar> parameter(const Parameter<Scalar>& p) {
    auto it = param_nodes_.find(&p);
    if (it != param_nodes_.end()) return Var<Scalar>(this, it->second);
    Var<Scalar> v = push(p.value, enable_grad_ && p.trainable, nullptr);
    param_nodes_.emplace(&p, v.index());
    return v;
  }

  /// Records an op result. `backward` runs only when some input needs a gradient.
  Var<Scalar> record(Mat value, std::initializer_list<Var<Scalar>> inputs, Backward backward) {
    bool needs = false;
    if (enable_grad_) {
      for (const auto& in : inputs) needs = needs || requires_grad(in.index());
    }
    return push(std::move(value), needs, needs ? std::move(backward) : Backward{});
  }

  Var<Scalar> record(Mat value, const std::vector<Var<Scalar>>& inputs, Backward backward) {
    bool needs = false;
    if (enable_grad_) {
      for (const auto& in : inputs) needs = needs || requires_grad(in.index());
    }
    return push(std::move(value), needs, needs ? std::move(backward) : Backward{});
  }

  const Mat& value(std::size_t i) const { return nodes_[i].value; }
  bool requires_grad(std::size_t i) const { return nodes_[i].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Adds `g` into the gradient of node `i` if that node tracks gradients.
  template <typename Derived>
  void accumulate(std::size_t i, const Eigen::MatrixBase<Derived>& g) {
    Node& n = nodes_[i];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

  /// Back-propagates from a 1x1 root, seeding d(root)/d(root) = 1.
  void backward(const Var<Scalar>& root) {
    if (root.rows() != 1 || root.cols() != 1) throw ConfigError("backward: root must be a scalar");
    if (!requires_grad(root.index())) return;
    Mat seed = Mat::Ones(1, 1);
    accumulate(root.index(), seed);
    for (std::size_t i = root.index() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.requires_grad || n.grad.size() == 0 || !n.backward) continue;
      n.backward(*this, n.grad);
    }
  }

  /// Gradient of the last backward() root w.r.t. a parameter; zero-sized when
  /// the parameter was frozen, unused, or received no gradient.
  Mat gradient(const Parameter<Scalar>& p) const {
    auto it = param_nodes_.find(&p);
    if (it == param_nodes_.end()) return Mat();
    return nodes_[it->second].grad;
  }

  const Mat& grad(const Var<Scalar>& v) const { return nodes_[v.index()].grad; }

 private:
  struct Node {
    Mat value;
    Mat grad;
    bool requires_grad = false;
    Backward backward;
  };

  Var<Scalar> push(Mat value, bool requires_grad, Backward backward) {
    nodes_.push_back(Node{std::move(value), Mat(), requires_grad, std::move(backward)});
    return Var<Scalar>(this, nodes_.size() - 1);
  }

  bool enable_grad_;
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter<Scalar>*, std::size_t> param_nodes_;
};

}  // namespace incprompt
