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

// Task-aware prompt generation: a per-task two-layer feedforward map from the
// pooled prompt-free feature to one (P_k, P_v) pair per prompted layer.

#pragma once

#include <cstdint>
#include <string>
#include <utility>

#include "incprompt/attention.hpp"
#include "incprompt/backbone.hpp"
#include "incprompt/core/errors.hpp"
#include "incprompt/core/ops.hpp"
#include "incprompt/core/random.hpp"
#include "incprompt/core/tape.hpp"

namespace incprompt {

enum class Activation { relu, gelu };

inline std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "gelu"; }

inline Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "gelu") return Activation::gelu;
  throw ConfigError("unknown activation '" + s + "'");
}

/// Prompt tensor [layers, 2, length, dim], stored as (layers * 2 * length) rows of width dim.
/// Row ((layer * 2 + half) * length + i) holds token i of the key (half 0) or value (half 1) part.
template <typename Scalar>
struct Prompt {
  int layers = 0;
  int length = 0;
  int dim = 0;
  Matrix<Scalar> values;

  Eigen::Index row(int layer, int half, int i) const {
    return (static_cast<Eigen::Index>(layer) * 2 + half) * length + i;
  }
  bool well_formed() const {
    return layers >= 0 && length >= 0 && dim >= 0 && values.rows() == static_cast<Eigen::Index>(layers) * 2 * length &&
           (values.rows() == 0 || values.cols() == dim);
  }
};

/// One half of a prompt: [layers, length, dim] as (layers * length) rows.
template <typename Scalar>
struct PromptHalf {
  int layers = 0;
  int length = 0;
  int dim = 0;
  Matrix<Scalar> values;

  Matrix<Scalar> layer(int l) const { return values.middleRows(static_cast<Eigen::Index>(l) * length, length); }
};

template <typename Scalar>
std::pair<PromptHalf<Scalar>, PromptHalf<Scalar>> divide(const Prompt<Scalar>& p) {
  if (!p.well_formed()) throw ConfigError("divide: malformed prompt tensor");
  PromptHalf<Scalar> k{p.layers, p.length, p.dim, Matrix<Scalar>(static_cast<Eigen::Index>(p.layers) * p.length, p.dim)};
  PromptHalf<Scalar> v = k;
  for (int l = 0; l < p.layers; ++l) {
    const Eigen::Index dst = static_cast<Eigen::Index>(l) * p.length;
    k.values.middleRows(dst, p.length) = p.values.middleRows(p.row(l, 0, 0), p.length);
    v.values.middleRows(dst, p.length) = p.values.middleRows(p.row(l, 1, 0), p.length);
  }
  return {std::move(k), std::move(v)};
}

/// Inverse of divide().
template <typename Scalar>
Prompt<Scalar> concatenate(const PromptHalf<Scalar>& k, const PromptHalf<Scalar>& v) {
  if (k.layers != v.layers || k.length != v.length || k.dim != v.dim || k.values.rows() != v.values.rows()) {
    throw ConfigError("concatenate: key and value halves differ in shape");
  }
  Prompt<Scalar> p{k.layers, k.length, k.dim, Matrix<Scalar>(static_cast<Eigen::Index>(k.layers) * 2 * k.length, k.dim)};
  for (int l = 0; l < k.layers; ++l) {
    const Eigen::Index src = static_cast<Eigen::Index>(l) * k.length;
    p.values.middleRows(p.row(l, 0, 0), k.length) = k.values.middleRows(src, k.length);
    p.values.middleRows(p.row(l, 1, 0), k.length) = v.values.middleRows(src, k.length);
  }
  return p;
}

template <typename Scalar>
class TaskPrompter {
 public:
  using Mat = Matrix<Scalar>;

  TaskPrompter(int task_id, int embed_dim, int hidden_dim, const PromptSchedule& schedule, Activation act,
               std::uint64_t seed)
      : task_id_(task_id), embed_dim_(embed_dim), layers_(schedule.active() ? schedule.depth() : 0),
        length_(schedule.active() ? schedule.prompt_length : 0), activation_(act) {
    require(embed_dim > 0 && hidden_dim > 0, "prompter: dimensions must be positive");
    Rng rng = derive_rng(seed, 0x70726F0000ull + static_cast<std::uint64_t>(task_id));
    const std::string pre = "prompter" + std::to_string(task_id) + ".";
    w1_ = {pre + "w1", xavier_uniform<Scalar>(embed_dim, hidden_dim, rng)};
    b1_ = {pre + "b1", Mat::Zero(1, hidden_dim)};
    const Eigen::Index out = output_size();
    w2_ = {pre + "w2", out > 0 ? xavier_uniform<Scalar>(hidden_dim, out, rng) : Mat(hidden_dim, 0)};
    b2_ = {pre + "b2", Mat::Zero(1, out)};
  }

  int task_id() const { return task_id_; }
  int layers() const { return layers_; }
  int length() const { return length_; }
  int embed_dim() const { return embed_dim_; }
  Activation activation() const { return activation_; }
  Eigen::Index output_size() const { return static_cast<Eigen::Index>(layers_) * 2 * length_ * embed_dim_; }

  Parameter<Scalar>& w1() { return w1_; }
  Parameter<Scalar>& b1() { return b1_; }
  Parameter<Scalar>& w2() { return w2_; }
  Parameter<Scalar>& b2() { return b2_; }

  void set_trainable(bool trainable) {
    for (auto* p : {&w1_, &b1_, &w2_, &b2_}) p->trainable = trainable;
  }

  template <typename F>
  void for_each_parameter(F&& f) {
    for (auto* p : {&w1_, &b1_, &w2_, &b2_}) f(*p);
  }

  template <typename F>
  void for_each_parameter(F&& f) const {
    for (const auto* p : {&w1_, &b1_, &w2_, &b2_}) f(*p);
  }

  /// act(f W1 + b1) W2 + b2 reshaped to [layers * 2 * length, dim].
  Var<Scalar> generate(Tape<Scalar>& tape, const Var<Scalar>& feature) const {
    if (feature.rows() != 1 || feature.cols() != embed_dim_) throw ConfigError("generate_prompt: feature width mismatch");
    if (output_size() == 0) return tape.constant(Mat(0, embed_dim_));
    Var<Scalar> h = ops::add_row(ops::matmul(feature, tape.parameter(w1_)), tape.parameter(b1_));
    h = activation_ == Activation::relu ? ops::relu(h) : ops::gelu(h);
    Var<Scalar> out = ops::add_row(ops::matmul(h, tape.parameter(w2_)), tape.parameter(b2_));
    return ops::reshape(out, static_cast<Eigen::Index>(layers_) * 2 * length_, embed_dim_);
  }

  /// Splits generate() output into per-layer prompt pairs keyed by backbone layer.
  LayerPrompts<Scalar> layer_prompts(const Var<Scalar>& generated, const PromptSchedule& schedule) const {
    LayerPrompts<Scalar> out;
    if (!schedule.active()) return out;
    if (schedule.depth() != layers_ || schedule.prompt_length != length_) {
      throw ConfigError("prompter: schedule differs from the one it was built for");
    }
    for (int s = 0; s < layers_; ++s) {
      const Eigen::Index base = static_cast<Eigen::Index>(s) * 2 * length_;
      out[schedule.layers[static_cast<std::size_t>(s)]] = {ops::slice_rows(generated, base, length_),
                                                           ops::slice_rows(generated, base + length_, length_)};
    }
    return out;
  }

 private:
  int task_id_;
  int embed_dim_;
  int layers_;
  int length_;
  Activation activation_;
  Parameter<Scalar> w1_, b1_, w2_, b2_;
};

/// Prompt generated from the pooled prompt-free feature of each input.
template <typename Scalar>
std::vector<Prompt<Scalar>> generate_prompt(const TaskPrompter<Scalar>& prompter, const TokenBatch<Scalar>& tokens,
                                            PoolMode pool_mode = PoolMode::mean) {
  if (tokens.embed_dim() != prompter.embed_dim()) throw ConfigError("generate_prompt: token width mismatch");
  const Matrix<Scalar> features = pooled_feature(tokens, pool_mode);
  std::vector<Prompt<Scalar>> out;
  for (Eigen::Index b = 0; b < features.rows(); ++b) {
    Tape<Scalar> tape(false);
    Var<Scalar> p = prompter.generate(tape, tape.constant(Matrix<Scalar>(features.row(b))));
    out.push_back({prompter.layers(), prompter.length(), prompter.embed_dim(), p.value()});
  }
  return out;
}

}  // namespace incprompt
