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

// Per-task key learners, the triplet + L1 key objective, hard-negative
// mining across learners, and the task matcher used when no task id is known.

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "incprompt/attention.hpp"
#include "incprompt/backbone.hpp"
#include "incprompt/core/errors.hpp"
#include "incprompt/core/ops.hpp"
#include "incprompt/core/random.hpp"
#include "incprompt/core/tape.hpp"

namespace incprompt {

struct KeyLossConfig {
  double margin = 0.5;
  double lambda_reg = 0.01;

  void validate() const {
    require(std::isfinite(margin) && margin >= 0, "key_loss: margin must be finite and >= 0");
    require(std::isfinite(lambda_reg) && lambda_reg >= 0, "key_loss: lambda_reg must be finite and >= 0");
  }
};

enum class Similarity { cosine, euclidean };

inline std::string to_string(Similarity s) { return s == Similarity::cosine ? "cosine" : "euclidean"; }

inline Similarity similarity_from_string(const std::string& s) {
  if (s == "cosine") return Similarity::cosine;
  if (s == "euclidean") return Similarity::euclidean;
  throw ConfigError("unknown similarity '" + s + "'");
}

/// Reduction of output tokens to T_k, the per-input vector the keys are compared to.
inline constexpr PoolMode kTokenPool = PoolMode::mean;

/// Cosine similarity, or negative Euclidean distance. A zero vector has cosine 0.
template <typename Scalar, typename A, typename B>
Scalar similarity(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b, Similarity kind) {
  if (kind == Similarity::euclidean) return -(a - b).norm();
  const Scalar na = a.norm(), nb = b.norm();
  if (na == Scalar(0) || nb == Scalar(0)) return Scalar(0);
  return a.dot(b) / (na * nb);
}

template <typename Scalar>
class KeyLearner {
 public:
  using Mat = Matrix<Scalar>;

  KeyLearner(int task_id, int embed_dim, int key_dim, PoolMode pool, std::uint64_t seed)
      : task_id_(task_id), pool_(pool) {
    require(embed_dim > 0 && key_dim > 0, "key_learner: dimensions must be positive");
    Rng rng = derive_rng(seed, 0x6B65790000ull + static_cast<std::uint64_t>(task_id));
    const std::string pre = "key" + std::to_string(task_id) + ".";
    wq_ = {pre + "wq", xavier_uniform<Scalar>(embed_dim, key_dim, rng)};
    wk_ = {pre + "wk", xavier_uniform<Scalar>(embed_dim, key_dim, rng)};
    wv_ = {pre + "wv", xavier_uniform<Scalar>(embed_dim, key_dim, rng)};
  }

  /// Builds a learner from explicit projections (each [embed_dim, key_dim]).
  KeyLearner(int task_id, Mat wq, Mat wk, Mat wv, PoolMode pool = PoolMode::mean)
      : task_id_(task_id), pool_(pool) {
    require(wq.rows() == wk.rows() && wk.rows() == wv.rows(), "key_learner: projection input widths differ");
    require(wq.cols() == wk.cols(), "key_learner: query/key widths differ");
    require(wq.cols() > 0 && wv.cols() > 0, "key_learner: key_dim must be positive");
    const std::string pre = "key" + std::to_string(task_id) + ".";
    wq_ = {pre + "wq", std::move(wq)};
    wk_ = {pre + "wk", std::move(wk)};
    wv_ = {pre + "wv", std::move(wv)};
  }

  int task_id() const { return task_id_; }
  PoolMode pool() const { return pool_; }
  Eigen::Index embed_dim() const { return wq_.value.rows(); }
  Eigen::Index key_dim() const { return wv_.value.cols(); }

  void set_trainable(bool trainable) {
    for (auto* p : {&wq_, &wk_, &wv_}) p->trainable = trainable;
  }

  template <typename F>
  void for_each_parameter(F&& f) {
    f(wq_);
    f(wk_);
    f(wv_);
  }

  template <typename F>
  void for_each_parameter(F&& f) const {
    f(wq_);
    f(wk_);
    f(wv_);
  }

  /// One self-attention pass through this learner's projections, pooled to 1 x key_dim.
  Var<Scalar> key(Tape<Scalar>& tape, const Var<Scalar>& tokens) const {
    if (tokens.cols() != embed_dim()) throw ConfigError("compute_key: token width differs from learner input");
    Var<Scalar> q = ops::matmul(tokens, tape.parameter(wq_));
    Var<Scalar> k = ops::matmul(tokens, tape.parameter(wk_));
    Var<Scalar> v = ops::matmul(tokens, tape.parameter(wv_));
    return incprompt::pool(attention(q, k, v), pool_);
  }

  Mat key(const Mat& tokens) const {
    Tape<Scalar> tape(false);
    return key(tape, tape.constant(tokens)).value();
  }

 private:
  int task_id_;
  PoolMode pool_;
  Parameter<Scalar> wq_, wk_, wv_;
};

template <typename Scalar>
Matrix<Scalar> compute_key(const KeyLearner<Scalar>& learner, const TokenBatch<Scalar>& tokens) {
  if (!tokens.all_finite()) throw NumericError("compute_key: non-finite tokens");
  Matrix<Scalar> out(static_cast<Eigen::Index>(tokens.batch()), learner.key_dim());
  for (std::size_t b = 0; b < tokens.batch(); ++b) {
    out.row(static_cast<Eigen::Index>(b)) = learner.key(tokens.tokens[b]);
  }
  return out;
}

namespace detail {

/// Index into `learners` of the most similar key, skipping `exclude_task`; ties go to the lowest task id.
template <typename Scalar>
int best_learner(const Matrix<Scalar>& tokens, const Matrix<Scalar>& feature,
                 const std::vector<KeyLearner<Scalar>>& learners, Similarity kind, int exclude_task,
                 Matrix<Scalar>* best_key = nullptr) {
  int best = -1;
  Scalar best_sim = -std::numeric_limits<Scalar>::infinity();
  for (std::size_t i = 0; i < learners.size(); ++i) {
    const auto& l = learners[i];
    if (l.task_id() == exclude_task) continue;
    Matrix<Scalar> k = l.key(tokens);
    if (k.cols() != feature.cols()) throw ConfigError("key matching: key_dim must equal embed_dim");
    const Scalar s = similarity<Scalar>(k.row(0), feature.row(0), kind);
    const bool better = best < 0 || s > best_sim ||
                        (s == best_sim && l.task_id() < learners[static_cast<std::size_t>(best)].task_id());
    if (better) {
      best = static_cast<int>(i);
      best_sim = s;
      if (best_key) *best_key = std::move(k);
    }
  }
  return best;
}

template <typename Scalar>
Matrix<Scalar> token_feature(const Matrix<Scalar>& tokens) {
  return kTokenPool == PoolMode::cls ? Matrix<Scalar>(tokens.row(0)) : Matrix<Scalar>(tokens.colwise().mean());
}

}  // namespace detail

/// Hard negative for one input: the key of the most similar learner other
/// than `anchor_task`. Empty when no other learner exists.
template <typename Scalar>
std::optional<Matrix<Scalar>> mine_negative(int anchor_task, const Matrix<Scalar>& tokens,
                                            const std::vector<KeyLearner<Scalar>>& learners,
                                            Similarity kind = Similarity::cosine) {
  Matrix<Scalar> key;
  const int best = detail::best_learner(tokens, detail::token_feature(tokens), learners, kind, anchor_task, &key);
  if (best < 0) return std::nullopt;
  return key;
}

/// Batched form; row b holds the hard negative for input b.
template <typename Scalar>
std::optional<Matrix<Scalar>> mine_negative(int anchor_task, const TokenBatch<Scalar>& tokens,
                                            const std::vector<KeyLearner<Scalar>>& learners,
                                            Similarity kind = Similarity::cosine) {
  if (!tokens.all_finite()) throw NumericError("mine_negative: non-finite tokens");
  std::optional<Matrix<Scalar>> out;
  for (std::size_t b = 0; b < tokens.batch(); ++b) {
    auto k = mine_negative(anchor_task, tokens.tokens[b], learners, kind);
    if (!k) return std::nullopt;
    if (!out) out = Matrix<Scalar>(static_cast<Eigen::Index>(tokens.batch()), k->cols());
    out->row(static_cast<Eigen::Index>(b)) = *k;
  }
  return out;
}

/// max(0, |t - k_a|^2 - |t - k_n|^2 + margin) for one input (1xD rows).
template <typename Scalar>
Var<Scalar> triplet_term(const Var<Scalar>& t, const Var<Scalar>& anchor, const Var<Scalar>& negative,
                         Scalar margin) {
  Var<Scalar> gap = ops::sub(ops::sum_squares(ops::sub(t, anchor)), ops::sum_squares(ops::sub(t, negative)));
  return ops::relu(ops::add_scalar(gap, margin));
}

/// lambda * |k_a|_1 + triplet term (omitted when `negative` is invalid).
template <typename Scalar>
Var<Scalar> key_loss_term(const Var<Scalar>& t, const Var<Scalar>& anchor, const Var<Scalar>* negative,
                          const KeyLossConfig& cfg) {
  Var<Scalar> loss = ops::scale(ops::abs_sum(anchor), static_cast<Scalar>(cfg.lambda_reg));
  if (negative) loss = ops::add(loss, triplet_term(t, anchor, *negative, static_cast<Scalar>(cfg.margin)));
  return loss;
}

template <typename Scalar>
Scalar triplet_loss(const Matrix<Scalar>& t, const Matrix<Scalar>& anchor, const Matrix<Scalar>& negative,
                    Scalar margin) {
  if (t.rows() != anchor.rows() || t.cols() != anchor.cols() || t.rows() != negative.rows() ||
      t.cols() != negative.cols()) {
    throw ConfigError("triplet_loss: shape mismatch");
  }
  if (!(margin >= Scalar(0))) throw ConfigError("triplet_loss: margin must be >= 0");
  Scalar total = 0;
  for (Eigen::Index i = 0; i < t.rows(); ++i) {
    const Scalar pos = (t.row(i) - anchor.row(i)).squaredNorm();
    const Scalar neg = (t.row(i) - negative.row(i)).squaredNorm();
    total += std::max(Scalar(0), pos - neg + margin);
  }
  return total;
}

template <typename Scalar>
Scalar l1_reg(const Matrix<Scalar>& anchor) {
  if (!anchor.allFinite()) throw NumericError("l1_reg: non-finite keys");
  return anchor.cwiseAbs().sum();
}

template <typename Scalar>
Scalar key_loss(const Matrix<Scalar>& t, const Matrix<Scalar>& anchor, const std::optional<Matrix<Scalar>>& negative,
                const KeyLossConfig& cfg) {
  cfg.validate();
  Scalar loss = static_cast<Scalar>(cfg.lambda_reg) * l1_reg(anchor);
  if (negative) loss += triplet_loss(t, anchor, *negative, static_cast<Scalar>(cfg.margin));
  return loss;
}

/// Task id of the learner whose key best matches the pooled tokens of one input.
template <typename Scalar>
int match_task(const Matrix<Scalar>& tokens, const std::vector<KeyLearner<Scalar>>& learners,
               Similarity kind = Similarity::cosine) {
  if (learners.empty()) throw ConfigError("match_task: no key learners registered");
  const int best = detail::best_learner(tokens, detail::token_feature(tokens), learners, kind,
                                        std::numeric_limits<int>::min());
  return learners[static_cast<std::size_t>(best)].task_id();
}

template <typename Scalar>
std::vector<int> match_task(const TokenBatch<Scalar>& tokens, const std::vector<KeyLearner<Scalar>>& learners,
                            Similarity kind = Similarity::cosine) {
  if (!tokens.all_finite()) throw NumericError("match_task: non-finite tokens");
  std::vector<int> out;
  out.reserve(tokens.batch());
  for (const auto& t : tokens.tokens) out.push_back(match_task(t, learners, kind));
  return out;
}

}  // namespace incprompt
