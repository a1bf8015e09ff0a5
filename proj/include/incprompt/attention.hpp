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

// Scaled dot-product attention and its prefix-prompted variant, where prompt
// keys and values are appended to the sequence axis of K and V.

#pragma once

#include <cmath>

#include "incprompt/core/errors.hpp"
#include "incprompt/core/ops.hpp"
#include "incprompt/core/tape.hpp"

namespace incprompt {

namespace detail {

template <typename Scalar>
void require_finite(const Matrix<Scalar>& m, const char* what) {
  if (!m.allFinite()) throw NumericError(std::string(what) + ": non-finite input");
}

template <typename Scalar>
void check_attention_shapes(Eigen::Index q_cols, Eigen::Index k_rows, Eigen::Index k_cols,
                            Eigen::Index v_rows) {
  if (q_cols <= 0) throw ConfigError("attention: head dimension must be positive");
  if (q_cols != k_cols) throw ConfigError("attention: query and key widths differ");
  if (k_rows != v_rows) throw ConfigError("attention: keys and values differ in length");
}

}  // namespace detail

/// softmax(Q K^T / sqrt(d_k)) as a tape node.
template <typename Scalar>
Var<Scalar> attention_weights(const Var<Scalar>& q, const Var<Scalar>& k) {
  detail::check_attention_shapes<Scalar>(q.cols(), k.rows(), k.cols(), k.rows());
  const Scalar inv = Scalar(1) / std::sqrt(static_cast<Scalar>(q.cols()));
  return ops::softmax_rows(ops::scale(ops::matmul_nt(q, k), inv));
}

template <typename Scalar>
Var<Scalar> attention(const Var<Scalar>& q, const Var<Scalar>& k, const Var<Scalar>& v) {
  detail::check_attention_shapes<Scalar>(q.cols(), k.rows(), k.cols(), v.rows());
  return ops::matmul(attention_weights(q, k), v);
}

/// Attention over K (+) P_k and V (+) P_v. An empty prompt leaves the inputs untouched.
template <typename Scalar>
Var<Scalar> prompted_attention(const Var<Scalar>& q, const Var<Scalar>& k, const Var<Scalar>& v,
                               const Var<Scalar>& prompt_k, const Var<Scalar>& prompt_v) {
  if (prompt_k.rows() != prompt_v.rows()) {
    throw ConfigError("prompted_attention: key and value prompts differ in length");
  }
  if (prompt_k.rows() == 0) return attention(q, k, v);
  return attention(q, ops::concat_rows<Scalar>({k, prompt_k}), ops::concat_rows<Scalar>({v, prompt_v}));
}

template <typename Scalar>
Matrix<Scalar> attention(const Matrix<Scalar>& q, const Matrix<Scalar>& k, const Matrix<Scalar>& v) {
  detail::require_finite(q, "attention");
  detail::require_finite(k, "attention");
  detail::require_finite(v, "attention");
  Tape<Scalar> tape(false);
  return attention(tape.constant(q), tape.constant(k), tape.constant(v)).value();
}

template <typename Scalar>
Matrix<Scalar> attention_weights(const Matrix<Scalar>& q, const Matrix<Scalar>& k) {
  detail::require_finite(q, "attention");
  detail::require_finite(k, "attention");
  Tape<Scalar> tape(false);
  return attention_weights(tape.constant(q), tape.constant(k)).value();
}

template <typename Scalar>
Matrix<Scalar> prompted_attention(const Matrix<Scalar>& q, const Matrix<Scalar>& k,
                                  const Matrix<Scalar>& v, const Matrix<Scalar>& prompt_k,
                                  const Matrix<Scalar>& prompt_v) {
  detail::require_finite(q, "prompted_attention");
  detail::require_finite(k, "prompted_attention");
  detail::require_finite(v, "prompted_attention");
  detail::require_finite(prompt_k, "prompted_attention");
  detail::require_finite(prompt_v, "prompted_attention");
  Tape<Scalar> tape(false);
  return prompted_attention(tape.constant(q), tape.constant(k), tape.constant(v),
                            tape.constant(prompt_k), tape.constant(prompt_v))
      .value();
}

}  // namespace incprompt
