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

#pragma once

#include <cmath>
#include <vector>

#include "incprompt/core/tape.hpp"

namespace incprompt {

template <typename Scalar>
struct AdamConfig {
  Scalar learning_rate = Scalar(1e-3);
  Scalar beta1 = Scalar(0.9);
  Scalar beta2 = Scalar(0.999);
  Scalar epsilon = Scalar(1e-8);
};

/// Adam over an explicit parameter list. Gradients are accumulated with
/// add_gradient() and consumed by step().
template <typename Scalar>
class Adam {
 public:
  Adam(std::vector<Parameter<Scalar>*> params, AdamConfig<Scalar> cfg = {})
      : params_(std::move(params)), cfg_(cfg) {
    for (auto* p : params_) {
      m_.push_back(Matrix<Scalar>::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(Matrix<Scalar>::Zero(p->value.rows(), p->value.cols()));
      g_.push_back(Matrix<Scalar>::Zero(p->value.rows(), p->value.cols()));
    }
  }

  const std::vector<Parameter<Scalar>*>& parameters() const { return params_; }

  /// Pulls this tape's gradients for every managed parameter, scaled by `weight`.
  void add_gradient(const Tape<Scalar>& tape, Scalar weight = Scalar(1)) {
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Matrix<Scalar> g = tape.gradient(*params_[i]);
      if (g.size() != 0) g_[i] += g * weight;
    }
  }

  void step() {
    ++t_;
    const Scalar c1 = Scalar(1) - std::pow(cfg_.beta1, static_cast<Scalar>(t_));
    const Scalar c2 = Scalar(1) - std::pow(cfg_.beta2, static_cast<Scalar>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      if (!params_[i]->trainable) continue;
      m_[i] = cfg_.beta1 * m_[i] + (Scalar(1) - cfg_.beta1) * g_[i];
      v_[i] = cfg_.beta2 * v_[i] + (Scalar(1) - cfg_.beta2) * g_[i].cwiseAbs2();
      params_[i]->value.array() -=
          cfg_.learning_rate * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + cfg_.epsilon);
      g_[i].setZero();
    }
  }

 private:
  std::vector<Parameter<Scalar>*> params_;
  AdamConfig<Scalar> cfg_;
  std::vector<Matrix<Scalar>> m_, v_, g_;
  long t_ = 0;
};

}  // namespace incprompt
