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

// Differentiable matrix operations recorded on a Tape.

#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "incprompt/core/errors.hpp"
#include "incprompt/core/tape.hpp"

namespace incprompt::ops {

namespace detail {

template <typename Scalar>
void check_same_tape(const Var<Scalar>& a, const Var<Scalar>& b) {
  if (&a.tape() != &b.tape()) throw ConfigError("ops: operands recorded on different tapes");
}

template <typename Scalar>
void check_shape(const Var<Scalar>& a, const Var<Scalar>& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ConfigError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                      std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                      std::to_string(b.cols()));
  }
}

}  // namespace detail

template <typename Scalar>
Var<Scalar> matmul(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::check_same_tape(a, b);
  if (a.cols() != b.rows()) throw ConfigError("matmul: inner dimensions differ");
  auto& t = a.tape();
  const std::size_t ia = a.index(), ib = b.index();
  Matrix<Scalar> out = a.value() * b.value();
  return t.record(std::move(out), {a, b}, [ia, ib](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    if (tp.requires_grad(ia)) tp.accumulate(ia, g * tp.value(ib).transpose());
    if (tp.requires_grad(ib)) tp.accumulate(ib, tp.value(ia).transpose() * g);
  });
}

/// a * b^T
template <typename Scalar>
Var<Scalar> matmul_nt(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::check_same_tape(a, b);
  if (a.cols() != b.cols()) throw ConfigError("matmul_nt: inner dimensions differ");
  auto& t = a.tape();
  const std::size_t ia = a.index(), ib = b.index();
  Matrix<Scalar> out = a.value() * b.value().transpose();
  return t.record(std::move(out), {a, b}, [ia, ib](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    if (tp.requires_grad(ia)) tp.accumulate(ia, g * tp.value(ib));
    if (tp.requires_grad(ib)) tp.accumulate(ib, g.transpose() * tp.value(ia));
  });
}

template <typename Scalar>
Var<Scalar> add(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::check_same_tape(a, b);
  detail::check_shape(a, b, "add");
  const std::size_t ia = a.index(), ib = b.index();
  Matrix<Scalar> out = a.value() + b.value();
  return a.tape().record(std::move(out), {a, b}, [ia, ib](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    tp.accumulate(ia, g);
    tp.accumulate(ib, g);
  });
}

template <typename Scalar>
Var<Scalar> sub(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::check_same_tape(a, b);
  detail::check_shape(a, b, "sub");
  const std::size_t ia = a.index(), ib = b.index();
  Matrix<Scalar> out = a.value() - b.value();
  return a.tape().record(std::move(out), {a, b}, [ia, ib](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    tp.accumulate(ia, g);
    tp.accumulate(ib, -g);
  });
}

/// Adds a 1xC row to every row of a.
template <typename Scalar>
Var<Scalar> add_row(const Var<Scalar>& a, const Var<Scalar>& row) {
  detail::check_same_tape(a, row);
  if (row.rows() != 1 || row.cols() != a.cols()) throw ConfigError("add_row: bias shape mismatch");
  const std::size_t ia = a.index(), ir = row.index();
  Matrix<Scalar> out = a.value().rowwise() + row.value().row(0);
  return a.tape().record(std::move(out), {a, row}, [ia, ir](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    tp.accumulate(ia, g);
    if (tp.requires_grad(ir)) tp.accumulate(ir, g.colwise().sum());
  });
}

template <typename Scalar>
Var<Scalar> scale(const Var<Scalar>& a, Scalar s) {
  const std::size_t ia = a.index();
  Matrix<Scalar> out = a.value() * s;
  return a.tape().record(std::move(out), {a}, [ia, s](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    tp.accumulate(ia, g * s);
  });
}

template <typename Scalar>
Var<Scalar> add_scalar(const Var<Scalar>& a, Scalar s) {
  const std::size_t ia = a.index();
  Matrix<Scalar> out = a.value().array() + s;
  return a.tape().record(std::move(out), {a}, [ia](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    tp.accumulate(ia, g);
  });
}

template <typename Scalar>
Var<Scalar> softmax_rows(const Var<Scalar>& a) {
  const std::size_t ia = a.index();
  Matrix<Scalar> out(a.rows(), a.cols());
  const auto& x = a.value();
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const Scalar m = x.row(r).maxCoeff();
    out.row(r) = (x.row(r).array() - m).exp();
    out.row(r) /= out.row(r).sum();
  }
  const std::size_t io = a.tape().size();
  return a.tape().record(std::move(out), {a}, [ia, io](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    const auto& y = tp.value(io);
    Matrix<Scalar> dot = (g.array() * y.array()).rowwise().sum();
    Matrix<Scalar> dx = y.array() * (g.array().colwise() - dot.col(0).array());
    tp.accumulate(ia, dx);
  });
}

/// Concatenates along the row (sequence) axis; zero-row parts are skipped.
template <typename Scalar>
Var<Scalar> concat_rows(const std::vector<Var<Scalar>>& parts) {
  if (parts.empty()) throw ConfigError("concat_rows: no inputs");
  const Eigen::Index cols = parts.front().cols();
  Eigen::Index rows = 0;
  for (const auto& p : parts) {
    detail::check_same_tape(parts.front(), p);
    if (p.cols() != cols) throw ConfigError("concat_rows: column counts differ");
    rows += p.rows();
  }
  Matrix<Scalar> out(rows, cols);
  std::vector<std::pair<std::size_t, Eigen::Index>> spans;
  Eigen::Index offset = 0;
  for (const auto& p : parts) {
    if (p.rows() > 0) out.middleRows(offset, p.rows()) = p.value();
    spans.emplace_back(p.index(), offset);
    offset += p.rows();
  }
  return parts.front().tape().record(
      std::move(out), parts, [spans](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
        for (const auto& [idx, off] : spans) {
          const Eigen::Index n = tp.value(idx).rows();
          if (n > 0 && tp.requires_grad(idx)) tp.accumulate(idx, g.middleRows(off, n));
        }
      });
}

template <typename Scalar>
Var<Scalar> concat_cols(const std::vector<Var<Scalar>>& parts) {
  if (parts.empty()) throw ConfigError("concat_cols: no inputs");
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    detail::check_same_tape(parts.front(), p);
    if (p.rows() != rows) throw ConfigError("concat_cols: row counts differ");
    cols += p.cols();
  }
  Matrix<Scalar> out(rows, cols);
  std::vector<std::pair<std::size_t, Eigen::Index>> spans;
  Eigen::Index offset = 0;
  for (const auto& p : parts) {
    if (p.cols() > 0) out.middleCols(offset, p.cols()) = p.value();
    spans.emplace_back(p.index(), offset);
    offset += p.cols();
  }
  return parts.front().tape().record(
      std::move(out), parts, [spans](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
        for (const auto& [idx, off] : spans) {
          const Eigen::Index n = tp.value(idx).cols();
          if (n > 0 && tp.requires_grad(idx)) tp.accumulate(idx, g.middleCols(off, n));
        }
      });
}

template <typename Scalar>
Var<Scalar> slice_rows(const Var<Scalar>& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) throw ConfigError("slice_rows: out of range");
  const std::size_t ia = a.index();
  const Eigen::Index total = a.rows(), cols = a.cols();
  Matrix<Scalar> out = a.value().middleRows(start, count);
  return a.tape().record(std::move(out), {a},
                         [ia, start, count, total, cols](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
                           Matrix<Scalar> dx = Matrix<Scalar>::Zero(total, cols);
                           dx.middleRows(start, count) = g;
                           tp.accumulate(ia, dx);
                         });
}

template <typename Scalar>
Var<Scalar> slice_cols(const Var<Scalar>& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) throw ConfigError("slice_cols: out of range");
  const std::size_t ia = a.index();
  const Eigen::Index rows = a.rows(), total = a.cols();
  Matrix<Scalar> out = a.value().middleCols(start, count);
  return a.tape().record(std::move(out), {a},
                         [ia, start, count, rows, total](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
                           Matrix<Scalar> dx = Matrix<Scalar>::Zero(rows, total);
                           dx.middleCols(start, count) = g;
                           tp.accumulate(ia, dx);
                         });
}

/// Row-major reinterpretation; element order is preserved.
template <typename Scalar>
Var<Scalar> reshape(const Var<Scalar>& a, Eigen::Index rows, Eigen::Index cols) {
  if (rows * cols != a.value().size()) throw ConfigError("reshape: element count mismatch");
  const std::size_t ia = a.index();
  const Eigen::Index r0 = a.rows(), c0 = a.cols();
  Matrix<Scalar> out = Eigen::Map<const Matrix<Scalar>>(a.value().data(), rows, cols);
  return a.tape().record(std::move(out), {a}, [ia, r0, c0](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    tp.accumulate(ia, Eigen::Map<const Matrix<Scalar>>(g.data(), r0, c0));
  });
}

template <typename Scalar>
Var<Scalar> mean_rows(const Var<Scalar>& a) {
  if (a.rows() == 0) throw ConfigError("mean_rows: empty input");
  const std::size_t ia = a.index();
  const Eigen::Index n = a.rows();
  Matrix<Scalar> out = a.value().colwise().mean();
  return a.tape().record(std::move(out), {a}, [ia, n](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    Matrix<Scalar> dx = g.replicate(n, 1) / static_cast<Scalar>(n);
    tp.accumulate(ia, dx);
  });
}

template <typename Scalar>
Var<Scalar> sum(const Var<Scalar>& a) {
  const std::size_t ia = a.index();
  const Eigen::Index r = a.rows(), c = a.cols();
  Matrix<Scalar> out(1, 1);
  out(0, 0) = a.value().sum();
  return a.tape().record(std::move(out), {a}, [ia, r, c](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    tp.accumulate(ia, Matrix<Scalar>::Constant(r, c, g(0, 0)));
  });
}

template <typename Scalar>
Var<Scalar> sum_squares(const Var<Scalar>& a) {
  const std::size_t ia = a.index();
  Matrix<Scalar> out(1, 1);
  out(0, 0) = a.value().squaredNorm();
  return a.tape().record(std::move(out), {a}, [ia](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    tp.accumulate(ia, tp.value(ia) * (Scalar(2) * g(0, 0)));
  });
}

/// Sum of absolute values; subgradient 0 at exact zeros.
template <typename Scalar>
Var<Scalar> abs_sum(const Var<Scalar>& a) {
  const std::size_t ia = a.index();
  Matrix<Scalar> out(1, 1);
  out(0, 0) = a.value().cwiseAbs().sum();
  return a.tape().record(std::move(out), {a}, [ia](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    Matrix<Scalar> s = tp.value(ia).unaryExpr([](Scalar v) {
      return v > Scalar(0) ? Scalar(1) : (v < Scalar(0) ? Scalar(-1) : Scalar(0));
    });
    tp.accumulate(ia, s * g(0, 0));
  });
}

/// max(x, 0); derivative 0 at the kink.
template <typename Scalar>
Var<Scalar> relu(const Var<Scalar>& a) {
  const std::size_t ia = a.index();
  Matrix<Scalar> out = a.value().cwiseMax(Scalar(0));
  return a.tape().record(std::move(out), {a}, [ia](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    Matrix<Scalar> mask = (tp.value(ia).array() > Scalar(0)).template cast<Scalar>();
    tp.accumulate(ia, g.cwiseProduct(mask));
  });
}

/// Exact GELU, x * Phi(x).
template <typename Scalar>
Var<Scalar> gelu(const Var<Scalar>& a) {
  const std::size_t ia = a.index();
  const Scalar inv_sqrt2 = Scalar(1) / std::sqrt(Scalar(2));
  Matrix<Scalar> out = a.value().unaryExpr(
      [inv_sqrt2](Scalar x) { return Scalar(0.5) * x * (Scalar(1) + std::erf(x * inv_sqrt2)); });
  return a.tape().record(std::move(out), {a}, [ia, inv_sqrt2](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    const Scalar inv_sqrt2pi = Scalar(1) / std::sqrt(Scalar(2) * std::numbers::pi_v<Scalar>);
    Matrix<Scalar> d = tp.value(ia).unaryExpr([inv_sqrt2, inv_sqrt2pi](Scalar x) {
      return Scalar(0.5) * (Scalar(1) + std::erf(x * inv_sqrt2)) +
             x * inv_sqrt2pi * std::exp(Scalar(-0.5) * x * x);
    });
    tp.accumulate(ia, g.cwiseProduct(d));
  });
}

/// Per-row layer normalization with affine gain and bias (both 1xC).
template <typename Scalar>
Var<Scalar> layer_norm(const Var<Scalar>& x, const Var<Scalar>& gain, const Var<Scalar>& bias,
                       Scalar eps = Scalar(1e-5)) {
  detail::check_same_tape(x, gain);
  detail::check_same_tape(x, bias);
  if (gain.rows() != 1 || gain.cols() != x.cols() || bias.rows() != 1 || bias.cols() != x.cols()) {
    throw ConfigError("layer_norm: affine parameter shape mismatch");
  }
  const Eigen::Index n = x.rows(), c = x.cols();
  Matrix<Scalar> xhat(n, c);
  Matrix<Scalar> inv_std(n, 1);
  for (Eigen::Index r = 0; r < n; ++r) {
    const Scalar mu = x.value().row(r).mean();
    const Scalar var = (x.value().row(r).array() - mu).square().mean();
    inv_std(r, 0) = Scalar(1) / std::sqrt(var + eps);
    xhat.row(r) = (x.value().row(r).array() - mu) * inv_std(r, 0);
  }
  Matrix<Scalar> out = (xhat.array().rowwise() * gain.value().row(0).array()).rowwise() +
                       bias.value().row(0).array();
  const std::size_t ix = x.index(), ig = gain.index(), ib = bias.index();
  return x.tape().record(
      std::move(out), {x, gain, bias},
      [ix, ig, ib, xhat = std::move(xhat), inv_std = std::move(inv_std), c](Tape<Scalar>& tp,
                                                                          const Matrix<Scalar>& g) {
        if (tp.requires_grad(ig)) tp.accumulate(ig, g.cwiseProduct(xhat).colwise().sum());
        if (tp.requires_grad(ib)) tp.accumulate(ib, g.colwise().sum());
        if (tp.requires_grad(ix)) {
          Matrix<Scalar> dxhat = g.array().rowwise() * tp.value(ig).row(0).array();
          Matrix<Scalar> dx(dxhat.rows(), c);
          for (Eigen::Index r = 0; r < dxhat.rows(); ++r) {
            const Scalar m1 = dxhat.row(r).mean();
            const Scalar m2 = dxhat.row(r).cwiseProduct(xhat.row(r)).mean();
            dx.row(r) = (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2) * inv_std(r, 0);
          }
          tp.accumulate(ix, dx);
        }
      });
}

/// Softmax cross-entropy of a single 1xC logit row against `label`.
template <typename Scalar>
Var<Scalar> cross_entropy(const Var<Scalar>& logits, int label) {
  if (logits.rows() != 1) throw ConfigError("cross_entropy: expects one logit row");
  if (label < 0 || label >= logits.cols()) throw ConfigError("cross_entropy: label out of range");
  const auto& z = logits.value();
  const Scalar m = z.maxCoeff();
  const Scalar lse = m + std::log((z.array() - m).exp().sum());
  Matrix<Scalar> out(1, 1);
  out(0, 0) = lse - z(0, label);
  const std::size_t il = logits.index();
  return logits.tape().record(std::move(out), {logits},
                              [il, label, lse](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
                                Matrix<Scalar> p = (tp.value(il).array() - lse).exp();
                                p(0, label) -= Scalar(1);
                                tp.accumulate(il, p * g(0, 0));
                              });
}

}  // namespace incprompt::ops

namespace incprompt {

template <typename Scalar>
Var<Scalar> operator+(const Var<Scalar>& a, const Var<Scalar>& b) {
  return ops::add(a, b);
}

template <typename Scalar>
Var<Scalar> operator-(const Var<Scalar>& a, const Var<Scalar>& b) {
  return ops::sub(a, b);
}

}  // namespace incprompt
