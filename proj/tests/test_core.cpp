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

#include <gtest/gtest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "incprompt/core/adam.hpp"
#include "incprompt/core/ops.hpp"
#include "incprompt/core/random.hpp"
#include "incprompt/core/tape.hpp"

namespace {

using incprompt::Parameter;
using incprompt::Tape;
using incprompt::Var;
using Mat = incprompt::Matrix<double>;
namespace ops = incprompt::ops;

Mat randn(int r, int c, std::uint64_t seed) {
  incprompt::Rng rng(seed);
  return incprompt::random_normal<double>(r, c, 1.0, rng);
}

}  // namespace

TEST(Tape, ParameterIsMemoized) {
  Parameter<double> p{"p", randn(2, 2, 1), true};
  Tape<double> tape;
  const Var<double> a = tape.parameter(p), b = tape.parameter(p);
  EXPECT_EQ(a.index(), b.index());
  tape.backward(ops::sum(ops::add(a, b)));
  EXPECT_TRUE(tape.gradient(p).isApprox(Mat::Constant(2, 2, 2.0)));
}

TEST(Tape, FrozenParameterHasNoGradient) {
  Parameter<double> frozen{"w", randn(2, 2, 2), false};
  Parameter<double> live{"v", randn(2, 2, 3), true};
  Tape<double> tape;
  Var<double> loss = ops::sum_squares(ops::matmul(tape.parameter(frozen), tape.parameter(live)));
  tape.backward(loss);
  EXPECT_EQ(tape.gradient(frozen).size(), 0);
  EXPECT_EQ(tape.gradient(live).rows(), 2);
}

TEST(Tape, NoGradModeRecordsNothingDifferentiable) {
  Parameter<double> p{"p", randn(2, 3, 4), true};
  Tape<double> tape(false);
  Var<double> y = ops::sum(tape.parameter(p));
  EXPECT_FALSE(y.requires_grad());
  EXPECT_NEAR(y.scalar(), p.value.sum(), 1e-12);
}

TEST(Ops, ForwardValues) {
  Tape<double> t(false);
  Mat a(2, 2);
  a << 1, -2, 3, 0.5;
  EXPECT_DOUBLE_EQ(ops::abs_sum(t.constant(a)).scalar(), 6.5);
  EXPECT_DOUBLE_EQ(ops::sum_squares(t.constant(a)).scalar(), 1 + 4 + 9 + 0.25);
  EXPECT_TRUE(ops::mean_rows(t.constant(a)).value().isApprox((Mat(1, 2) << 2, -0.75).finished()));
  EXPECT_TRUE(ops::relu(t.constant(a)).value().isApprox((Mat(2, 2) << 1, 0, 3, 0.5).finished()));
  Mat r = ops::reshape(t.constant(a), 1, 4).value();
  EXPECT_TRUE(r.isApprox((Mat(1, 4) << 1, -2, 3, 0.5).finished()));
  Mat s = ops::softmax_rows(t.constant(a)).value();
  for (int i = 0; i < 2; ++i) EXPECT_NEAR(s.row(i).sum(), 1.0, 1e-12);
  EXPECT_NEAR(ops::gelu(t.constant(1.0)).scalar(), 0.5 * (1 + std::erf(1 / std::sqrt(2.0))), 1e-15);
}

TEST(Ops, CrossEntropyValues) {
  Tape<double> t(false);
  EXPECT_NEAR(ops::cross_entropy(t.constant(Mat::Zero(1, 2)), 0).scalar(), std::log(2.0), 1e-12);
  EXPECT_NEAR(ops::cross_entropy(t.constant((Mat(1, 2) << 2, 1).finished()), 1).scalar(), std::log1p(std::exp(1.0)),
              1e-12);
  EXPECT_NEAR(ops::cross_entropy(t.constant((Mat(1, 2) << 1000, -1000).finished()), 0).scalar(), 0.0, 1e-12);
}

TEST(Ops, LayerNormNormalizesRows) {
  Tape<double> t(false);
  Mat y = ops::layer_norm(t.constant(randn(3, 6, 5)), t.constant(Mat::Ones(1, 6)), t.constant(Mat::Zero(1, 6))).value();
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(y.row(i).mean(), 0.0, 1e-12);
    EXPECT_NEAR((y.row(i).array() - y.row(i).mean()).square().mean(), 1.0, 1e-4);
  }
}

TEST(Ops, ShapeErrors) {
  Tape<double> t(false);
  EXPECT_THROW(ops::matmul(t.constant(Mat::Zero(2, 3)), t.constant(Mat::Zero(2, 3))), incprompt::ConfigError);
  EXPECT_THROW(ops::add(t.constant(Mat::Zero(2, 3)), t.constant(Mat::Zero(3, 2))), incprompt::ConfigError);
  EXPECT_THROW(ops::slice_rows(t.constant(Mat::Zero(2, 3)), 1, 2), incprompt::ConfigError);
  EXPECT_THROW(ops::reshape(t.constant(Mat::Zero(2, 3)), 4, 2), incprompt::ConfigError);
  EXPECT_THROW(ops::cross_entropy(t.constant(Mat::Zero(1, 3)), 3), incprompt::ConfigError);
}

// Every differentiable op against central differences.
TEST(Ops, GradientsMatchFiniteDifferences) {
  using Build = std::function<Var<double>(Tape<double>&, const Var<double>&)>;
  struct Case {
    const char* name;
    int rows, cols;
    Build f;
  };
  const Mat other = randn(4, 3, 11), row = randn(1, 3, 12), gain = randn(1, 3, 13), bias = randn(1, 3, 14);
  const std::vector<Case> cases = {
      {"matmul", 2, 4, [&](Tape<double>& t, const Var<double>& x) { return ops::matmul(x, t.constant(other)); }},
      {"matmul_nt", 2, 3, [&](Tape<double>& t, const Var<double>& x) { return ops::matmul_nt(x, t.constant(other)); }},
      {"add_row", 2, 3, [&](Tape<double>& t, const Var<double>& x) { return ops::add_row(x, t.constant(row)); }},
      {"softmax", 2, 3, [](Tape<double>&, const Var<double>& x) { return ops::softmax_rows(x); }},
      {"concat", 2, 3, [&](Tape<double>& t, const Var<double>& x) { return ops::concat_rows<double>({x, t.constant(row), x}); }},
      {"concat_cols", 2, 3, [](Tape<double>&, const Var<double>& x) { return ops::concat_cols<double>({x, x}); }},
      {"slice", 3, 3, [](Tape<double>&, const Var<double>& x) { return ops::slice_cols(ops::slice_rows(x, 1, 2), 1, 2); }},
      {"reshape", 2, 3, [](Tape<double>&, const Var<double>& x) { return ops::reshape(x, 3, 2); }},
      {"mean_rows", 3, 3, [](Tape<double>&, const Var<double>& x) { return ops::mean_rows(x); }},
      {"sum_squares", 2, 3, [](Tape<double>&, const Var<double>& x) { return ops::sum_squares(x); }},
      {"abs_sum", 2, 3, [](Tape<double>&, const Var<double>& x) { return ops::abs_sum(x); }},
      {"gelu", 2, 3, [](Tape<double>&, const Var<double>& x) { return ops::gelu(x); }},
      {"layer_norm", 2, 3, [&](Tape<double>& t, const Var<double>& x) {
         return ops::layer_norm(x, t.constant(gain), t.constant(bias));
       }},
      {"cross_entropy", 1, 3, [](Tape<double>&, const Var<double>& x) { return ops::cross_entropy(x, 1); }},
  };
  std::uint64_t seed = 100;
  for (const auto& c : cases) {
    Parameter<double> x{"x", randn(c.rows, c.cols, ++seed), true};
    const std::uint64_t probe_seed = ++seed;
    const double err = gradcheck::parameter_error(x, [&](Tape<double>& t) {
      Var<double> y = c.f(t, t.parameter(x));
      return ops::sum(ops::matmul(ops::reshape(y, 1, y.rows() * y.cols()),
                                  t.constant(randn(static_cast<int>(y.rows() * y.cols()), 1, probe_seed))));
    });
    EXPECT_LT(err, 1e-6) << c.name;
  }
}

TEST(Adam, SkipsFrozenAndMovesAgainstGradient) {
  Parameter<double> live{"a", Mat::Constant(1, 2, 1.0), true};
  Parameter<double> frozen{"b", Mat::Constant(1, 2, 1.0), false};
  incprompt::Adam<double> adam({&live, &frozen}, {0.1});
  Tape<double> tape;
  tape.backward(ops::sum(ops::add(tape.parameter(live), tape.parameter(frozen))));
  adam.add_gradient(tape);
  adam.step();
  EXPECT_NEAR(live.value(0, 0), 0.9, 1e-9);  // first Adam step has magnitude lr
  EXPECT_EQ(frozen.value, Mat::Constant(1, 2, 1.0));
}

TEST(Random, DerivedStreamsAreDeterministicAndDistinct) {
  auto a = incprompt::derive_rng(7, 1), b = incprompt::derive_rng(7, 1), c = incprompt::derive_rng(7, 2);
  EXPECT_EQ(a(), b());
  EXPECT_NE(incprompt::derive_rng(7, 1)(), c());
}
