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
#include "incprompt/core/random.hpp"
#include "incprompt/key_learner.hpp"
#include "reference_model.hpp"

namespace {

using incprompt::KeyLearner;
using incprompt::KeyLossConfig;
using incprompt::Similarity;
using incprompt::Tape;
using incprompt::TokenBatch;
using incprompt::Var;
using Mat = incprompt::Matrix<double>;
namespace ops = incprompt::ops;

Mat row(std::initializer_list<double> v) {
  Mat m(1, static_cast<Eigen::Index>(v.size()));
  Eigen::Index j = 0;
  for (double x : v) m(0, j++) = x;
  return m;
}

Mat randn(int r, int c, incprompt::Rng& rng, double s = 1.0) { return incprompt::random_normal<double>(r, c, s, rng); }

// A learner whose key for any single-token input t is t * wv.
KeyLearner<double> value_learner(int task, const Mat& wv) {
  const Eigen::Index d = wv.rows();
  return KeyLearner<double>(task, Mat::Identity(d, d), Mat::Identity(d, d), wv);
}

TokenBatch<double> batch_of(std::vector<Mat> t) {
  TokenBatch<double> b;
  b.tokens = std::move(t);
  return b;
}

double ref_similarity(const ref::Vec& a, const ref::Vec& b, Similarity kind) {
  double dot = 0, na = 0, nb = 0, d2 = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
    d2 += (a[i] - b[i]) * (a[i] - b[i]);
  }
  if (kind == Similarity::euclidean) return -std::sqrt(d2);
  return (na == 0 || nb == 0) ? 0.0 : dot / std::sqrt(na * nb);
}

}  // namespace

TEST(ComputeKey, IdentityProjectionsOnSingleToken) {
  const Mat t = row({0.3, -1.2, 2.0});
  const auto l = value_learner(0, Mat::Identity(3, 3));
  EXPECT_TRUE(incprompt::compute_key(l, batch_of({t})).isApprox(t));
}

TEST(ComputeKey, ZeroValueProjectionGivesZeroKey) {
  incprompt::Rng rng(1);
  const KeyLearner<double> l(0, randn(4, 4, rng), randn(4, 4, rng), Mat::Zero(4, 4));
  EXPECT_TRUE(incprompt::compute_key(l, batch_of({randn(3, 4, rng), randn(5, 4, rng)})).isZero(0));
}

TEST(ComputeKey, MatchesReferenceOracle) {
  incprompt::Rng rng(2);
  const KeyLearner<double> l(0, 5, 5, incprompt::PoolMode::mean, 17);
  ref::Params p;
  const_cast<KeyLearner<double>&>(l).for_each_parameter(
      [&](incprompt::Parameter<double>& q) { p[q.name] = ref::from_eigen(q.value); });
  for (int trial = 0; trial < 5; ++trial) {
    const Mat tokens = randn(3, 5, rng);
    const ref::Vec want = ref::key(ref::from_eigen(tokens), p["key0.wq"], p["key0.wk"], p["key0.wv"]);
    const Mat got = l.key(tokens);
    for (int j = 0; j < 5; ++j) EXPECT_NEAR(got(0, j), want[static_cast<std::size_t>(j)], 1e-12);
  }
}

TEST(MineNegative, PicksMostSimilarOtherLearner) {
  const Mat t = row({1, 0});
  const Mat k09 = row({0.9, std::sqrt(1 - 0.81)}), k01 = row({0.1, std::sqrt(1 - 0.01)});
  auto wv = [](const Mat& k) {
    Mat w = Mat::Zero(2, 2);
    w.row(0) = k;
    return w;
  };
  std::vector<KeyLearner<double>> ls{value_learner(0, Mat::Identity(2, 2)), value_learner(1, wv(k01)),
                                     value_learner(2, wv(k09))};
  for (auto kind : {Similarity::cosine, Similarity::euclidean}) {
    const auto neg = incprompt::mine_negative(0, t, ls, kind);
    ASSERT_TRUE(neg.has_value());
    EXPECT_TRUE(neg->isApprox(k09, 1e-12));
  }
}

TEST(MineNegative, NoOtherLearner) {
  incprompt::Rng rng(3);
  std::vector<KeyLearner<double>> ls{KeyLearner<double>(0, 4, 4, incprompt::PoolMode::mean, 1)};
  EXPECT_FALSE(incprompt::mine_negative(0, randn(3, 4, rng), ls).has_value());
  EXPECT_FALSE(incprompt::mine_negative(0, batch_of({randn(3, 4, rng)}), ls).has_value());
}

TEST(MineNegative, MatchesExhaustiveScan) {
  incprompt::Rng rng(4);
  std::vector<KeyLearner<double>> ls;
  for (int i = 0; i < 5; ++i) ls.emplace_back(i, 6, 6, incprompt::PoolMode::mean, 100 + i);
  for (auto kind : {Similarity::cosine, Similarity::euclidean}) {
    for (int trial = 0; trial < 20; ++trial) {
      const Mat tokens = randn(4, 6, rng);
      const int anchor = trial % 5;
      const ref::Vec f = ref::mean_rows(ref::from_eigen(tokens));
      int best = -1;
      double best_s = -1e300;
      for (int i = 0; i < 5; ++i) {
        if (i == anchor) continue;
        const double s = ref_similarity(ref::from_eigen(ls[static_cast<std::size_t>(i)].key(tokens))[0], f, kind);
        if (s > best_s) best = i, best_s = s;
      }
      const auto neg = incprompt::mine_negative(anchor, tokens, ls, kind);
      ASSERT_TRUE(neg.has_value());
      EXPECT_TRUE(neg->isApprox(ls[static_cast<std::size_t>(best)].key(tokens)));
    }
  }
}

TEST(TripletLoss, HandValues) {
  const Mat t = row({0.0, 0.0});
  EXPECT_DOUBLE_EQ(incprompt::triplet_loss<double>(t, t, row({1, 1}), 0.5), 0.0);
  Mat batch(2, 2);
  batch << 1, 2, -1, 0;
  Mat other(2, 2);
  other << 0, 0, 3, 3;
  EXPECT_DOUBLE_EQ(incprompt::triplet_loss<double>(batch, other, other, 0.5), 1.0);  // 0.5 per sample
  EXPECT_DOUBLE_EQ(incprompt::triplet_loss<double>(t, row({1, 0}), row({0, 2}), 1.0), 0.0);
  EXPECT_DOUBLE_EQ(incprompt::triplet_loss<double>(t, row({1, 0}), row({0, 2}), 4.0), 1.0);
}

TEST(TripletLoss, NonnegativeAndInactiveBeyondMargin) {
  incprompt::Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const Mat t = randn(3, 4, rng), a = randn(3, 4, rng), n = randn(3, 4, rng);
    const double margin = std::abs(randn(1, 1, rng)(0, 0));
    EXPECT_GE(incprompt::triplet_loss(t, a, n, margin), 0.0);
    EXPECT_GE(incprompt::l1_reg(a), 0.0);
    // Push every negative far away so each hinge is inactive.
    Mat far = n;
    for (int i = 0; i < 3; ++i) {
      const double need = (t.row(i) - a.row(i)).squaredNorm() + margin;
      far.row(i) = t.row(i) + Mat::Constant(1, 4, std::sqrt(need / 4.0) + 1.0);
    }
    EXPECT_EQ(incprompt::triplet_loss(t, a, far, margin), 0.0);
  }
}

TEST(TripletLoss, RejectsBadInput) {
  EXPECT_THROW(incprompt::triplet_loss<double>(row({0, 0}), row({0, 0, 0}), row({0, 0}), 0.5), incprompt::ConfigError);
  EXPECT_THROW(incprompt::triplet_loss<double>(row({0, 0}), row({0, 0}), row({0, 0}), -1.0), incprompt::ConfigError);
}

TEST(L1Reg, HandValues) {
  EXPECT_DOUBLE_EQ(incprompt::l1_reg<double>(row({1, -2, 0.5})), 3.5);
  EXPECT_DOUBLE_EQ(incprompt::l1_reg<double>(Mat::Zero(1, 3)), 0.0);
  Mat two(2, 2);
  two << 1, 1, -1, -1;
  EXPECT_DOUBLE_EQ(incprompt::l1_reg<double>(two), 4.0);
}

TEST(KeyLoss, HandValues) {
  const Mat ka = row({1, -2, 0.5});
  const Mat kn = ka + row({1, 0, 0});  // |T - K_n|^2 = 1; with T = K_a and margin 2 the hinge is 1
  EXPECT_NEAR(incprompt::key_loss<double>(ka, ka, kn, KeyLossConfig{2.0, 0.1}), 1.35, 1e-12);
  EXPECT_NEAR(incprompt::key_loss<double>(ka, ka, std::nullopt, KeyLossConfig{0.5, 0.1}), 0.35, 1e-12);
}

TEST(KeyLoss, PipelineMatchesReferenceOracle) {
  incprompt::Rng rng(6);
  const KeyLearner<double> l(0, 4, 4, incprompt::PoolMode::mean, 9);
  ref::Params p;
  const_cast<KeyLearner<double>&>(l).for_each_parameter(
      [&](incprompt::Parameter<double>& q) { p[q.name] = ref::from_eigen(q.value); });
  const KeyLossConfig cfg{0.7, 0.05};
  for (int trial = 0; trial < 10; ++trial) {
    const Mat tokens = randn(3, 4, rng), negative = randn(1, 4, rng, 0.5);
    const Mat t = tokens.colwise().mean();
    const double got = incprompt::key_loss<double>(t, l.key(tokens), negative, cfg);
    const ref::Vec ka = ref::key(ref::from_eigen(tokens), p["key0.wq"], p["key0.wk"], p["key0.wv"]);
    const ref::Vec tv = ref::mean_rows(ref::from_eigen(tokens));
    double want = 0;
    for (double v : ka) want += cfg.lambda_reg * std::abs(v);
    want += std::max(0.0, ref::sq_dist(tv, ka) - ref::sq_dist(tv, ref::from_eigen(negative)[0]) + cfg.margin);
    EXPECT_NEAR(got, want, 1e-12);
  }
}

// d key_loss / d {W_q, W_k, W_v}, avoiding the hinge kink and zero key entries.
TEST(KeyLoss, GradientsMatchFiniteDifferences) {
  incprompt::Rng rng(7);
  int checked = 0;
  for (int trial = 0; checked < 20 && trial < 200; ++trial) {
    const int d = 2 + trial % 7, n = 1 + trial % 5;
    KeyLearner<double> l(0, d, d, incprompt::PoolMode::mean, 500 + static_cast<std::uint64_t>(trial));
    const Mat tokens = randn(n, d, rng), negative = randn(1, d, rng);
    const KeyLossConfig cfg{1.0, 0.1};
    const Mat ka = l.key(tokens), t = tokens.colwise().mean();
    const double arg = (t - ka).squaredNorm() - (t - negative).squaredNorm() + cfg.margin;
    if (std::abs(arg) < 1e-3 || ka.cwiseAbs().minCoeff() < 1e-3) continue;
    ++checked;
    auto loss = [&](Tape<double>& tape) {
      Var<double> tk = tape.constant(tokens);
      Var<double> neg = tape.constant(negative);
      return incprompt::key_loss_term(ops::mean_rows(tk), l.key(tape, tk), &neg, cfg);
    };
    l.for_each_parameter([&](incprompt::Parameter<double>& p) {
      EXPECT_LE(gradcheck::parameter_error(p, loss), 1e-4) << p.name << " trial " << trial;
    });
  }
  EXPECT_EQ(checked, 20);
}

TEST(KeyLoss, TripletAndL1GradientsMatchFiniteDifferences) {
  incprompt::Rng rng(8);
  int checked = 0;
  for (int trial = 0; checked < 20 && trial < 200; ++trial) {
    const int d = 2 + trial % 7;
    incprompt::Parameter<double> t{"t", randn(1, d, rng), true}, a{"a", randn(1, d, rng), true},
        n{"n", randn(1, d, rng), true};
    const double arg = (t.value - a.value).squaredNorm() - (t.value - n.value).squaredNorm() + 1.0;
    if (std::abs(arg) < 1e-3 || a.value.cwiseAbs().minCoeff() < 1e-3) continue;
    ++checked;
    auto triplet = [&](Tape<double>& tape) {
      return incprompt::triplet_term(tape.parameter(t), tape.parameter(a), tape.parameter(n), 1.0);
    };
    auto l1 = [&](Tape<double>& tape) { return ops::abs_sum(tape.parameter(a)); };
    for (auto* p : {&t, &a, &n}) EXPECT_LE(gradcheck::parameter_error(*p, triplet), 1e-4);
    EXPECT_LE(gradcheck::parameter_error(a, l1), 1e-4);
  }
  EXPECT_EQ(checked, 20);
}

TEST(MatchTask, SingleLearner) {
  incprompt::Rng rng(9);
  std::vector<KeyLearner<double>> ls{KeyLearner<double>(3, 4, 4, incprompt::PoolMode::mean, 1)};
  EXPECT_EQ(incprompt::match_task(randn(5, 4, rng), ls), 3);
}

TEST(MatchTask, OrthogonalKeys) {
  std::vector<KeyLearner<double>> ls;
  for (int i = 0; i < 3; ++i) {
    Mat wv = Mat::Zero(3, 3);
    wv.row(1) = Mat::Identity(3, 3).row(i);  // key of e_2 is e_i
    ls.push_back(value_learner(i, wv));
  }
  for (auto kind : {Similarity::cosine, Similarity::euclidean}) {
    EXPECT_EQ(incprompt::match_task(row({0, 1, 0}), ls, kind), 1);
  }
}

TEST(MatchTask, MatchesExhaustiveScan) {
  incprompt::Rng rng(10);
  std::vector<KeyLearner<double>> ls;
  for (int i = 0; i < 5; ++i) ls.emplace_back(i, 6, 6, incprompt::PoolMode::mean, 200 + i);
  for (auto kind : {Similarity::cosine, Similarity::euclidean}) {
    TokenBatch<double> batch;
    for (int i = 0; i < 20; ++i) batch.tokens.push_back(randn(4, 6, rng));
    const auto got = incprompt::match_task(batch, ls, kind);
    for (int i = 0; i < 20; ++i) {
      const ref::Vec f = ref::mean_rows(ref::from_eigen(batch.tokens[static_cast<std::size_t>(i)]));
      int best = 0;
      double best_s = -1e300;
      for (int j = 0; j < 5; ++j) {
        const double s =
            ref_similarity(ref::from_eigen(ls[static_cast<std::size_t>(j)].key(batch.tokens[static_cast<std::size_t>(i)]))[0], f, kind);
        if (s > best_s) best = j, best_s = s;
      }
      EXPECT_EQ(got[static_cast<std::size_t>(i)], best);
    }
  }
}

TEST(MatchTask, CosineIsScaleInvariant) {
  incprompt::Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<KeyLearner<double>> ls, scaled;
    for (int i = 0; i < 4; ++i) {
      const Mat wq = randn(5, 5, rng), wk = randn(5, 5, rng), wv = randn(5, 5, rng);
      ls.emplace_back(i, wq, wk, wv);
      scaled.emplace_back(i, wq, wk, wv * (i == trial % 4 ? 7.5 : 1.0));
    }
    const Mat tokens = randn(3, 5, rng);
    EXPECT_EQ(incprompt::match_task(tokens, ls, Similarity::cosine),
              incprompt::match_task(tokens, scaled, Similarity::cosine));
    // Rescaling a single-token input rescales both its feature and every key.
    const Mat single = randn(1, 5, rng);
    EXPECT_EQ(incprompt::match_task(single, ls, Similarity::cosine),
              incprompt::match_task(Mat(single * 3.0), ls, Similarity::cosine));
  }
}

TEST(MatchTask, TiesGoToLowestTaskId) {
  incprompt::Rng rng(12);
  const Mat wq = randn(4, 4, rng), wk = randn(4, 4, rng), wv = randn(4, 4, rng);
  std::vector<KeyLearner<double>> ls{KeyLearner<double>(3, wq, wk, wv), KeyLearner<double>(1, wq, wk, wv),
                                     KeyLearner<double>(2, wq, wk, wv)};
  for (int run = 0; run < 5; ++run) {
    for (auto kind : {Similarity::cosine, Similarity::euclidean}) EXPECT_EQ(incprompt::match_task(randn(3, 4, rng), ls, kind), 1);
  }
}

TEST(MatchTask, Errors) {
  incprompt::Rng rng(13);
  std::vector<KeyLearner<double>> none;
  EXPECT_THROW(incprompt::match_task(randn(2, 4, rng), none), incprompt::ConfigError);
  std::vector<KeyLearner<double>> narrow{KeyLearner<double>(0, 4, 2, incprompt::PoolMode::mean, 1)};
  EXPECT_THROW(incprompt::match_task(randn(2, 4, rng), narrow), incprompt::ConfigError);
}
