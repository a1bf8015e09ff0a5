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

// Acceptance run: one PASS/FAIL line per criterion; exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <thread>

#include "gradcheck.hpp"
#include "incprompt/config.hpp"
#include "incprompt/experiment.hpp"
#include "incprompt/incprompt.hpp"
#include "reference_model.hpp"

namespace {

namespace fs = std::filesystem;
using namespace incprompt;
using Mat = Matrix<double>;

// Pinned tolerances.
constexpr double kGradTol = 1e-4;
constexpr int kGradInstances = 20;
constexpr double kGradSeconds = 60;
constexpr double kEmptyPromptTol = 1e-6;
constexpr double kLossOracleTol = 1e-10;
constexpr double kHandTol = 1e-12;
constexpr double kProbeMin = 0.99;
constexpr double kAccGap = 0.10;
constexpr double kForgetRatio = 0.5;
constexpr double kMatchMin = 0.70;
constexpr double kForgettingSeparation = 30.0;
constexpr double kAblationSeparation = 6.0;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

Mat randn(int r, int c, Rng& rng) {
  std::normal_distribution<double> n(0, 1);
  Mat m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::path(INCPROMPT_TEST_TMP) / "acceptance" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ModelConfig small_model(int image, int patch, int dim, int depth, int length) {
  ModelConfig m;
  m.backbone.image_size = image;
  m.backbone.patch_size = patch;
  m.backbone.embed_dim = dim;
  m.backbone.num_layers = 2;
  m.backbone.num_heads = 2;
  m.backbone.mlp_ratio = 2.0;
  m.schedule = PromptSchedule::first_layers(depth, length);
  m.key_loss = {0.5, 0.1};
  return m;
}

ref::Arch arch_of(const ModelConfig& m) {
  const auto& b = m.backbone;
  return {b.image_size, b.patch_size, b.channels, b.embed_dim, b.num_layers, b.num_heads, m.schedule.layers,
          m.schedule.prompt_length, m.activation == Activation::gelu, m.head_pool == PoolMode::cls};
}

// ---------------------------------------------------------------------------

Outcome gradient_suite() {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  Rng rng(101);
  double worst = 0;
  auto track = [&](double e, const std::string& what) {
    worst = std::max(worst, e);
    if (!(e <= kGradTol)) o.require(false, what + " rel err " + num(e));
  };

  int triplet = 0, l1 = 0;
  for (int trial = 0; (triplet < kGradInstances || l1 < kGradInstances) && trial < 1000; ++trial) {
    const int d = 2 + trial % 7;
    Parameter<double> t{"t", randn(1, d, rng), true}, a{"a", randn(1, d, rng), true}, n{"n", randn(1, d, rng), true};
    const double arg = (t.value - a.value).squaredNorm() - (t.value - n.value).squaredNorm() + 1.0;
    if (std::abs(arg) < 1e-3 || a.value.cwiseAbs().minCoeff() < 1e-3) continue;
    auto f_triplet = [&](Tape<double>& tape) {
      return triplet_term(tape.parameter(t), tape.parameter(a), tape.parameter(n), 1.0);
    };
    auto f_l1 = [&](Tape<double>& tape) { return ops::abs_sum(tape.parameter(a)); };
    if (triplet < kGradInstances) {
      for (auto* p : {&t, &a, &n}) track(gradcheck::parameter_error(*p, f_triplet), "triplet");
      ++triplet;
    }
    if (l1 < kGradInstances) {
      track(gradcheck::parameter_error(a, f_l1), "l1");
      ++l1;
    }
  }

  int key = 0;
  for (int trial = 0; key < kGradInstances && trial < 1000; ++trial) {
    const int d = 2 + trial % 7, n = 1 + trial % 5;
    KeyLearner<double> l(0, d, d, PoolMode::mean, 700 + static_cast<std::uint64_t>(trial));
    const Mat tokens = randn(n, d, rng), negative = randn(1, d, rng);
    const KeyLossConfig cfg{1.0, 0.1};
    const Mat ka = l.key(tokens), t = tokens.colwise().mean();
    const double arg = (t - ka).squaredNorm() - (t - negative).squaredNorm() + cfg.margin;
    if (std::abs(arg) < 1e-3 || ka.cwiseAbs().minCoeff() < 1e-3) continue;
    ++key;
    auto f = [&](Tape<double>& tape) {
      Var<double> tk = tape.constant(tokens);
      Var<double> neg = tape.constant(negative);
      return key_loss_term(ops::mean_rows(tk), l.key(tape, tk), &neg, cfg);
    };
    l.for_each_parameter([&](Parameter<double>& p) { track(gradcheck::parameter_error(p, f), "key loss"); });
  }

  for (int trial = 0; trial < kGradInstances; ++trial) {
    const int n = 1 + trial % 5, lp = 1 + trial % 4, d = 2 + trial % 7;
    Parameter<double> q{"q", randn(n, d, rng), true}, k{"k", randn(n, d, rng), true}, v{"v", randn(n, d, rng), true};
    Parameter<double> pk{"pk", randn(lp, d, rng), true}, pv{"pv", randn(lp, d, rng), true};
    const Mat w = randn(1, n * d, rng);
    auto f = [&](Tape<double>& t) {
      Var<double> out = prompted_attention(t.parameter(q), t.parameter(k), t.parameter(v), t.parameter(pk),
                                           t.parameter(pv));
      return ops::sum(ops::matmul_nt(ops::reshape(out, 1, n * d), t.constant(w)));
    };
    for (auto* p : {&q, &k, &v, &pk, &pv}) track(gradcheck::parameter_error(*p, f), "prompted attention");
  }

  const ModelConfig cfg = small_model(4, 2, 8, 2, 2);  // 5 tokens, d = 8
  int composite = 0;
  for (std::uint64_t trial = 0; composite < kGradInstances && trial < 200; ++trial) {
    const auto stream = synthetic_gaussian_tasks<double>(2, 2, 8, 2, 3.0, 300 + trial, 2, 4, 3);
    IncPromptModel<double> model(cfg, stream.total_classes(), 400 + trial);
    const int tasks = 1 + static_cast<int>(trial % 2);
    for (int t = 0; t < tasks; ++t) model.begin_task(t, stream.class_ids(t));
    const int task = tasks - 1;
    const auto cached = cache_sample(model, task, stream.test(task)[0]);
    const Mat anchor = model.learners()[static_cast<std::size_t>(task)].key(cached.tokens);
    if (anchor.cwiseAbs().minCoeff() < 1e-3) continue;
    if (cached.negative) {
      const Mat t = cached.tokens.colwise().mean();
      const double arg = (t - anchor).squaredNorm() - (t - *cached.negative).squaredNorm() + cfg.key_loss.margin;
      if (std::abs(arg) < 1e-3) continue;
    }
    ++composite;
    auto f = [&](Tape<double>& tape) { return incprompt_sample_loss(tape, model, task, cached, true).total; };
    model.learners().back().for_each_parameter([&](Parameter<double>& p) { track(gradcheck::parameter_error(p, f), "composite"); });
    model.prompters().back().for_each_parameter([&](Parameter<double>& p) { track(gradcheck::parameter_error(p, f), "composite"); });
    track(gradcheck::parameter_error(model.head().weight(), f), "composite");
  }

  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  o.require(triplet == kGradInstances && l1 == kGradInstances && key == kGradInstances && composite == kGradInstances,
            "too few usable instances");
  o.require(secs < kGradSeconds, "took " + num(secs) + " s");
  o.detail = "worst rel err " + num(worst) + ", " + num(secs) + " s" + (o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

Outcome equivalence_oracles() {
  Outcome o;
  Rng rng(102);
  double worst_attn = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + trial % 5, d = 2 + trial % 7;
    const Mat q = randn(n, d, rng), k = randn(n, d, rng), v = randn(n, d, rng);
    const Mat diff = prompted_attention(q, k, v, Mat(0, d), Mat(0, d)) - attention(q, k, v);
    worst_attn = std::max(worst_attn, diff.cwiseAbs().maxCoeff());
  }
  o.require(worst_attn <= kEmptyPromptTol, "empty prompt differs by " + num(worst_attn));

  bool identity = true;
  for (int trial = 0; trial < 20; ++trial) {
    const int layers = trial % 4, len = trial % 5, d = 1 + trial % 6;
    Prompt<double> p{layers, len, d, randn(layers * 2 * len, d, rng)};
    const auto [kk, vv] = divide(p);
    const Prompt<double> back = concatenate(kk, vv);
    identity = identity && back.values.rows() == p.values.rows() && back.values.cols() == p.values.cols() &&
               std::memcmp(back.values.data(), p.values.data(), sizeof(double) * static_cast<std::size_t>(p.values.size())) == 0;
  }
  o.require(identity, "divide/concatenate is not the identity");

  const ModelConfig cfg = small_model(8, 4, 8, 2, 2);
  const auto stream = synthetic_gaussian_tasks<double>(3, 2, 8, 4, 5.0, 2, 20, 8, 3);
  IncPromptModel<double> model(cfg, stream.total_classes(), 11);
  for (int t = 0; t < 3; ++t) model.begin_task(t, stream.class_ids(t));
  ref::Params p;
  detail::for_each_model_parameter(model, [&](Parameter<double>& q) { p[q.name] = ref::from_eigen(q.value); });
  const ref::Arch a = arch_of(cfg);
  const int task = 2;
  double worst_loss = 0;
  for (int batch = 0; batch < 10; ++batch) {
    double lib = 0, oracle = 0;
    for (int i = 0; i < 4; ++i) {
      Sample<double> s = stream.test(task)[static_cast<std::size_t>(batch * 4 + i) % stream.test(task).size()];
      for (auto& v : s.image.pixels) v += std::normal_distribution<double>(0, 0.1)(rng);
      Tape<double> tape(false);
      lib += incprompt_sample_loss(tape, model, task, cache_sample(model, task, s), true).total.scalar();

      const ref::Mat tokens = ref::encode(ref::embed(s.image.pixels, a, p), a, p);
      const ref::Vec f = ref::mean_rows(tokens);
      std::optional<ref::Vec> negative;
      double best = -1e300;
      for (int t = 0; t < task; ++t) {
        const std::string kp = "key" + std::to_string(t) + ".";
        const ref::Vec k = ref::key(tokens, ref::get(p, kp + "wq"), ref::get(p, kp + "wk"), ref::get(p, kp + "wv"));
        const double sim = -std::sqrt(ref::sq_dist(k, f));
        if (sim > best) best = sim, negative = k;
      }
      oracle += ref::composite(s.image.pixels, task, static_cast<std::size_t>(model.head().column_of(s.label)),
                               static_cast<std::size_t>(model.task_first_column()[task]), 2, negative,
                               cfg.key_loss.margin, cfg.key_loss.lambda_reg, a, p)
                    .total();
    }
    worst_loss = std::max(worst_loss, std::abs(lib - oracle));
  }
  o.require(worst_loss <= kLossOracleTol, "total loss differs from oracle by " + num(worst_loss));
  o.detail = "empty-prompt " + num(worst_attn) + ", loss oracle " + num(worst_loss) +
             (o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

Outcome hand_values() {
  Outcome o;
  auto row = [](std::initializer_list<double> v) {
    Mat m(1, static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) m(0, i++) = x;
    return m;
  };
  auto near = [&](double got, double want, const std::string& what) {
    o.require(std::abs(got - want) <= kHandTol, what + " = " + num(got) + ", expected " + num(want));
  };
  const Mat zero = row({0, 0});
  near(triplet_loss<double>(zero, zero, row({1, 1}), 0.5), 0.0, "inactive hinge");
  near(triplet_loss<double>(zero, row({1, 0}), row({0, 2}), 4.0), 1.0, "active hinge");
  near(triplet_loss<double>(zero, row({1, 0}), row({0, 2}), 1.0), 0.0, "hinge at margin edge");
  near(l1_reg<double>(row({1, -2, 0.5})), 3.5, "l1");
  const Mat ka = row({1, -2, 0.5});
  near(key_loss<double>(ka, ka, Mat(ka + row({1, 0, 0})), KeyLossConfig{2.0, 0.1}), 1.35, "key loss");
  near(key_loss<double>(ka, ka, std::nullopt, KeyLossConfig{0.5, 0.1}), 0.35, "key loss without negative");
  near(task_loss<double>(Mat::Zero(1, 2), {0}), -std::log(0.5), "cross-entropy at equal logits");
  near(total_loss(1.0, 0.35), 1.35, "total loss");
  const Mat attn = prompted_attention<double>(row({1, 0}), row({1, 0}), row({1, 0}), row({1, 0}), row({0, 1}));
  near(attn(0, 0), 0.5, "equal-logit prompted attention[0]");
  near(attn(0, 1), 0.5, "equal-logit prompted attention[1]");
  Eigen::MatrixXd acc(2, 2);
  acc << 1.0, std::nan(""), 0.6, 1.0;
  const auto m = compute_metrics(acc);
  near(m.avg_acc, 0.8, "avg_acc");
  near(m.forgetting, 0.4, "forgetting");
  if (o.pass) o.detail = "all hand values exact";
  return o;
}

std::vector<Mat> task_snapshot(const IncPromptModel<double>& m, int t) {
  std::vector<Mat> out;
  m.learners()[static_cast<std::size_t>(t)].for_each_parameter([&](const Parameter<double>& p) { out.push_back(p.value); });
  m.prompters()[static_cast<std::size_t>(t)].for_each_parameter([&](const Parameter<double>& p) { out.push_back(p.value); });
  return out;
}

bool bitwise(const std::vector<Mat>& a, const std::vector<Mat>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].size() != b[i].size() ||
        std::memcmp(a[i].data(), b[i].data(), sizeof(double) * static_cast<std::size_t>(a[i].size())) != 0) {
      return false;
    }
  }
  return true;
}

// Prediction takes an image only; there is no task-id channel into evaluation.
static_assert(std::is_invocable_v<decltype(&IncPromptModel<double>::predict), const IncPromptModel<double>&,
                                  const Image<double>&>);

Outcome protocol_invariants() {
  Outcome o;
  const ModelConfig cfg = small_model(8, 4, 16, 2, 2);
  auto stream = synthetic_gaussian_tasks<double>(5, 2, 8, 20, 10.0, 5, 10, 8, 3);
  IncPromptModel<double> model(cfg, stream.total_classes(), 5);
  TrainingConfig train;
  train.epochs = 2;
  train.batch_size = 8;
  std::vector<std::vector<Mat>> frozen;
  for (int t = 0; t < 5; ++t) {
    train_task(model, stream, t, train);
    for (int u = 0; u < t; ++u) o.require(bitwise(frozen[static_cast<std::size_t>(u)], task_snapshot(model, u)),
                                          "task " + std::to_string(u) + " modules changed during task " + std::to_string(t));
    frozen.push_back(task_snapshot(model, t));
    for (int u = 0; u <= t; ++u) {
      bool refused = false;
      try {
        stream.open_train(u);
      } catch (const ProtocolError&) {
        refused = true;
      }
      o.require(refused, "train data of task " + std::to_string(u) + " reopened");
      o.require(stream.train_size(u) == 0, "train data of task " + std::to_string(u) + " retained");
    }
    const auto row = evaluate(model, stream, t);
    o.require(row.accuracy.size() == static_cast<std::size_t>(t + 1), "evaluation row size");
  }
  o.require(stream.access_log() == std::vector<int>({0, 1, 2, 3, 4}),
            "training data access log is not exactly 0,1,2,3,4");
  if (o.pass) o.detail = "5 tasks; frozen modules bitwise stable; access log 0..4; predict(image) only";
  return o;
}

// Ridge probe on raw pixels for one two-class task.
double probe_accuracy(const std::vector<Sample<double>>& train, const std::vector<Sample<double>>& test, int class_a) {
  const Eigen::Index p = static_cast<Eigen::Index>(train.front().image.pixels.size()) + 1;
  auto design = [&](const std::vector<Sample<double>>& set, Eigen::MatrixXd& x, Eigen::VectorXd& y) {
    x.resize(static_cast<Eigen::Index>(set.size()), p);
    y.resize(static_cast<Eigen::Index>(set.size()));
    for (std::size_t i = 0; i < set.size(); ++i) {
      for (Eigen::Index j = 0; j + 1 < p; ++j) x(static_cast<Eigen::Index>(i), j) = set[i].image.pixels[static_cast<std::size_t>(j)];
      x(static_cast<Eigen::Index>(i), p - 1) = 1.0;
      y(static_cast<Eigen::Index>(i)) = set[i].label == class_a ? 1.0 : -1.0;
    }
  };
  Eigen::MatrixXd xtr, xte;
  Eigen::VectorXd ytr, yte;
  design(train, xtr, ytr);
  design(test, xte, yte);
  const Eigen::VectorXd w = (xtr.transpose() * xtr + Eigen::MatrixXd::Identity(p, p)).ldlt().solve(xtr.transpose() * ytr);
  const Eigen::VectorXd pred = xte * w;
  long ok = 0;
  for (Eigen::Index i = 0; i < pred.size(); ++i) ok += (pred(i) > 0) == (yte(i) > 0);
  return static_cast<double>(ok) / static_cast<double>(pred.size());
}

ExperimentConfig desk_config(std::uint64_t seed, double separation, const fs::path& out) {
  ExperimentConfig cfg;  // 5 tasks x 2 classes, frozen random 4-layer backbone
  cfg.methods = {Method::incprompt, Method::ftseq};
  cfg.seed = seed;
  cfg.synthetic.separation = separation;
  cfg.output_dir = out.string();
  return cfg;
}

std::vector<RunResult> g_desk_runs;

Outcome forgetting_reduction() {
  Outcome o;
  std::string detail;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const ExperimentConfig cfg = desk_config(seed, kForgettingSeparation, scratch("desk_seed" + std::to_string(seed)));
    const auto data = build_dataset(cfg);
    const auto stream = split_classes(data, effective_split(cfg));
    double worst_probe = 1;
    for (int t = 0; t < stream.size(); ++t) {
      const auto ids = stream.class_ids(t);
      std::vector<Sample<double>> tr, te;
      for (const auto& s : data.train) {
        if (std::find(ids.begin(), ids.end(), s.label) != ids.end()) tr.push_back(s);
      }
      for (const auto& s : data.test) {
        if (std::find(ids.begin(), ids.end(), s.label) != ids.end()) te.push_back(s);
      }
      worst_probe = std::min(worst_probe, probe_accuracy(tr, te, ids.front()));
    }
    o.require(worst_probe >= kProbeMin, "seed " + std::to_string(seed) + " probe " + num(worst_probe));

    g_desk_runs.push_back(run_experiment(cfg, "acceptance"));
    const auto& inc = g_desk_runs.back().reports[0];
    const auto& ft = g_desk_runs.back().reports[1];
    o.require(inc.avg_acc >= ft.avg_acc + kAccGap, "seed " + std::to_string(seed) + " accuracy gap too small");
    o.require(inc.forgetting <= kForgetRatio * ft.forgetting, "seed " + std::to_string(seed) + " forgetting too high");
    detail += (detail.empty() ? "" : " | ") + std::string("seed ") + std::to_string(seed) + ": acc " + num(inc.avg_acc) +
              " vs " + num(ft.avg_acc) + ", fgt " + num(inc.forgetting) + " vs " + num(ft.forgetting);
  }
  o.detail = detail + (o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

Outcome key_matching() {
  Outcome o;
  if (g_desk_runs.size() != 3) {
    o.require(false, "desk-scale runs unavailable");
    return o;
  }
  double worst = 1;
  for (std::size_t s = 0; s < g_desk_runs.size(); ++s) {
    const auto& h = g_desk_runs[s].reports[0].histogram;
    for (std::size_t t = 0; t < h.size(); ++t) {
      long total = 0;
      long best_other = 0;
      for (std::size_t j = 0; j < h[t].size(); ++j) {
        total += h[t][j];
        if (j != t) best_other = std::max(best_other, h[t][j]);
      }
      const double diag = total ? static_cast<double>(h[t][t]) / static_cast<double>(total) : 0.0;
      worst = std::min(worst, diag);
      o.require(diag >= kMatchMin && h[t][t] > best_other,
                "seed " + std::to_string(s) + " task " + std::to_string(t) + " diagonal " + num(diag));
    }
  }
  o.detail = "min diagonal mass " + num(worst) + (o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

Outcome ablation_shapes() {
  Outcome o;
  const int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  ExperimentConfig base = desk_config(0, kAblationSeparation, scratch("ablation"));
  base.methods = {Method::incprompt};
  const auto len = run_sweep(base, SweepAxis::prompt_length, {0, 2, 4, 8, 16}, "acceptance", jobs);
  double acc[17] = {};
  for (const auto& p : len.points) acc[p.value] = p.avg_acc;
  const double late = acc[16] - acc[8], early = acc[4] - acc[2];
  o.require(late < early, "no saturation: (16-8) " + num(late) + " vs (4-2) " + num(early));

  const auto depth = run_sweep(base, SweepAxis::prompt_depth, {1, 2, 3, 4}, "acceptance", jobs);
  std::istringstream csv(slurp(fs::path(depth.output_dir) / "sweep.csv"));
  std::string line;
  std::getline(csv, line);
  o.require(line == "axis_value,avg_acc,forgetting,seed", "depth CSV header");
  int rows = 0, last = 0;
  while (std::getline(csv, line)) {
    int value = 0;
    double a = -1;
    o.require(std::sscanf(line.c_str(), "%d,%lf", &value, &a) == 2 && a >= 0 && a <= 1, "bad depth row '" + line + "'");
    o.require(value > last, "depth values not increasing");
    last = value;
    ++rows;
  }
  o.require(rows == 4, "depth CSV has " + std::to_string(rows) + " rows");
  o.detail = "length acc 0/2/4/8/16 = " + num(acc[0]) + "/" + num(acc[2]) + "/" + num(acc[4]) + "/" + num(acc[8]) + "/" +
             num(acc[16]) + ", depth rows " + std::to_string(rows) + (o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

Outcome reproducibility() {
  Outcome o;
  const fs::path dir = scratch("repro");
  ExperimentConfig cfg = desk_config(7, kForgettingSeparation, dir / "a");
  cfg.methods = {Method::incprompt, Method::ftseq, Method::upper_bound};
  cfg.split.num_tasks = 3;
  cfg.synthetic.train_per_class = 60;
  cfg.synthetic.test_per_class = 30;
  cfg.training.epochs = 2;
  run_experiment(cfg, "acceptance");
  cfg.output_dir = (dir / "b").string();
  run_experiment(cfg, "acceptance");
  const std::string a = slurp(dir / "a" / "summary.csv"), b = slurp(dir / "b" / "summary.csv");
  o.require(!a.empty() && a == b, "summary CSVs differ");
  o.detail = std::to_string(a.size()) + " bytes, identical: " + (a == b ? "yes" : "no");
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"gradient suite", gradient_suite},
      {"equivalence oracles", equivalence_oracles},
      {"hand values", hand_values},
      {"protocol invariants", protocol_invariants},
      {"forgetting reduction", forgetting_reduction},
      {"key matching", key_matching},
      {"ablation shapes", ablation_shapes},
      {"reproducibility", reproducibility},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failures += !o.pass;
    std::printf("criterion %zu (%s): %s  %s\n", i + 1, criteria[i].first, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
