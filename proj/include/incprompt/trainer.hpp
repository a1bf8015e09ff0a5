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

// The continual-learning engine: per-task training of a fresh key learner and
// prompter against L = L_task + L_key, class-incremental evaluation without
// task ids, the Avg. Acc / Forgetting metrics, and the FT-seq and joint
// (upper-bound) reference baselines.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "incprompt/backbone.hpp"
#include "incprompt/core/adam.hpp"
#include "incprompt/core/errors.hpp"
#include "incprompt/core/ops.hpp"
#include "incprompt/core/random.hpp"
#include "incprompt/core/tape.hpp"
#include "incprompt/data.hpp"
#include "incprompt/key_learner.hpp"
#include "incprompt/prompter.hpp"

namespace incprompt {

enum class Reduction { mean, sum };

inline std::string to_string(Reduction r) { return r == Reduction::mean ? "mean" : "sum"; }

inline Reduction reduction_from_string(const std::string& s) {
  if (s == "mean") return Reduction::mean;
  if (s == "sum") return Reduction::sum;
  throw ConfigError("unknown reduction '" + s + "'");
}

/// How the prompter is chosen at evaluation: by key matching, or forced to the true task.
enum class EvalMode { matched, oracle };

inline std::string to_string(EvalMode m) { return m == EvalMode::matched ? "matched" : "oracle"; }

struct ModelConfig {
  BackboneConfig backbone;
  PromptSchedule schedule = PromptSchedule::first_layers(4, 4);
  KeyLossConfig key_loss;
  int key_dim = 0;          // 0: embed_dim
  PoolMode key_pool = PoolMode::mean;
  Similarity similarity = Similarity::euclidean;
  int prompter_hidden = 0;  // 0: embed_dim
  Activation activation = Activation::gelu;
  PoolMode head_pool = PoolMode::cls;

  int resolved_key_dim() const { return key_dim > 0 ? key_dim : backbone.embed_dim; }
  int resolved_hidden() const { return prompter_hidden > 0 ? prompter_hidden : backbone.embed_dim; }

  void validate() const {
    backbone.validate();
    schedule.validate(backbone.num_layers);
    key_loss.validate();
    require(key_dim >= 0 && prompter_hidden >= 0, "model: key_dim and prompter_hidden must be >= 0");
    require(resolved_key_dim() == backbone.embed_dim, "model: key_dim must equal embed_dim for key matching");
  }
};

struct TrainingConfig {
  double learning_rate = 1e-3;
  int batch_size = 32;
  int epochs = 5;
  Reduction reduction = Reduction::mean;
  bool mask_current_task = true;        // restrict the training softmax to the current task's classes
  bool baseline_train_backbone = false;  // FT-seq / upper-bound also fine-tune the backbone

  void validate() const {
    require(std::isfinite(learning_rate) && learning_rate > 0, "training: learning_rate must be > 0");
    require(batch_size >= 1, "training: batch_size must be >= 1");
    require(epochs >= 0, "training: epochs must be >= 0");
  }
};

/// Shared class-incremental linear head; columns are activated task by task.
template <typename Scalar>
class ClassifierHead {
 public:
  ClassifierHead() = default;
  ClassifierHead(int embed_dim, int total_classes, std::uint64_t seed) {
    Rng rng = derive_rng(seed, 0x48454144ull);
    weight_ = {"head.weight", random_normal<Scalar>(embed_dim, total_classes, Scalar(0.02), rng)};
  }

  Parameter<Scalar>& weight() { return weight_; }
  const Parameter<Scalar>& weight() const { return weight_; }
  int active() const { return static_cast<int>(column_class_.size()); }
  int capacity() const { return static_cast<int>(weight_.value.cols()); }
  const std::vector<int>& column_class() const { return column_class_; }

  /// Appends columns for `classes`; returns the first new column.
  int activate(const std::vector<int>& classes) {
    const int first = active();
    for (int c : classes) {
      if (column_of_.count(c)) throw ProtocolError("head: class " + std::to_string(c) + " activated twice");
      if (active() >= capacity()) throw ConfigError("head: more classes than capacity");
      column_of_[c] = active();
      column_class_.push_back(c);
    }
    return first;
  }

  int column_of(int cls) const {
    auto it = column_of_.find(cls);
    if (it == column_of_.end()) throw ConfigError("head: class " + std::to_string(cls) + " is not active");
    return it->second;
  }

  /// Logits over columns [first, first + count).
  Var<Scalar> logits(Tape<Scalar>& tape, const Var<Scalar>& feature, int first, int count) const {
    if (first < 0 || count <= 0 || first + count > active()) throw ConfigError("head: column range not active");
    return ops::matmul(feature, ops::slice_cols(tape.parameter(weight_), first, count));
  }

  void restore_columns(std::vector<int> column_class) {
    column_class_.clear();
    column_of_.clear();
    activate(column_class);
  }

 private:
  Parameter<Scalar> weight_;
  std::vector<int> column_class_;
  std::unordered_map<int, int> column_of_;
};

/// Cross-entropy of each logit row against its label, summed or averaged over the batch.
template <typename Scalar>
Scalar task_loss(const Matrix<Scalar>& logits, const std::vector<int>& labels, Reduction reduction = Reduction::sum) {
  if (static_cast<std::size_t>(logits.rows()) != labels.size()) throw ConfigError("task_loss: batch size mismatch");
  if (!logits.allFinite()) throw NumericError("task_loss: non-finite logits");
  Scalar total = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= logits.cols()) throw ConfigError("task_loss: label " + std::to_string(y) + " out of range");
    const Scalar m = logits.row(i).maxCoeff();
    const Scalar lse = m + std::log((logits.row(i).array() - m).exp().sum());
    total += lse - logits(i, y);
  }
  if (reduction == Reduction::mean && logits.rows() > 0) total /= static_cast<Scalar>(logits.rows());
  return total;
}

template <typename Scalar>
Scalar total_loss(Scalar task_l, Scalar key_l) {
  if (!std::isfinite(task_l) || !std::isfinite(key_l)) throw NumericError("total_loss: non-finite component");
  return task_l + key_l;
}

struct Metrics {
  double avg_acc = 0;
  double forgetting = 0;
  bool forgetting_defined = false;
};

/// Avg. Acc over the last row; Forgetting as the mean drop from each task's
/// best earlier accuracy to its final accuracy (undefined, reported 0, for N < 2).
inline Metrics compute_metrics(const Eigen::MatrixXd& acc) {
  if (acc.rows() == 0 || acc.rows() != acc.cols()) throw ConfigError("compute_metrics: accuracy matrix must be square");
  const Eigen::Index n = acc.rows();
  for (Eigen::Index t = 0; t < n; ++t) {
    for (Eigen::Index j = 0; j <= t; ++j) {
      if (!std::isfinite(acc(t, j))) throw ConfigError("compute_metrics: lower triangle must be filled");
    }
  }
  Metrics m;
  m.avg_acc = acc.row(n - 1).mean();
  if (n < 2) return m;
  m.forgetting_defined = true;
  double total = 0;
  for (Eigen::Index j = 0; j + 1 < n; ++j) {
    double best = acc(j, j);
    for (Eigen::Index t = j; t < n; ++t) best = std::max(best, acc(t, j));
    total += best - acc(n - 1, j);
  }
  m.forgetting = total / static_cast<double>(n - 1);
  return m;
}

struct ContinualReport {
  std::string method;
  std::uint64_t seed = 0;
  Eigen::MatrixXd acc;  // (trained, evaluated); NaN where not evaluated
  double avg_acc = 0;
  double forgetting = 0;
  bool forgetting_defined = false;
  std::string selection_mode;  // matched, oracle or none
  std::vector<std::vector<long>> histogram;  // (true task, selected prompter)
  std::vector<double> epoch_losses;

  int num_tasks() const { return static_cast<int>(acc.rows()); }
};

/// Frozen backbone, per-task key learners and prompters, shared head.
template <typename Scalar>
class IncPromptModel {
 public:
  using Mat = Matrix<Scalar>;

  IncPromptModel(const ModelConfig& cfg, int total_classes, std::uint64_t seed)
      : cfg_(cfg), seed_(seed), backbone_((cfg.validate(), cfg.backbone), seed),
        head_(cfg.backbone.embed_dim, total_classes, seed) {}

  const ModelConfig& config() const { return cfg_; }
  std::uint64_t seed() const { return seed_; }
  Backbone<Scalar>& backbone() { return backbone_; }
  const Backbone<Scalar>& backbone() const { return backbone_; }
  ClassifierHead<Scalar>& head() { return head_; }
  const ClassifierHead<Scalar>& head() const { return head_; }
  const std::vector<KeyLearner<Scalar>>& learners() const { return learners_; }
  std::vector<KeyLearner<Scalar>>& learners() { return learners_; }
  const std::vector<TaskPrompter<Scalar>>& prompters() const { return prompters_; }
  std::vector<TaskPrompter<Scalar>>& prompters() { return prompters_; }
  int tasks_trained() const { return static_cast<int>(learners_.size()); }
  const std::vector<int>& task_first_column() const { return task_first_col_; }

  /// Adds the learner, prompter and head columns for the next task and freezes all earlier modules.
  void begin_task(int task_id, const std::vector<int>& classes) {
    if (task_id != tasks_trained()) {
      throw ProtocolError("train_task: expected task " + std::to_string(tasks_trained()) + ", got " +
                          std::to_string(task_id));
    }
    for (auto& l : learners_) l.set_trainable(false);
    for (auto& p : prompters_) p.set_trainable(false);
    learners_.emplace_back(task_id, cfg_.backbone.embed_dim, cfg_.resolved_key_dim(), cfg_.key_pool, seed_);
    prompters_.emplace_back(task_id, cfg_.backbone.embed_dim, cfg_.resolved_hidden(), cfg_.schedule, cfg_.activation,
                            seed_);
    task_first_col_.push_back(head_.activate(classes));
  }

  /// Prompt-free final-layer tokens.
  Mat prompt_free_tokens(const Image<Scalar>& img) const {
    Tape<Scalar> tape(false);
    return backbone_.encode(backbone_.embed(tape, img)).value();
  }

  Mat embedding(const Image<Scalar>& img) const {
    Tape<Scalar> tape(false);
    return backbone_.embed(tape, img).value();
  }

  /// Feature fed to the head after a forward pass with `prompter`'s prompts.
  Var<Scalar> prompted_feature(Tape<Scalar>& tape, const Var<Scalar>& embedded, const Var<Scalar>& prompt_free,
                               int prompter) const {
    const auto& p = prompters_.at(static_cast<std::size_t>(prompter));
    Var<Scalar> generated = p.generate(tape, pool(prompt_free, kTokenPool));
    Var<Scalar> out = backbone_.encode(embedded, p.layer_prompts(generated, cfg_.schedule), cfg_.schedule);
    return pool(out, cfg_.head_pool);
  }

  struct Prediction {
    int class_id = -1;
    int selected_task = -1;
  };

  /// Class-incremental prediction over every class seen so far; no task id is consumed.
  Prediction predict(const Image<Scalar>& img) const { return predict_impl(img, std::nullopt); }

  /// Prediction with the prompter forced to `task` (oracle matching).
  Prediction predict_with_task(const Image<Scalar>& img, int task) const { return predict_impl(img, task); }

 private:
  Prediction predict_impl(const Image<Scalar>& img, std::optional<int> forced) const {
    if (learners_.empty()) throw ProtocolError("predict: no task trained yet");
    Tape<Scalar> tape(false);
    Var<Scalar> embedded = backbone_.embed(tape, img);
    Var<Scalar> prompt_free = backbone_.encode(embedded);
    Prediction out;
    out.selected_task = forced ? *forced : match_task(prompt_free.value(), learners_, cfg_.similarity);
    Var<Scalar> feature = prompted_feature(tape, embedded, prompt_free, out.selected_task);
    Var<Scalar> logits = head_.logits(tape, feature, 0, head_.active());
    Eigen::Index col = 0;
    logits.value().row(0).maxCoeff(&col);
    out.class_id = head_.column_class()[static_cast<std::size_t>(col)];
    return out;
  }

  ModelConfig cfg_;
  std::uint64_t seed_;
  Backbone<Scalar> backbone_;
  ClassifierHead<Scalar> head_;
  std::vector<KeyLearner<Scalar>> learners_;
  std::vector<TaskPrompter<Scalar>> prompters_;
  std::vector<int> task_first_col_;
};

/// Per-sample constants for training on a frozen backbone.
template <typename Scalar>
struct CachedSample {
  Matrix<Scalar> embedding;    // patch + class + position tokens
  Matrix<Scalar> tokens;       // prompt-free final-layer tokens
  std::optional<Matrix<Scalar>> negative;  // hard-negative key, absent for the first task
  int column = 0;              // head column of the label
};

template <typename Scalar>
CachedSample<Scalar> cache_sample(const IncPromptModel<Scalar>& model, int task, const Sample<Scalar>& s) {
  CachedSample<Scalar> c;
  c.embedding = model.embedding(s.image);
  Tape<Scalar> tape(false);
  c.tokens = model.backbone().encode(tape.constant(c.embedding)).value();
  c.negative = mine_negative(task, c.tokens, model.learners(), model.config().similarity);
  c.column = model.head().column_of(s.label);
  return c;
}

template <typename Scalar>
struct SampleLoss {
  Var<Scalar> total;
  Var<Scalar> task;
  Var<Scalar> key;
};

/// L_task + L_key for one input while training `task`. The softmax covers the
/// task's own columns when `mask_current_task`, else every active column.
template <typename Scalar>
SampleLoss<Scalar> incprompt_sample_loss(Tape<Scalar>& tape, const IncPromptModel<Scalar>& model, int task,
                                         const CachedSample<Scalar>& s, bool mask_current_task) {
  const auto& cfg = model.config();
  Var<Scalar> tokens = tape.constant(s.tokens);
  Var<Scalar> target = pool(tokens, kTokenPool);
  Var<Scalar> anchor = model.learners().at(static_cast<std::size_t>(task)).key(tape, tokens);
  std::optional<Var<Scalar>> negative;
  if (s.negative) negative = tape.constant(*s.negative);
  Var<Scalar> key = key_loss_term(target, anchor, negative ? &*negative : nullptr, cfg.key_loss);

  Var<Scalar> feature = model.prompted_feature(tape, tape.constant(s.embedding), tokens, task);
  const int first = mask_current_task ? model.task_first_column().at(static_cast<std::size_t>(task)) : 0;
  const int count = mask_current_task ? static_cast<int>(model.head().active()) - first : model.head().active();
  Var<Scalar> logits = model.head().logits(tape, feature, first, count);
  Var<Scalar> ce = ops::cross_entropy(logits, s.column - first);
  return {ops::add(ce, key), ce, key};
}

struct TrainStats {
  std::vector<double> epoch_losses;  // mean per-sample total loss of each epoch
  std::vector<double> step_losses;   // mean per-sample total loss of each optimizer step
};

/// Trains task `task` of `stream`: fresh learner + prompter, Adam on those and the head only.
template <typename Scalar>
TrainStats train_task(IncPromptModel<Scalar>& model, TaskStream<Scalar>& stream, int task, const TrainingConfig& cfg) {
  cfg.validate();
  if (task != stream.cursor()) throw ProtocolError("train_task: task " + std::to_string(task) + " out of stream order");
  model.begin_task(task, stream.class_ids(task));
  const auto data = stream.open_train(task);

  std::vector<CachedSample<Scalar>> cache;
  cache.reserve(data.size());
  for (const auto& s : data) cache.push_back(cache_sample(model, task, s));

  std::vector<Parameter<Scalar>*> params;
  model.learners().back().for_each_parameter([&](Parameter<Scalar>& p) { params.push_back(&p); });
  model.prompters().back().for_each_parameter([&](Parameter<Scalar>& p) { params.push_back(&p); });
  params.push_back(&model.head().weight());
  Adam<Scalar> adam(params, {static_cast<Scalar>(cfg.learning_rate)});

  Rng rng = derive_rng(model.seed(), 0x545241494Eull + static_cast<std::uint64_t>(task));
  std::vector<std::size_t> order(cache.size());
  std::iota(order.begin(), order.end(), 0);
  TrainStats stats;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_total = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const Scalar weight = cfg.reduction == Reduction::mean ? Scalar(1) / static_cast<Scalar>(end - start) : Scalar(1);
      double step_total = 0;
      for (std::size_t i = start; i < end; ++i) {
        Tape<Scalar> tape;
        SampleLoss<Scalar> loss = incprompt_sample_loss(tape, model, task, cache[order[i]], cfg.mask_current_task);
        if (!std::isfinite(loss.total.scalar())) throw NumericError("train_task: loss diverged");
        tape.backward(loss.total);
        adam.add_gradient(tape, weight);
        step_total += static_cast<double>(loss.total.scalar());
      }
      adam.step();
      stats.step_losses.push_back(step_total / static_cast<double>(end - start));
      epoch_total += step_total;
    }
    stats.epoch_losses.push_back(order.empty() ? 0.0 : epoch_total / static_cast<double>(order.size()));
  }
  stream.finish(task);
  return stats;
}

struct EvalRow {
  std::vector<double> accuracy;               // per evaluated task
  std::vector<std::vector<long>> selections;  // (true task, selected prompter)
};

/// Accuracy on the test sets of tasks 0..upto. In matched mode the prompter
/// comes from key matching; in oracle mode from the true task.
template <typename Scalar>
EvalRow evaluate(const IncPromptModel<Scalar>& model, const TaskStream<Scalar>& stream, int upto,
                 EvalMode mode = EvalMode::matched) {
  if (upto < 0 || upto >= model.tasks_trained()) throw ProtocolError("evaluate: tasks 0..upto must be trained");
  EvalRow row;
  row.selections.assign(static_cast<std::size_t>(upto + 1), std::vector<long>(static_cast<std::size_t>(stream.size()), 0));
  for (int j = 0; j <= upto; ++j) {
    const auto& test = stream.test(j);
    long correct = 0;
    for (const auto& s : test) {
      const auto pred = mode == EvalMode::matched ? model.predict(s.image) : model.predict_with_task(s.image, j);
      correct += pred.class_id == s.label;
      ++row.selections[static_cast<std::size_t>(j)][static_cast<std::size_t>(pred.selected_task)];
    }
    row.accuracy.push_back(test.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(test.size()));
  }
  return row;
}

namespace detail {

inline void finalize_report(ContinualReport& r) {
  const Metrics m = compute_metrics(r.acc);
  r.avg_acc = m.avg_acc;
  r.forgetting = m.forgetting;
  r.forgetting_defined = m.forgetting_defined;
}

}  // namespace detail

/// Trains every task in order and evaluates after each one.
template <typename Scalar>
ContinualReport run_incprompt(IncPromptModel<Scalar>& model, TaskStream<Scalar> stream, const TrainingConfig& cfg,
                              EvalMode mode = EvalMode::matched) {
  const int n = stream.size();
  ContinualReport report;
  report.method = "incprompt";
  report.seed = model.seed();
  report.selection_mode = to_string(mode);
  report.acc = Eigen::MatrixXd::Constant(n, n, std::numeric_limits<double>::quiet_NaN());
  for (int t = 0; t < n; ++t) {
    const TrainStats stats = train_task(model, stream, t, cfg);
    report.epoch_losses.insert(report.epoch_losses.end(), stats.epoch_losses.begin(), stats.epoch_losses.end());
    EvalRow row = evaluate(model, stream, t, mode);
    for (int j = 0; j <= t; ++j) report.acc(t, j) = row.accuracy[static_cast<std::size_t>(j)];
    if (t == n - 1) report.histogram = std::move(row.selections);
  }
  detail::finalize_report(report);
  return report;
}

enum class BaselineMode { ftseq, upper_bound };

inline std::string to_string(BaselineMode m) { return m == BaselineMode::ftseq ? "ftseq" : "upper_bound"; }

/// FT-seq: sequential training of the shared head (optionally the backbone)
/// with softmax over all seen classes and no prompts or keys.
/// Upper bound: joint training on the union of all tasks.
template <typename Scalar>
ContinualReport run_baseline(TaskStream<Scalar> stream, BaselineMode mode, const ModelConfig& model_cfg,
                             const TrainingConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  model_cfg.validate();
  using Mat = Matrix<Scalar>;
  const int n = stream.size();
  Backbone<Scalar> backbone(model_cfg.backbone, seed);
  backbone.set_frozen(!cfg.baseline_train_backbone);
  ClassifierHead<Scalar> head(model_cfg.backbone.embed_dim, stream.total_classes(), seed);
  const PoolMode head_pool = model_cfg.head_pool;

  auto forward_feature = [&](Tape<Scalar>& tape, const Sample<Scalar>& s) {
    return pool(backbone.encode(backbone.embed(tape, s.image)), head_pool);
  };

  // Frozen backbone: features are constants, computed once.
  auto train_on = [&](const std::vector<const Sample<Scalar>*>& data, Rng& rng, std::vector<double>& losses) {
    std::vector<Parameter<Scalar>*> params{&head.weight()};
    if (cfg.baseline_train_backbone) backbone.for_each_parameter([&](Parameter<Scalar>& p) { params.push_back(&p); });
    Adam<Scalar> adam(params, {static_cast<Scalar>(cfg.learning_rate)});
    std::vector<Mat> features;
    std::vector<int> columns;
    for (const auto* s : data) {
      columns.push_back(head.column_of(s->label));
      if (!cfg.baseline_train_backbone) {
        Tape<Scalar> tape(false);
        features.push_back(forward_feature(tape, *s).value());
      }
    }
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), rng);
      double epoch_total = 0;
      for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
        const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
        const Scalar weight = cfg.reduction == Reduction::mean ? Scalar(1) / static_cast<Scalar>(end - start) : Scalar(1);
        for (std::size_t i = start; i < end; ++i) {
          const std::size_t k = order[i];
          Tape<Scalar> tape;
          Var<Scalar> feature = cfg.baseline_train_backbone ? forward_feature(tape, *data[k]) : tape.constant(features[k]);
          Var<Scalar> loss = ops::cross_entropy(head.logits(tape, feature, 0, head.active()), columns[k]);
          tape.backward(loss);
          adam.add_gradient(tape, weight);
          epoch_total += static_cast<double>(loss.scalar());
        }
        adam.step();
      }
      losses.push_back(order.empty() ? 0.0 : epoch_total / static_cast<double>(order.size()));
    }
  };

  auto accuracy = [&](int j) {
    const auto& test = stream.test(j);
    long correct = 0;
    for (const auto& s : test) {
      Tape<Scalar> tape(false);
      Var<Scalar> logits = head.logits(tape, forward_feature(tape, s), 0, head.active());
      Eigen::Index col = 0;
      logits.value().row(0).maxCoeff(&col);
      correct += head.column_class()[static_cast<std::size_t>(col)] == s.label;
    }
    return test.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(test.size());
  };

  ContinualReport report;
  report.method = to_string(mode);
  report.seed = seed;
  report.selection_mode = "none";
  report.acc = Eigen::MatrixXd::Constant(n, n, std::numeric_limits<double>::quiet_NaN());
  Rng rng = derive_rng(seed, 0x42415345ull);

  if (mode == BaselineMode::ftseq) {
    for (int t = 0; t < n; ++t) {
      head.activate(stream.class_ids(t));
      const auto data = stream.open_train(t);
      std::vector<const Sample<Scalar>*> ptrs;
      for (const auto& s : data) ptrs.push_back(&s);
      train_on(ptrs, rng, report.epoch_losses);
      stream.finish(t);
      for (int j = 0; j <= t; ++j) report.acc(t, j) = accuracy(j);
    }
    detail::finalize_report(report);
    return report;
  }

  // Joint training sees every task's data at once; only the final row is defined.
  std::vector<Sample<Scalar>> pool_data;
  for (int t = 0; t < n; ++t) {
    head.activate(stream.class_ids(t));
    for (const auto& s : stream.open_train(t)) pool_data.push_back(s);
  }
  stream.finish(n - 1);
  std::vector<const Sample<Scalar>*> ptrs;
  for (const auto& s : pool_data) ptrs.push_back(&s);
  train_on(ptrs, rng, report.epoch_losses);
  for (int j = 0; j < n; ++j) report.acc(n - 1, j) = accuracy(j);
  report.avg_acc = report.acc.row(n - 1).mean();
  report.forgetting = 0;
  report.forgetting_defined = false;
  return report;
}

}  // namespace incprompt
