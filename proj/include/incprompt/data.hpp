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

// Disjoint-class task streams and the synthetic Gaussian-blob generator.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "incprompt/backbone.hpp"
#include "incprompt/core/errors.hpp"
#include "incprompt/core/random.hpp"

namespace incprompt {

template <typename Scalar>
struct Sample {
  Image<Scalar> image;
  int label = 0;
  std::string source;  // file path for image-folder data, empty otherwise
};

/// A flat labeled dataset with labels in [0, num_classes).
template <typename Scalar>
struct LabeledDataset {
  int num_classes = 0;
  std::vector<std::string> class_names;
  std::vector<Sample<Scalar>> train;
  std::vector<Sample<Scalar>> test;
};

enum class DataSource { synthetic, image_folder, builtin_small };

inline std::string to_string(DataSource s) {
  switch (s) {
    case DataSource::synthetic: return "synthetic";
    case DataSource::image_folder: return "image-folder";
    case DataSource::builtin_small: return "builtin-small";
  }
  return "?";
}

inline DataSource data_source_from_string(const std::string& s) {
  if (s == "synthetic") return DataSource::synthetic;
  if (s == "image-folder") return DataSource::image_folder;
  if (s == "builtin-small") return DataSource::builtin_small;
  throw ConfigError("unknown data source '" + s + "' (expected synthetic, image-folder or builtin-small)");
}

struct SplitSpec {
  int num_tasks = 5;
  int classes_per_task = 2;
  std::uint64_t shuffle_seed = 0;
  DataSource source = DataSource::synthetic;

  void validate() const {
    require(num_tasks >= 1, "split: num_tasks must be >= 1");
    require(classes_per_task >= 1, "split: classes_per_task must be >= 1");
  }
};

template <typename Scalar>
struct TaskData {
  int task_id = 0;
  std::vector<int> class_ids;
  std::vector<Sample<Scalar>> train;
  std::vector<Sample<Scalar>> test;
};

/// Ordered tasks with disjoint class sets. Training data is handed out one
/// task at a time, strictly in order, and destroyed once the task is finished.
template <typename Scalar>
class TaskStream {
 public:
  TaskStream() = default;

  explicit TaskStream(std::vector<TaskData<Scalar>> tasks) : tasks_(std::move(tasks)) {
    std::set<int> seen;
    for (std::size_t t = 0; t < tasks_.size(); ++t) {
      if (tasks_[t].task_id != static_cast<int>(t)) throw ConfigError("task stream: task ids must be 0..N-1 in order");
      if (tasks_[t].class_ids.empty()) throw ConfigError("task stream: task without classes");
      for (int c : tasks_[t].class_ids) {
        if (!seen.insert(c).second) {
          throw ConfigError("task stream: class " + std::to_string(c) + " appears in more than one task");
        }
      }
      const std::set<int> own(tasks_[t].class_ids.begin(), tasks_[t].class_ids.end());
      for (const auto* split : {&tasks_[t].train, &tasks_[t].test}) {
        for (const auto& s : *split) {
          if (!own.count(s.label)) throw ConfigError("task stream: sample label outside its task's classes");
        }
      }
    }
  }

  int size() const { return static_cast<int>(tasks_.size()); }
  int total_classes() const {
    int n = 0;
    for (const auto& t : tasks_) n += static_cast<int>(t.class_ids.size());
    return n;
  }
  const std::vector<int>& class_ids(int t) const { return task(t).class_ids; }
  const std::vector<Sample<Scalar>>& test(int t) const { return task(t).test; }
  std::size_t train_size(int t) const { return task(t).train.size(); }

  /// Next task index that open_train() will accept.
  int cursor() const { return cursor_; }
  bool finished(int t) const { return t < finished_upto_; }

  /// Training data for task `t`; finishes every earlier task first.
  std::span<const Sample<Scalar>> open_train(int t) {
    if (t != cursor_) {
      throw ProtocolError("task stream: training data requested for task " + std::to_string(t) +
                          " but the next task in order is " + std::to_string(cursor_));
    }
    if (t > 0) finish(t - 1);
    access_log_.push_back(t);
    ++cursor_;
    return {task(t).train.data(), task(t).train.size()};
  }

  /// Destroys the training data of task `t` and all earlier tasks.
  void finish(int t) {
    for (int i = finished_upto_; i <= t && i < size(); ++i) {
      auto& tr = tasks_[static_cast<std::size_t>(i)].train;
      tr.clear();
      tr.shrink_to_fit();
    }
    finished_upto_ = std::max(finished_upto_, t + 1);
  }

  /// Task index of every open_train() call, in order.
  const std::vector<int>& access_log() const { return access_log_; }

 private:
  const TaskData<Scalar>& task(int t) const {
    if (t < 0 || t >= size()) throw ConfigError("task stream: task index " + std::to_string(t) + " out of range");
    return tasks_[static_cast<std::size_t>(t)];
  }

  std::vector<TaskData<Scalar>> tasks_;
  int cursor_ = 0;
  int finished_upto_ = 0;
  std::vector<int> access_log_;
};

/// Randomly partitions the dataset's classes into `spec.num_tasks` groups of
/// `spec.classes_per_task`; unused classes are dropped.
template <typename Scalar>
TaskStream<Scalar> split_classes(const LabeledDataset<Scalar>& data, const SplitSpec& spec) {
  spec.validate();
  const int needed = spec.num_tasks * spec.classes_per_task;
  if (data.num_classes < needed) {
    throw ConfigError("split: " + std::to_string(needed) + " classes required, dataset has " +
                      std::to_string(data.num_classes));
  }
  std::vector<int> perm(static_cast<std::size_t>(data.num_classes));
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng = derive_rng(spec.shuffle_seed, 0x53504C4954ull);
  std::shuffle(perm.begin(), perm.end(), rng);

  std::vector<int> task_of(static_cast<std::size_t>(data.num_classes), -1);
  std::vector<TaskData<Scalar>> tasks(static_cast<std::size_t>(spec.num_tasks));
  for (int t = 0; t < spec.num_tasks; ++t) {
    tasks[static_cast<std::size_t>(t)].task_id = t;
    for (int c = 0; c < spec.classes_per_task; ++c) {
      const int cls = perm[static_cast<std::size_t>(t * spec.classes_per_task + c)];
      tasks[static_cast<std::size_t>(t)].class_ids.push_back(cls);
      task_of[static_cast<std::size_t>(cls)] = t;
    }
  }
  for (const auto& s : data.train) {
    const int t = task_of.at(static_cast<std::size_t>(s.label));
    if (t >= 0) tasks[static_cast<std::size_t>(t)].train.push_back(s);
  }
  for (const auto& s : data.test) {
    const int t = task_of.at(static_cast<std::size_t>(s.label));
    if (t >= 0) tasks[static_cast<std::size_t>(t)].test.push_back(s);
  }
  return TaskStream<Scalar>(std::move(tasks));
}

struct SyntheticSpec {
  int num_classes = 10;
  int dim = 16;
  int train_per_class = 200;
  int test_per_class = 100;
  double separation = 10.0;
  double noise = 1.0;
  std::uint64_t seed = 0;
  int image_size = 16;
  int channels = 3;

  void validate() const {
    require(num_classes >= 1, "synthetic: num_classes must be >= 1");
    require(dim >= 1, "synthetic: dim must be >= 1");
    require(train_per_class >= 0 && test_per_class >= 0, "synthetic: sample counts must be >= 0");
    require(std::isfinite(separation) && separation >= 0, "synthetic: separation must be finite and >= 0");
    require(std::isfinite(noise) && noise > 0, "synthetic: noise must be positive");
    require(image_size >= 1 && channels >= 1, "synthetic: image shape must be positive");
  }
};

/// Latent z = separation * u_c + noise * N(0, I) with u_c a random unit
/// direction per class, rendered as pixels = E z / sqrt(dim) for a fixed
/// Gaussian matrix E.
template <typename Scalar>
LabeledDataset<Scalar> synthetic_gaussian_dataset(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng = derive_rng(spec.seed, 0x53594E5448ull);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int pixels = spec.image_size * spec.image_size * spec.channels;

  Eigen::MatrixXd render(pixels, spec.dim);
  for (Eigen::Index i = 0; i < render.size(); ++i) render.data()[i] = normal(rng) / std::sqrt(double(spec.dim));

  Eigen::MatrixXd centers(spec.num_classes, spec.dim);
  for (int c = 0; c < spec.num_classes; ++c) {
    Eigen::VectorXd u(spec.dim);
    for (int i = 0; i < spec.dim; ++i) u(i) = normal(rng);
    centers.row(c) = (u / u.norm() * spec.separation).transpose();
  }

  LabeledDataset<Scalar> out;
  out.num_classes = spec.num_classes;
  for (int c = 0; c < spec.num_classes; ++c) out.class_names.push_back("class" + std::to_string(c));

  auto draw = [&](int label) {
    Eigen::VectorXd z = centers.row(label).transpose();
    for (int i = 0; i < spec.dim; ++i) z(i) += spec.noise * normal(rng);
    Eigen::VectorXd px = render * z;
    Sample<Scalar> s;
    s.label = label;
    s.image = {spec.image_size, spec.image_size, spec.channels, std::vector<Scalar>(static_cast<std::size_t>(pixels))};
    for (int i = 0; i < pixels; ++i) s.image.pixels[static_cast<std::size_t>(i)] = static_cast<Scalar>(px(i));
    return s;
  };
  for (int c = 0; c < spec.num_classes; ++c) {
    for (int i = 0; i < spec.train_per_class; ++i) out.train.push_back(draw(c));
  }
  for (int c = 0; c < spec.num_classes; ++c) {
    for (int i = 0; i < spec.test_per_class; ++i) out.test.push_back(draw(c));
  }
  return out;
}

template <typename Scalar>
TaskStream<Scalar> synthetic_gaussian_tasks(int num_tasks, int classes_per_task, int dim, int samples_per_class,
                                            double separation, std::uint64_t seed, int test_per_class = 100,
                                            int image_size = 16, int channels = 3) {
  require(separation > 0, "synthetic: separation must be > 0");
  SyntheticSpec spec;
  spec.num_classes = num_tasks * classes_per_task;
  spec.dim = dim;
  spec.train_per_class = samples_per_class;
  spec.test_per_class = test_per_class;
  spec.separation = separation;
  spec.seed = seed;
  spec.image_size = image_size;
  spec.channels = channels;
  SplitSpec split;
  split.num_tasks = num_tasks;
  split.classes_per_task = classes_per_task;
  split.shuffle_seed = seed;
  return split_classes(synthetic_gaussian_dataset<Scalar>(spec), split);
}

/// Fixed 10-class synthetic set (50 train / 20 test images per class) for smoke runs.
template <typename Scalar>
LabeledDataset<Scalar> builtin_small_dataset(int image_size = 16, int channels = 3) {
  SyntheticSpec spec;
  spec.num_classes = 10;
  spec.train_per_class = 50;
  spec.test_per_class = 20;
  spec.separation = 30.0;
  spec.seed = 0x5EED;
  spec.image_size = image_size;
  spec.channels = channels;
  return synthetic_gaussian_dataset<Scalar>(spec);
}

/// Writes `path,label,task_id` for every sample of the stream's tasks.
template <typename Scalar>
void write_split_manifest(const std::string& file, const LabeledDataset<Scalar>& data, const SplitSpec& spec) {
  const TaskStream<Scalar> stream = split_classes(data, spec);
  std::vector<int> task_of(static_cast<std::size_t>(data.num_classes), -1);
  for (int t = 0; t < stream.size(); ++t) {
    for (int c : stream.class_ids(t)) task_of[static_cast<std::size_t>(c)] = t;
  }
  std::ofstream out(file);
  if (!out) throw ConfigError("cannot write split manifest '" + file + "'");
  out << "path,label,task_id\n";
  for (const auto* split : {&data.train, &data.test}) {
    for (const auto& s : *split) {
      const int t = task_of[static_cast<std::size_t>(s.label)];
      if (t < 0) continue;
      out << s.source << ',' << s.label << ',' << t << '\n';
    }
  }
}

}  // namespace incprompt
