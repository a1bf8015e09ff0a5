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

// Experiment driver: runs methods from a configuration, sweeps the prompt
// ablation axes and renders selection histograms. All outputs are written
// under the run's output directory.
//
// Files written by a run:
//   manifest.json            status (incomplete|complete), config, seed, code version
//   summary.csv              seed,method,avg_acc,forgetting,prompt_length,prompt_depth
//   per_task_<method>.csv    task_trained,task_evaluated,accuracy,selected_task_mode
//   report.json              accuracy matrices, selection histogram, losses
//   checkpoint.bin           trained prompted model (incprompt only)
//   split_manifest.csv       path,label,task_id (image-folder source only)

#pragma once

#include <nlohmann/json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "incprompt/checkpoint.hpp"
#include "incprompt/config.hpp"
#include "incprompt/data.hpp"
#include "incprompt/image_folder.hpp"
#include "incprompt/plot.hpp"
#include "incprompt/trainer.hpp"

namespace incprompt {

inline constexpr int kCsvSchemaVersion = 1;
inline constexpr const char* kOutputRootEnv = "INCPROMPT_OUTPUT_ROOT";

using LogFn = std::function<void(const std::string&)>;

namespace fs = std::filesystem;

/// Relative output directories are placed under $INCPROMPT_OUTPUT_ROOT when it is set.
inline std::string resolve_output_dir(const std::string& dir) {
  const char* root = std::getenv(kOutputRootEnv);
  if (root == nullptr || *root == '\0' || fs::path(dir).is_absolute()) return dir;
  return (fs::path(root) / dir).string();
}

namespace detail {

inline std::string fmt(double v) {
  if (!std::isfinite(v)) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

inline void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

inline json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path.string() + "'");
  return json::parse(in);
}

inline json nan_to_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json report_json(const ContinualReport& r) {
  json acc = json::array();
  for (Eigen::Index t = 0; t < r.acc.rows(); ++t) {
    json row = json::array();
    for (Eigen::Index j = 0; j < r.acc.cols(); ++j) row.push_back(nan_to_null(r.acc(t, j)));
    acc.push_back(row);
  }
  return {{"method", r.method},
          {"seed", r.seed},
          {"acc", acc},
          {"avg_acc", r.avg_acc},
          {"forgetting", r.forgetting_defined ? json(r.forgetting) : json(nullptr)},
          {"selection_mode", r.selection_mode},
          {"histogram", r.histogram},
          {"epoch_losses", r.epoch_losses}};
}

}  // namespace detail

/// Loads the dataset named by the configuration.
inline LabeledDataset<double> build_dataset(const ExperimentConfig& cfg) {
  const auto& bb = cfg.model.backbone;
  if (cfg.split.source == DataSource::image_folder) {
    return load_image_folder<double>(cfg.image_root, bb.image_size, bb.channels);
  }
  if (cfg.split.source == DataSource::builtin_small) return builtin_small_dataset<double>(bb.image_size, bb.channels);
  SyntheticSpec spec;
  spec.num_classes = cfg.split.num_tasks * cfg.split.classes_per_task;
  spec.dim = cfg.synthetic.dim;
  spec.train_per_class = cfg.synthetic.train_per_class;
  spec.test_per_class = cfg.synthetic.test_per_class;
  spec.separation = cfg.synthetic.separation;
  spec.noise = cfg.synthetic.noise;
  spec.seed = cfg.seed;
  spec.image_size = bb.image_size;
  spec.channels = bb.channels;
  return synthetic_gaussian_dataset<double>(spec);
}

inline SplitSpec effective_split(const ExperimentConfig& cfg) {
  SplitSpec s = cfg.split;
  s.shuffle_seed = cfg.effective_shuffle_seed();
  return s;
}

struct RunResult {
  std::string output_dir;
  std::vector<ContinualReport> reports;
};

inline std::string summary_header() { return "seed,method,avg_acc,forgetting,prompt_length,prompt_depth\n"; }

inline std::string summary_row(const ContinualReport& r, const ModelConfig& m) {
  const bool prompted = r.method == "incprompt";
  return std::to_string(r.seed) + "," + r.method + "," + detail::fmt(r.avg_acc) + "," +
         (r.forgetting_defined ? detail::fmt(r.forgetting) : std::string("NA")) + "," +
         (prompted ? std::to_string(m.schedule.prompt_length) : std::string("NA")) + "," +
         (prompted ? std::to_string(m.schedule.depth()) : std::string("NA")) + "\n";
}

inline std::string per_task_csv(const ContinualReport& r) {
  std::string s = "task_trained,task_evaluated,accuracy,selected_task_mode\n";
  for (Eigen::Index t = 0; t < r.acc.rows(); ++t) {
    for (Eigen::Index j = 0; j < r.acc.cols(); ++j) {
      if (!std::isfinite(r.acc(t, j))) continue;
      s += std::to_string(t) + "," + std::to_string(j) + "," + detail::fmt(r.acc(t, j)) + "," + r.selection_mode + "\n";
    }
  }
  return s;
}

/// Executes every configured method. The manifest is marked complete only
/// after all outputs are written; a failure leaves it "incomplete" with the error.
inline RunResult run_experiment(const ExperimentConfig& cfg, const std::string& code_version, const LogFn& log = {}) {
  cfg.model.validate();
  cfg.training.validate();
  const fs::path dir = resolve_output_dir(cfg.output_dir);
  fs::create_directories(dir);

  json manifest = {{"status", "incomplete"},
                   {"config", to_json(cfg)},
                   {"seed", cfg.seed},
                   {"code_version", code_version},
                   {"csv_schema_version", kCsvSchemaVersion},
                   {"outputs", json::array()}};
  auto write_manifest = [&] { detail::write_file(dir / "manifest.json", manifest.dump(2) + "\n"); };
  write_manifest();
  fs::remove(dir / "summary.csv");

  RunResult result{dir.string(), {}};
  try {
    const LabeledDataset<double> data = build_dataset(cfg);
    const SplitSpec split = effective_split(cfg);
    const TaskStream<double> stream = split_classes(data, split);
    if (cfg.split.source == DataSource::image_folder) {
      write_split_manifest((dir / "split_manifest.csv").string(), data, split);
      manifest["outputs"].push_back("split_manifest.csv");
    }

    json reports = json::array();
    for (Method m : cfg.methods) {
      if (log) log("running " + to_string(m) + " (seed " + std::to_string(cfg.seed) + ")");
      ContinualReport report;
      if (m == Method::incprompt) {
        IncPromptModel<double> model(cfg.model, stream.total_classes(), cfg.seed);
        report = run_incprompt(model, stream, cfg.training, cfg.eval_mode);
        save_checkpoint((dir / "checkpoint.bin").string(), model);
        manifest["outputs"].push_back("checkpoint.bin");
      } else {
        report = run_baseline(stream, m == Method::ftseq ? BaselineMode::ftseq : BaselineMode::upper_bound, cfg.model,
                              cfg.training, cfg.seed);
      }
      const std::string per_task = "per_task_" + report.method + ".csv";
      detail::write_file(dir / per_task, per_task_csv(report));
      manifest["outputs"].push_back(per_task);
      reports.push_back(detail::report_json(report));
      if (log) {
        log(report.method + ": avg_acc " + detail::fmt(report.avg_acc) + ", forgetting " +
            (report.forgetting_defined ? detail::fmt(report.forgetting) : std::string("NA")));
      }
      result.reports.push_back(std::move(report));
    }
    detail::write_file(dir / "report.json", reports.dump(2) + "\n");
    manifest["outputs"].push_back("report.json");

    std::string summary = summary_header();
    for (const auto& r : result.reports) summary += summary_row(r, cfg.model);
    detail::write_file(dir / "summary.csv", summary);
    manifest["outputs"].push_back("summary.csv");
  } catch (const std::exception& e) {
    manifest["error"] = e.what();
    write_manifest();
    throw;
  }
  manifest["status"] = "complete";
  write_manifest();
  return result;
}

enum class SweepAxis { prompt_depth, prompt_length };

inline std::string to_string(SweepAxis a) { return a == SweepAxis::prompt_depth ? "prompt_depth" : "prompt_length"; }

inline SweepAxis sweep_axis_from_string(const std::string& s) {
  if (s == "prompt_depth" || s == "depth") return SweepAxis::prompt_depth;
  if (s == "prompt_length" || s == "length") return SweepAxis::prompt_length;
  throw ConfigError("unknown sweep axis '" + s + "' (expected prompt_depth or prompt_length)");
}

struct SweepPoint {
  int value = 0;
  double avg_acc = 0;
  double forgetting = 0;
  bool forgetting_defined = false;
};

struct SweepResult {
  std::string output_dir;
  std::vector<SweepPoint> points;
};

/// Configuration of one sweep point: the prompted method only, with the swept
/// schedule, written to its own subdirectory.
inline ExperimentConfig sweep_point_config(const ExperimentConfig& base, SweepAxis axis, int value,
                                           const std::string& sweep_dir) {
  ExperimentConfig c = base;
  c.methods = {Method::incprompt};
  const int layers = c.model.backbone.num_layers;
  if (axis == SweepAxis::prompt_depth) {
    if (value < 0 || value > layers) {
      throw ConfigValidationError({{"sweep.values", "depth " + std::to_string(value) + " outside [0, " +
                                                        std::to_string(layers) + "]", 0}});
    }
    c.model.schedule = PromptSchedule::first_layers(value, c.model.schedule.prompt_length);
  } else {
    if (value < 0) throw ConfigValidationError({{"sweep.values", "prompt length must be >= 0", 0}});
    c.model.schedule.prompt_length = value;
  }
  c.output_dir = (fs::path(sweep_dir) / (to_string(axis) + "_" + std::to_string(value))).string();
  return c;
}

/// One run per value (same seed), optionally `jobs` at a time; aggregates into
/// sweep.csv and a line plot once every point has finished.
inline SweepResult run_sweep(const ExperimentConfig& base, SweepAxis axis, const std::vector<int>& values,
                             const std::string& code_version, int jobs = 1, const LogFn& log = {}) {
  if (values.empty()) throw ConfigValidationError({{"sweep.values", "at least one value is required", 0}});
  const fs::path dir = fs::path(resolve_output_dir(base.output_dir)) / ("sweep_" + to_string(axis));
  std::vector<ExperimentConfig> configs;
  // Point directories are already resolved; keep the env root from applying twice.
  for (int v : values) configs.push_back(sweep_point_config(base, axis, v, fs::absolute(dir).string()));
  fs::create_directories(dir);

  std::vector<SweepPoint> points(values.size());
  std::mutex log_mutex;
  LogFn safe_log;
  if (log) {
    safe_log = [&](const std::string& m) {
      std::lock_guard<std::mutex> lock(log_mutex);
      log(m);
    };
  }
  auto run_point = [&](std::size_t i) {
    if (safe_log) safe_log(to_string(axis) + " = " + std::to_string(values[i]));
    const RunResult r = run_experiment(configs[i], code_version);
    const auto& rep = r.reports.front();
    points[i] = {values[i], rep.avg_acc, rep.forgetting, rep.forgetting_defined};
    if (safe_log) safe_log(to_string(axis) + " = " + std::to_string(values[i]) + ": avg_acc " + detail::fmt(rep.avg_acc));
  };
  const std::size_t workers = static_cast<std::size_t>(std::max(1, jobs));
  for (std::size_t start = 0; start < values.size(); start += workers) {
    std::vector<std::future<void>> batch;
    for (std::size_t i = start; i < std::min(values.size(), start + workers); ++i) {
      batch.push_back(std::async(workers > 1 ? std::launch::async : std::launch::deferred, run_point, i));
    }
    for (auto& f : batch) f.get();
  }

  std::string csv = "axis_value,avg_acc,forgetting,seed\n";
  std::vector<std::string> xs;
  plot::Series acc{"avg_acc", {}, "#1f77b4"}, forg{"forgetting", {}, "#d62728"};
  for (const auto& p : points) {
    csv += std::to_string(p.value) + "," + detail::fmt(p.avg_acc) + "," +
           (p.forgetting_defined ? detail::fmt(p.forgetting) : std::string("NA")) + "," + std::to_string(base.seed) +
           "\n";
    xs.push_back(std::to_string(p.value));
    acc.y.push_back(p.avg_acc);
    forg.y.push_back(p.forgetting_defined ? p.forgetting : std::numeric_limits<double>::quiet_NaN());
  }
  detail::write_file(dir / "sweep.csv", csv);
  detail::write_file(dir / ("sweep_" + to_string(axis) + ".svg"),
                     plot::line_chart("accuracy vs " + to_string(axis), to_string(axis), xs, {acc, forg}));
  return {dir.string(), points};
}

struct HistogramReport {
  std::vector<std::vector<long>> counts;
  std::string csv_path;
  std::string image_path;
};

/// Renders the (true task, selected prompter) counts of a completed prompted run.
inline HistogramReport report_selection_histogram(const std::string& run_dir) {
  const fs::path dir = run_dir;
  if (!fs::exists(dir / "manifest.json")) throw std::runtime_error("no run found in '" + run_dir + "'");
  const json manifest = detail::read_json(dir / "manifest.json");
  if (manifest.value("status", "") != "complete") throw std::runtime_error("run in '" + run_dir + "' is incomplete");
  const json reports = detail::read_json(dir / "report.json");
  const json* found = nullptr;
  for (const auto& r : reports) {
    if (r.at("method") == "incprompt") found = &r;
  }
  if (found == nullptr) throw std::runtime_error("run in '" + run_dir + "' has no incprompt result");

  HistogramReport out;
  out.counts = found->at("histogram").get<std::vector<std::vector<long>>>();
  std::string csv = "true_task,selected_task,count\n";
  for (std::size_t t = 0; t < out.counts.size(); ++t) {
    for (std::size_t s = 0; s < out.counts[t].size(); ++s) {
      csv += std::to_string(t) + "," + std::to_string(s) + "," + std::to_string(out.counts[t][s]) + "\n";
    }
  }
  out.csv_path = (dir / "selection_histogram.csv").string();
  out.image_path = (dir / "selection_histogram.svg").string();
  detail::write_file(out.csv_path, csv);
  detail::write_file(out.image_path, plot::selection_bars("prompter selection per task", out.counts));
  return out;
}

}  // namespace incprompt
