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

// Experiment configuration: JSON file <-> ExperimentConfig, with strict
// validation. Every problem is reported with its field path and, when the
// key can be located in the source text, its line number.

#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "incprompt/backbone.hpp"
#include "incprompt/core/errors.hpp"
#include "incprompt/data.hpp"
#include "incprompt/key_learner.hpp"
#include "incprompt/prompter.hpp"
#include "incprompt/trainer.hpp"

namespace incprompt {

using json = nlohmann::json;

enum class Method { incprompt, ftseq, upper_bound };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::incprompt: return "incprompt";
    case Method::ftseq: return "ftseq";
    case Method::upper_bound: return "upper_bound";
  }
  return "?";
}

struct SyntheticSource {
  int dim = 16;
  int train_per_class = 200;
  int test_per_class = 100;
  double separation = 30.0;
  double noise = 1.0;
};

struct ExperimentConfig {
  std::vector<Method> methods{Method::incprompt, Method::ftseq, Method::upper_bound};
  std::uint64_t seed = 0;
  std::string output_dir = "runs/default";
  ModelConfig model;
  TrainingConfig training;
  SplitSpec split;
  bool shuffle_seed_set = false;  // otherwise the split follows `seed`
  SyntheticSource synthetic;
  std::string image_root;
  EvalMode eval_mode = EvalMode::matched;

  std::uint64_t effective_shuffle_seed() const { return shuffle_seed_set ? split.shuffle_seed : seed; }
};

/// One validation problem.
struct ConfigIssue {
  std::string field;
  std::string message;
  int line = 0;  // 0 when unknown

  std::string str() const {
    std::string s = field.empty() ? message : field + ": " + message;
    if (line > 0) s = "line " + std::to_string(line) + ": " + s;
    return s;
  }
};

/// Raised when a configuration is invalid; carries every issue found.
class ConfigValidationError : public ConfigError {
 public:
  explicit ConfigValidationError(std::vector<ConfigIssue> issues)
      : ConfigError(join(issues)), issues_(std::move(issues)) {}
  const std::vector<ConfigIssue>& issues() const { return issues_; }

 private:
  static std::string join(const std::vector<ConfigIssue>& issues) {
    std::string s;
    for (const auto& i : issues) s += (s.empty() ? "" : "\n") + i.str();
    return s;
  }
  std::vector<ConfigIssue> issues_;
};

namespace detail {

/// Walks a JSON object, recording type errors and unknown keys.
class ConfigReader {
 public:
  explicit ConfigReader(std::string source) : source_(std::move(source)) {}

  std::vector<ConfigIssue>& issues() { return issues_; }

  void issue(const std::string& path, const std::string& message) {
    issues_.push_back({path, message, line_of(path)});
  }

  bool object(const json& j, const std::string& path, const std::set<std::string>& allowed) {
    if (!j.is_object()) {
      issue(path, "must be an object");
      return false;
    }
    for (const auto& [k, v] : j.items()) {
      if (!allowed.count(k)) issue(join(path, k), "unknown field");
    }
    return true;
  }

  template <typename T>
  void integer(const json& j, const std::string& path, const std::string& key, T& out) {
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    if (!v.is_number_integer()) {
      issue(join(path, key), "must be an integer");
      return;
    }
    if constexpr (std::is_unsigned_v<T>) {
      if (v.is_number_unsigned() || v.template get<long long>() >= 0) {
        out = v.template get<T>();
      } else {
        issue(join(path, key), "must be >= 0");
      }
    } else {
      out = v.template get<T>();
    }
  }

  void number(const json& j, const std::string& path, const std::string& key, double& out) {
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    if (!v.is_number()) {
      issue(join(path, key), "must be a number");
      return;
    }
    out = v.get<double>();
  }

  void boolean(const json& j, const std::string& path, const std::string& key, bool& out) {
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    if (!v.is_boolean()) {
      issue(join(path, key), "must be true or false");
      return;
    }
    out = v.get<bool>();
  }

  template <typename T, typename Parse>
  void enumeration(const json& j, const std::string& path, const std::string& key, T& out, Parse parse) {
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    if (!v.is_string()) {
      issue(join(path, key), "must be a string");
      return;
    }
    try {
      out = parse(v.get<std::string>());
    } catch (const ConfigError& e) {
      issue(join(path, key), e.what());
    }
  }

  static std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }

  /// Line of the first occurrence of the last key of `path`, searching after its parents.
  int line_of(const std::string& path) const {
    if (source_.empty() || path.empty()) return 0;
    std::size_t pos = 0;
    std::stringstream ss(path);
    std::string part;
    bool found = false;
    while (std::getline(ss, part, '.')) {
      const std::size_t p = source_.find('"' + part + '"', pos);
      if (p == std::string::npos) break;
      pos = p;
      found = true;
    }
    if (!found) return 0;
    return 1 + static_cast<int>(std::count(source_.begin(), source_.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
  }

 private:
  std::string source_;
  std::vector<ConfigIssue> issues_;
};

inline Method method_from_string(const std::string& s) {
  if (s == "incprompt") return Method::incprompt;
  if (s == "ftseq") return Method::ftseq;
  if (s == "upper_bound") return Method::upper_bound;
  throw ConfigError("unknown method '" + s + "' (expected incprompt, ftseq or upper_bound)");
}

inline EvalMode eval_mode_from_string(const std::string& s) {
  if (s == "matched") return EvalMode::matched;
  if (s == "oracle") return EvalMode::oracle;
  throw ConfigError("unknown eval_mode '" + s + "'");
}

}  // namespace detail

/// Parses and validates a configuration document. `source` is the original
/// text, used only to attach line numbers to diagnostics.
inline ExperimentConfig parse_config(const json& root, const std::string& source = "") {
  detail::ConfigReader r(source);
  ExperimentConfig cfg;
  if (!r.object(root, "", {"method", "seed", "output_dir", "backbone", "schedule", "key_loss", "model", "split",
                           "synthetic", "image_folder", "optimizer", "eval_mode"})) {
    throw ConfigValidationError(r.issues());
  }

  if (root.contains("method")) {
    const auto& m = root.at("method");
    std::vector<json> items = m.is_array() ? std::vector<json>(m.begin(), m.end()) : std::vector<json>{m};
    cfg.methods.clear();
    for (const auto& item : items) {
      if (!item.is_string()) {
        r.issue("method", "must be a method name or a list of method names");
        continue;
      }
      try {
        const Method mm = detail::method_from_string(item.get<std::string>());
        if (std::find(cfg.methods.begin(), cfg.methods.end(), mm) != cfg.methods.end()) {
          r.issue("method", "duplicate method '" + item.get<std::string>() + "'");
        }
        cfg.methods.push_back(mm);
      } catch (const ConfigError& e) {
        r.issue("method", e.what());
      }
    }
    if (items.empty()) r.issue("method", "at least one method is required");
  }
  r.integer(root, "", "seed", cfg.seed);
  if (root.contains("output_dir")) {
    if (root.at("output_dir").is_string()) {
      cfg.output_dir = root.at("output_dir").get<std::string>();
    } else {
      r.issue("output_dir", "must be a string");
    }
  }
  r.enumeration(root, "", "eval_mode", cfg.eval_mode, detail::eval_mode_from_string);

  auto& bb = cfg.model.backbone;
  if (root.contains("backbone") && r.object(root.at("backbone"), "backbone",
                                            {"image_size", "patch_size", "channels", "embed_dim", "num_layers",
                                             "num_heads", "mlp_ratio", "frozen"})) {
    const auto& j = root.at("backbone");
    r.integer(j, "backbone", "image_size", bb.image_size);
    r.integer(j, "backbone", "patch_size", bb.patch_size);
    r.integer(j, "backbone", "channels", bb.channels);
    r.integer(j, "backbone", "embed_dim", bb.embed_dim);
    r.integer(j, "backbone", "num_layers", bb.num_layers);
    r.integer(j, "backbone", "num_heads", bb.num_heads);
    r.number(j, "backbone", "mlp_ratio", bb.mlp_ratio);
    r.boolean(j, "backbone", "frozen", bb.frozen);
  }
  if (bb.image_size <= 0) r.issue("backbone.image_size", "must be positive");
  if (bb.patch_size <= 0) r.issue("backbone.patch_size", "must be positive");
  if (bb.image_size > 0 && bb.patch_size > 0 && bb.image_size % bb.patch_size != 0) {
    r.issue("backbone.patch_size", "must divide image_size");
  }
  if (bb.channels <= 0) r.issue("backbone.channels", "must be positive");
  if (bb.embed_dim <= 0) r.issue("backbone.embed_dim", "must be positive");
  if (bb.num_heads <= 0) r.issue("backbone.num_heads", "must be positive");
  if (bb.embed_dim > 0 && bb.num_heads > 0 && bb.embed_dim % bb.num_heads != 0) {
    r.issue("backbone.num_heads", "must divide embed_dim");
  }
  if (bb.num_layers < 1) r.issue("backbone.num_layers", "must be >= 1");
  if (!(bb.mlp_ratio > 0)) r.issue("backbone.mlp_ratio", "must be positive");
  if (!bb.frozen) r.issue("backbone.frozen", "the prompted model requires a frozen backbone");

  // Default schedule: every layer.
  cfg.model.schedule = PromptSchedule::first_layers(bb.num_layers > 0 ? bb.num_layers : 0, 4);
  if (root.contains("schedule") && r.object(root.at("schedule"), "schedule", {"layers", "depth", "prompt_length"})) {
    const auto& j = root.at("schedule");
    if (j.contains("layers") && j.contains("depth")) r.issue("schedule", "give either layers or depth, not both");
    if (j.contains("layers")) {
      const auto& l = j.at("layers");
      if (!l.is_array()) {
        r.issue("schedule.layers", "must be a list of layer indices");
      } else {
        cfg.model.schedule.layers.clear();
        for (const auto& v : l) {
          if (!v.is_number_integer()) {
            r.issue("schedule.layers", "must contain integers");
          } else {
            cfg.model.schedule.layers.push_back(v.get<int>());
          }
        }
      }
    }
    if (j.contains("depth")) {
      int depth = 0;
      r.integer(j, "schedule", "depth", depth);
      if (depth < 0 || depth > bb.num_layers) {
        r.issue("schedule.depth", "must be in [0, num_layers]");
      } else {
        cfg.model.schedule = PromptSchedule::first_layers(depth, cfg.model.schedule.prompt_length);
      }
    }
    r.integer(j, "schedule", "prompt_length", cfg.model.schedule.prompt_length);
  }
  if (cfg.model.schedule.prompt_length < 0) r.issue("schedule.prompt_length", "must be >= 0");
  {
    std::set<int> seen;
    for (int l : cfg.model.schedule.layers) {
      if (l < 0 || l >= bb.num_layers) r.issue("schedule.layers", "layer " + std::to_string(l) + " out of range");
      if (!seen.insert(l).second) r.issue("schedule.layers", "duplicate layer " + std::to_string(l));
    }
  }

  if (root.contains("key_loss") && r.object(root.at("key_loss"), "key_loss", {"margin", "lambda_reg"})) {
    r.number(root.at("key_loss"), "key_loss", "margin", cfg.model.key_loss.margin);
    r.number(root.at("key_loss"), "key_loss", "lambda_reg", cfg.model.key_loss.lambda_reg);
  }
  if (!(std::isfinite(cfg.model.key_loss.margin) && cfg.model.key_loss.margin >= 0)) {
    r.issue("key_loss.margin", "must be finite and >= 0");
  }
  if (!(std::isfinite(cfg.model.key_loss.lambda_reg) && cfg.model.key_loss.lambda_reg >= 0)) {
    r.issue("key_loss.lambda_reg", "must be finite and >= 0");
  }

  if (root.contains("model") && r.object(root.at("model"), "model",
                                         {"key_dim", "key_pool", "similarity", "prompter_hidden", "activation",
                                          "head_pool"})) {
    const auto& j = root.at("model");
    r.integer(j, "model", "key_dim", cfg.model.key_dim);
    r.enumeration(j, "model", "key_pool", cfg.model.key_pool, pool_mode_from_string);
    r.enumeration(j, "model", "similarity", cfg.model.similarity, similarity_from_string);
    r.integer(j, "model", "prompter_hidden", cfg.model.prompter_hidden);
    r.enumeration(j, "model", "activation", cfg.model.activation, activation_from_string);
    r.enumeration(j, "model", "head_pool", cfg.model.head_pool, pool_mode_from_string);
  }
  if (cfg.model.key_dim < 0) r.issue("model.key_dim", "must be >= 0");
  if (cfg.model.key_dim > 0 && cfg.model.key_dim != bb.embed_dim) r.issue("model.key_dim", "must equal embed_dim");
  if (cfg.model.prompter_hidden < 0) r.issue("model.prompter_hidden", "must be >= 0");

  if (root.contains("split") && r.object(root.at("split"), "split",
                                         {"num_tasks", "classes_per_task", "shuffle_seed", "source"})) {
    const auto& j = root.at("split");
    r.integer(j, "split", "num_tasks", cfg.split.num_tasks);
    r.integer(j, "split", "classes_per_task", cfg.split.classes_per_task);
    if (j.contains("shuffle_seed")) {
      r.integer(j, "split", "shuffle_seed", cfg.split.shuffle_seed);
      cfg.shuffle_seed_set = true;
    }
    r.enumeration(j, "split", "source", cfg.split.source, data_source_from_string);
  }
  if (cfg.split.num_tasks < 1) r.issue("split.num_tasks", "must be >= 1");
  if (cfg.split.classes_per_task < 1) r.issue("split.classes_per_task", "must be >= 1");

  if (root.contains("synthetic") && r.object(root.at("synthetic"), "synthetic",
                                             {"dim", "train_per_class", "test_per_class", "separation", "noise"})) {
    const auto& j = root.at("synthetic");
    r.integer(j, "synthetic", "dim", cfg.synthetic.dim);
    r.integer(j, "synthetic", "train_per_class", cfg.synthetic.train_per_class);
    r.integer(j, "synthetic", "test_per_class", cfg.synthetic.test_per_class);
    r.number(j, "synthetic", "separation", cfg.synthetic.separation);
    r.number(j, "synthetic", "noise", cfg.synthetic.noise);
  }
  if (cfg.synthetic.dim < 1) r.issue("synthetic.dim", "must be >= 1");
  if (cfg.synthetic.train_per_class < 1) r.issue("synthetic.train_per_class", "must be >= 1");
  if (cfg.synthetic.test_per_class < 1) r.issue("synthetic.test_per_class", "must be >= 1");
  if (!(std::isfinite(cfg.synthetic.separation) && cfg.synthetic.separation > 0)) {
    r.issue("synthetic.separation", "must be > 0");
  }
  if (!(std::isfinite(cfg.synthetic.noise) && cfg.synthetic.noise > 0)) r.issue("synthetic.noise", "must be > 0");

  if (root.contains("image_folder") && r.object(root.at("image_folder"), "image_folder", {"root"})) {
    const auto& j = root.at("image_folder");
    if (j.contains("root")) {
      if (j.at("root").is_string()) {
        cfg.image_root = j.at("root").get<std::string>();
      } else {
        r.issue("image_folder.root", "must be a string");
      }
    }
  }
  if (cfg.split.source == DataSource::image_folder && cfg.image_root.empty()) {
    r.issue("image_folder.root", "required when split.source is image-folder");
  }

  if (root.contains("optimizer") && r.object(root.at("optimizer"), "optimizer",
                                             {"learning_rate", "batch_size", "epochs", "reduction",
                                              "mask_current_task", "baseline_train_backbone"})) {
    const auto& j = root.at("optimizer");
    r.number(j, "optimizer", "learning_rate", cfg.training.learning_rate);
    r.integer(j, "optimizer", "batch_size", cfg.training.batch_size);
    r.integer(j, "optimizer", "epochs", cfg.training.epochs);
    r.enumeration(j, "optimizer", "reduction", cfg.training.reduction, reduction_from_string);
    r.boolean(j, "optimizer", "mask_current_task", cfg.training.mask_current_task);
    r.boolean(j, "optimizer", "baseline_train_backbone", cfg.training.baseline_train_backbone);
  }
  if (!(std::isfinite(cfg.training.learning_rate) && cfg.training.learning_rate > 0)) {
    r.issue("optimizer.learning_rate", "must be > 0");
  }
  if (cfg.training.batch_size < 1) r.issue("optimizer.batch_size", "must be >= 1");
  if (cfg.training.epochs < 0) r.issue("optimizer.epochs", "must be >= 0");

  if (!r.issues().empty()) throw ConfigValidationError(r.issues());
  return cfg;
}

/// Parses JSON text; syntax errors are reported with their line and column.
inline ExperimentConfig parse_config_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t byte = e.byte > 0 ? e.byte - 1 : 0;
    const std::size_t upto = std::min(byte, text.size());
    const int line = 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n'));
    const std::size_t nl = text.rfind('\n', upto == 0 ? 0 : upto - 1);
    const int col = static_cast<int>(upto - (nl == std::string::npos ? 0 : nl + 1)) + 1;
    throw ConfigValidationError({{"", "syntax error at column " + std::to_string(col) + ": " + e.what(), line}});
  }
  return parse_config(root, text);
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigValidationError({{"", "cannot read config file '" + path + "'", 0}});
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline ExperimentConfig load_config(const std::string& path) { return parse_config_text(read_text_file(path)); }

/// Canonical JSON form of a configuration (every field, defaults included).
inline json to_json(const ExperimentConfig& c) {
  json methods = json::array();
  for (Method m : c.methods) methods.push_back(to_string(m));
  const auto& bb = c.model.backbone;
  json j;
  j["method"] = methods;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  j["eval_mode"] = to_string(c.eval_mode);
  j["backbone"] = {{"image_size", bb.image_size}, {"patch_size", bb.patch_size}, {"channels", bb.channels},
                   {"embed_dim", bb.embed_dim},   {"num_layers", bb.num_layers}, {"num_heads", bb.num_heads},
                   {"mlp_ratio", bb.mlp_ratio},   {"frozen", bb.frozen}};
  j["schedule"] = {{"layers", c.model.schedule.layers}, {"prompt_length", c.model.schedule.prompt_length}};
  j["key_loss"] = {{"margin", c.model.key_loss.margin}, {"lambda_reg", c.model.key_loss.lambda_reg}};
  j["model"] = {{"key_dim", c.model.key_dim},
                {"key_pool", to_string(c.model.key_pool)},
                {"similarity", to_string(c.model.similarity)},
                {"prompter_hidden", c.model.prompter_hidden},
                {"activation", to_string(c.model.activation)},
                {"head_pool", to_string(c.model.head_pool)}};
  j["split"] = {{"num_tasks", c.split.num_tasks},
                {"classes_per_task", c.split.classes_per_task},
                {"shuffle_seed", c.effective_shuffle_seed()},
                {"source", to_string(c.split.source)}};
  j["synthetic"] = {{"dim", c.synthetic.dim},
                    {"train_per_class", c.synthetic.train_per_class},
                    {"test_per_class", c.synthetic.test_per_class},
                    {"separation", c.synthetic.separation},
                    {"noise", c.synthetic.noise}};
  j["image_folder"] = {{"root", c.image_root}};
  j["optimizer"] = {{"learning_rate", c.training.learning_rate},
                    {"batch_size", c.training.batch_size},
                    {"epochs", c.training.epochs},
                    {"reduction", to_string(c.training.reduction)},
                    {"mask_current_task", c.training.mask_current_task},
                    {"baseline_train_backbone", c.training.baseline_train_backbone}};
  return j;
}

/// Applies a `dotted.path=value` override; `value` is parsed as JSON, falling back to a string.
inline void apply_override(json& root, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigValidationError({{"", "override '" + assignment + "' must look like path=value", 0}});
  }
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  json* node = &root;
  std::stringstream ss(path);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->is_object()) throw ConfigValidationError({{path, "cannot descend into a non-object", 0}});
    node = &(*node)[parts[i]];
    if (node->is_null()) *node = json::object();
  }
  if (!node->is_object()) throw ConfigValidationError({{path, "cannot descend into a non-object", 0}});
  (*node)[parts.back()] = value;
}

}  // namespace incprompt
