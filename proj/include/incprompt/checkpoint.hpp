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

// Binary checkpoint of a trained prompted model.
//
// Layout (little-endian):
//   8 bytes   magic "INCPCKPT"
//   u32       format version
//   u64       header length H
//   H bytes   JSON header: config, seed, task classes, tensor table
//   payload   float64 values of every tensor, row-major, in table order

#pragma once

#include <nlohmann/json.hpp>

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "incprompt/config.hpp"
#include "incprompt/trainer.hpp"

namespace incprompt {

inline constexpr char kCheckpointMagic[8] = {'I', 'N', 'C', 'P', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename Scalar, typename Fn>
void for_each_model_parameter(IncPromptModel<Scalar>& model, Fn&& fn) {
  model.backbone().for_each_parameter(fn);
  for (auto& l : model.learners()) l.for_each_parameter(fn);
  for (auto& p : model.prompters()) p.for_each_parameter(fn);
  fn(model.head().weight());
}

inline json model_config_json(const ModelConfig& m) {
  ExperimentConfig e;
  e.model = m;
  json full = to_json(e);
  return {{"backbone", full["backbone"]}, {"schedule", full["schedule"]}, {"key_loss", full["key_loss"]},
          {"model", full["model"]}};
}

inline ModelConfig model_config_from_json(const json& j) { return parse_config(j).model; }

}  // namespace detail

/// Writes every module of `model`, plus `total_classes` and the per-task class ids.
template <typename Scalar>
void save_checkpoint(const std::string& path, IncPromptModel<Scalar>& model) {
  json tensors = json::array();
  std::vector<const Parameter<Scalar>*> params;
  detail::for_each_model_parameter(model, [&](Parameter<Scalar>& p) {
    tensors.push_back({{"name", p.name}, {"rows", p.value.rows()}, {"cols", p.value.cols()}});
    params.push_back(&p);
  });
  json tasks = json::array();
  const auto& cols = model.head().column_class();
  const auto& first = model.task_first_column();
  for (std::size_t t = 0; t < first.size(); ++t) {
    const std::size_t end = t + 1 < first.size() ? static_cast<std::size_t>(first[t + 1]) : cols.size();
    tasks.push_back(std::vector<int>(cols.begin() + first[t], cols.begin() + static_cast<std::ptrdiff_t>(end)));
  }
  const json header = {{"config", detail::model_config_json(model.config())},
                       {"seed", model.seed()},
                       {"total_classes", model.head().capacity()},
                       {"task_classes", tasks},
                       {"tensors", tensors}};
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("checkpoint: cannot write '" + path + "'");
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  const std::uint32_t version = kCheckpointVersion;
  const std::uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&version), sizeof version);
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto* p : params) {
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      const double v = static_cast<double>(p->value.data()[i]);
      out.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
  }
  if (!out) throw CheckpointError("checkpoint: write failed for '" + path + "'");
}

/// Rebuilds a model from a checkpoint written by save_checkpoint.
template <typename Scalar>
IncPromptModel<Scalar> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("checkpoint: cannot read '" + path + "'");
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) {
    throw CheckpointError("checkpoint: '" + path + "' is not a checkpoint");
  }
  std::uint32_t version = 0;
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  if (!in || version != kCheckpointVersion) {
    throw CheckpointError("checkpoint: unsupported version " + std::to_string(version));
  }
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in || len > (std::uint64_t{1} << 30)) throw CheckpointError("checkpoint: corrupt header length");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw CheckpointError("checkpoint: truncated header");
  json header;
  try {
    header = json::parse(text);
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("checkpoint: bad header: ") + e.what());
  }

  IncPromptModel<Scalar> model(detail::model_config_from_json(header.at("config")), header.at("total_classes").get<int>(),
                               header.at("seed").get<std::uint64_t>());
  int t = 0;
  for (const auto& classes : header.at("task_classes")) model.begin_task(t++, classes.get<std::vector<int>>());
  // Every module trained so far is restored frozen.
  for (auto& l : model.learners()) l.set_trainable(false);
  for (auto& p : model.prompters()) p.set_trainable(false);

  const auto& table = header.at("tensors");
  std::size_t k = 0;
  detail::for_each_model_parameter(model, [&](Parameter<Scalar>& p) {
    if (k >= table.size()) throw CheckpointError("checkpoint: missing tensor " + p.name);
    const auto& e = table[k++];
    if (e.at("name").get<std::string>() != p.name || e.at("rows").get<Eigen::Index>() != p.value.rows() ||
        e.at("cols").get<Eigen::Index>() != p.value.cols()) {
      throw CheckpointError("checkpoint: tensor table mismatch at " + p.name);
    }
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
      double v = 0;
      in.read(reinterpret_cast<char*>(&v), sizeof v);
      p.value.data()[i] = static_cast<Scalar>(v);
    }
    if (!in) throw CheckpointError("checkpoint: truncated payload at " + p.name);
  });
  if (k != table.size()) throw CheckpointError("checkpoint: unexpected extra tensors");
  return model;
}

}  // namespace incprompt
