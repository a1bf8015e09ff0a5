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

// Command-line front end: run, sweep, report, validate-config.
//
// Configuration precedence (highest first): dedicated flags (--seed,
// --output-dir), --set path=value overrides, the config file, built-in
// defaults. Relative output directories are placed under
// $INCPROMPT_OUTPUT_ROOT when it is set.
//
// Exit codes: 0 success, 2 configuration error, 3 runtime failure.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "incprompt/config.hpp"
#include "incprompt/experiment.hpp"

#ifndef INCPROMPT_CODE_VERSION
#define INCPROMPT_CODE_VERSION "unknown"
#endif

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct Overrides {
  std::vector<std::string> set;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
};

incprompt::ExperimentConfig load(const std::string& path, const Overrides& o) {
  const std::string text = incprompt::read_text_file(path);
  incprompt::json root;
  try {
    root = incprompt::json::parse(text);
  } catch (const incprompt::json::parse_error&) {
    return incprompt::parse_config_text(text);  // rethrows with line and column
  }
  if (!root.is_object()) throw incprompt::ConfigValidationError({{"", "top level must be an object", 1}});
  for (const auto& s : o.set) incprompt::apply_override(root, s);
  if (o.seed) root["seed"] = *o.seed;
  if (o.output_dir) root["output_dir"] = *o.output_dir;
  return incprompt::parse_config(root, text);
}

void add_overrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--set", o.set, "Override a config field, e.g. --set schedule.prompt_length=8");
  cmd->add_option("--seed", o.seed, "Override the seed");
  cmd->add_option("--output-dir", o.output_dir, "Override the output directory");
}

template <typename F>
int guarded(F&& f) {
  try {
    f();
    return kExitOk;
  } catch (const incprompt::ConfigValidationError& e) {
    for (const auto& i : e.issues()) std::cerr << "config error: " << i.str() << "\n";
    return kExitConfig;
  } catch (const incprompt::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

void log_line(const std::string& m) { std::cerr << m << "\n"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rehearsal-free continual learning with per-task prompters and key learners"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(INCPROMPT_CODE_VERSION));

  Overrides run_o, sweep_o, check_o;
  std::string run_cfg, sweep_cfg, check_cfg, report_dir, axis;
  std::vector<int> values;
  int jobs = 1;

  auto* run = app.add_subcommand("run", "Train and evaluate the configured methods");
  run->add_option("config", run_cfg, "Config file (JSON)")->required();
  add_overrides(run, run_o);

  auto* sweep = app.add_subcommand("sweep", "Sweep prompt depth or prompt length");
  sweep->add_option("config", sweep_cfg, "Config file (JSON)")->required();
  sweep->add_option("--axis", axis, "prompt_depth or prompt_length")->required();
  sweep->add_option("--values", values, "Comma-separated axis values")->required()->delimiter(',');
  sweep->add_option("--jobs", jobs, "Sweep points run concurrently")->check(CLI::PositiveNumber);
  add_overrides(sweep, sweep_o);

  auto* report = app.add_subcommand("report", "Render the prompter-selection histogram of a run");
  report->add_option("run_dir", report_dir, "Output directory of a completed run")->required();

  auto* check = app.add_subcommand("validate-config", "Validate a config file and print its resolved form");
  check->add_option("config", check_cfg, "Config file (JSON)")->required();
  add_overrides(check, check_o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  if (*run) {
    return guarded([&] {
      const auto cfg = load(run_cfg, run_o);
      const auto result = incprompt::run_experiment(cfg, INCPROMPT_CODE_VERSION, log_line);
      std::cout << result.output_dir << "\n";
    });
  }
  if (*sweep) {
    return guarded([&] {
      const auto a = incprompt::sweep_axis_from_string(axis);
      const auto cfg = load(sweep_cfg, sweep_o);
      const auto result = incprompt::run_sweep(cfg, a, values, INCPROMPT_CODE_VERSION, jobs, log_line);
      std::cout << result.output_dir << "\n";
    });
  }
  if (*report) {
    return guarded([&] {
      const auto h = incprompt::report_selection_histogram(report_dir);
      std::cout << h.csv_path << "\n" << h.image_path << "\n";
    });
  }
  return guarded([&] {
    const auto cfg = load(check_cfg, check_o);
    std::cout << incprompt::to_json(cfg).dump(2) << "\n";
  });
}
