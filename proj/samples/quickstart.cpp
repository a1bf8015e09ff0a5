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

// Trains the prompted model on a small synthetic class-incremental stream and
// prints the accuracy matrix.

#include <cstdio>

#include "incprompt/incprompt.hpp"

int main() {
  using namespace incprompt;
  const auto stream = synthetic_gaussian_tasks<double>(3, 2, 16, 60, 30.0, /*seed=*/1, /*test_per_class=*/40);

  ModelConfig cfg;
  cfg.backbone.num_layers = 2;
  cfg.schedule = PromptSchedule::first_layers(2, 4);
  IncPromptModel<double> model(cfg, stream.total_classes(), /*seed=*/1);

  TrainingConfig train;
  train.epochs = 3;
  const ContinualReport r = run_incprompt(model, stream, train);

  for (int t = 0; t < r.num_tasks(); ++t) {
    for (int j = 0; j <= t; ++j) std::printf("%6.3f ", r.acc(t, j));
    std::printf("\n");
  }
  std::printf("avg_acc %.3f  forgetting %.3f\n", r.avg_acc, r.forgetting);
}
