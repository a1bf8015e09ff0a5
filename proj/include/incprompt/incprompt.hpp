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

#pragma once

#include "incprompt/attention.hpp"
#include "incprompt/backbone.hpp"
#include "incprompt/core/adam.hpp"
#include "incprompt/core/errors.hpp"
#include "incprompt/core/ops.hpp"
#include "incprompt/core/random.hpp"
#include "incprompt/core/tape.hpp"
#include "incprompt/data.hpp"
#include "incprompt/key_learner.hpp"
#include "incprompt/prompter.hpp"
#include "incprompt/trainer.hpp"
