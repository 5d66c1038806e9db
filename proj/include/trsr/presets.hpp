/*
 * Copyright 2026 The TRSR Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "trsr/recommend.hpp"
#include "trsr/summarize.hpp"
#include "trsr/textize.hpp"

namespace trsr {

// Built-in presets are the JSON files under presets/, compiled in. Custom
// files with the same layout can be supplied through the pipeline config.

// "shopping" or "news".
SummaryTemplateSet summary_preset(std::string_view flavor);
// "shopping" or "news". The schema, N and answers are left at defaults.
RecPromptConfig recommend_preset(std::string_view flavor);
// "amazon-m2" or "mind".
RenderSchema schema_preset(std::string_view dataset);

std::vector<std::string> summary_preset_names();
std::vector<std::string> schema_preset_names();

}  // namespace trsr
