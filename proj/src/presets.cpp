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

#include "trsr/presets.hpp"

#include <map>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace trsr {

namespace detail {
const std::map<std::string, std::string_view, std::less<>>& preset_files();
}  // namespace detail

namespace {

nlohmann::json preset_json(const std::string& file) {
  const auto& files = detail::preset_files();
  auto it = files.find(file);
  if (it == files.end()) throw std::invalid_argument("unknown preset " + file);
  return nlohmann::json::parse(it->second);
}

std::vector<std::string> names_with_prefix(std::string_view prefix) {
  std::vector<std::string> out;
  for (const auto& [name, text] : detail::preset_files()) {
    if (name.rfind(prefix, 0) == 0) out.push_back(name.substr(prefix.size()));
  }
  return out;
}

}  // namespace

SummaryTemplateSet summary_preset(std::string_view flavor) {
  return SummaryTemplateSet::from_json(
      preset_json("summarize_" + std::string(flavor)));
}

RecPromptConfig recommend_preset(std::string_view flavor) {
  return RecPromptConfig::from_json(
      preset_json("recommend_" + std::string(flavor)));
}

RenderSchema schema_preset(std::string_view dataset) {
  return RenderSchema::from_json(preset_json("schema_" + std::string(dataset)));
}

std::vector<std::string> summary_preset_names() {
  return names_with_prefix("summarize_");
}

std::vector<std::string> schema_preset_names() {
  return names_with_prefix("schema_");
}

}  // namespace trsr
