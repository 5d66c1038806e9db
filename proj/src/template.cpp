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

#include "trsr/template.hpp"

#include <algorithm>

namespace trsr {

namespace {

bool is_name_start(char c) { return c >= 'A' && c <= 'Z'; }
bool is_name_char(char c) {
  return is_name_start(c) || (c >= '0' && c <= '9') || c == '_';
}

// Length of the placeholder starting at `pos` (including braces), or 0.
std::size_t placeholder_at(std::string_view text, std::size_t pos) {
  if (text[pos] != '{' || pos + 1 >= text.size() ||
      !is_name_start(text[pos + 1])) {
    return 0;
  }
  std::size_t end = pos + 2;
  while (end < text.size() && is_name_char(text[end])) ++end;
  if (end >= text.size() || text[end] != '}') return 0;
  return end - pos + 1;
}

}  // namespace

std::vector<std::string> placeholders_in(std::string_view text) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (auto len = placeholder_at(text, i)) {
      out.emplace_back(text.substr(i + 1, len - 2));
      i += len - 1;
    }
  }
  return out;
}

void validate_template(std::string_view text,
                       const std::vector<std::string>& required,
                       std::string_view template_name) {
  const auto found = placeholders_in(text);
  for (const auto& name : required) {
    const auto n = std::count(found.begin(), found.end(), name);
    if (n != 1) {
      throw TemplateError(std::string(template_name) + " must contain {" +
                          name + "} exactly once (found " +
                          std::to_string(n) + ")");
    }
  }
  for (const auto& name : found) {
    if (std::find(required.begin(), required.end(), name) == required.end()) {
      throw TemplateError(std::string(template_name) +
                          " has unexpected placeholder {" + name + "}");
    }
  }
}

std::string fill_template(std::string_view text,
                          const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (auto len = placeholder_at(text, i)) {
      const std::string name(text.substr(i + 1, len - 2));
      auto it = values.find(name);
      if (it == values.end()) {
        throw TemplateError("no value for placeholder {" + name + "}");
      }
      out += it->second;
      i += len - 1;
    } else {
      out.push_back(text[i]);
    }
  }
  return out;
}

}  // namespace trsr
