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

#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace trsr {

class TemplateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Placeholders are {NAME} with NAME in [A-Z][A-Z0-9_]*. Anything else in
// braces is literal text.
std::vector<std::string> placeholders_in(std::string_view text);

// Requires each of `required` exactly once and nothing else.
void validate_template(std::string_view text,
                       const std::vector<std::string>& required,
                       std::string_view template_name);

// Single pass: substituted values are never rescanned. Throws on a placeholder
// without a value.
std::string fill_template(std::string_view text,
                          const std::map<std::string, std::string>& values);

}  // namespace trsr
