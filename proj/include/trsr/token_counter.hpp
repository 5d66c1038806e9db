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

#include <atomic>
#include <cstddef>
#include <memory>
#include <string_view>

namespace trsr {

class Backend;

enum class TokenCountMode { kHeuristic, kBackendExact };

// Heuristic mode: ceil(code_points / chars_per_token). Backend-exact mode asks
// the backend's tokenizer and falls back to the heuristic (warning once) when
// the backend cannot tokenize.
class TokenCounter {
 public:
  static TokenCounter heuristic(double chars_per_token = 4.0);
  static TokenCounter backend_exact(std::shared_ptr<Backend> backend,
                                    double fallback_chars_per_token = 4.0);

  std::size_t count(std::string_view text) const;

  TokenCountMode mode() const { return mode_; }
  double chars_per_token() const { return chars_per_token_; }

 private:
  TokenCounter(TokenCountMode mode, double chars_per_token,
               std::shared_ptr<Backend> backend);

  TokenCountMode mode_;
  double chars_per_token_;
  std::shared_ptr<Backend> backend_;
  std::shared_ptr<std::atomic<bool>> warned_;
};

std::size_t utf8_length(std::string_view text);

}  // namespace trsr
