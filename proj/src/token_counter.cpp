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

#include "trsr/token_counter.hpp"

#include <cmath>
#include <stdexcept>

#include <spdlog/spdlog.h>

#include "trsr/gateway.hpp"

namespace trsr {

std::size_t utf8_length(std::string_view text) {
  std::size_t n = 0;
  for (unsigned char c : text) {
    if ((c & 0xc0) != 0x80) ++n;
  }
  return n;
}

TokenCounter::TokenCounter(TokenCountMode mode, double chars_per_token,
                           std::shared_ptr<Backend> backend)
    : mode_(mode),
      chars_per_token_(chars_per_token),
      backend_(std::move(backend)),
      warned_(std::make_shared<std::atomic<bool>>(false)) {
  if (!(chars_per_token_ > 0.0) || !std::isfinite(chars_per_token_)) {
    throw std::invalid_argument("chars_per_token must be positive");
  }
}

TokenCounter TokenCounter::heuristic(double chars_per_token) {
  return TokenCounter(TokenCountMode::kHeuristic, chars_per_token, nullptr);
}

TokenCounter TokenCounter::backend_exact(std::shared_ptr<Backend> backend,
                                         double fallback_chars_per_token) {
  if (!backend) throw std::invalid_argument("backend-exact mode needs a backend");
  return TokenCounter(TokenCountMode::kBackendExact, fallback_chars_per_token,
                      std::move(backend));
}

std::size_t TokenCounter::count(std::string_view text) const {
  if (text.empty()) return 0;
  if (mode_ == TokenCountMode::kBackendExact) {
    if (auto n = backend_->count_tokens(text)) return *n;
    if (!warned_->exchange(true)) {
      spdlog::warn(
          "backend {} cannot tokenize; falling back to {} chars per token",
          backend_->model_id(), chars_per_token_);
    }
  }
  // The epsilon keeps exact quotients like 7 / 0.7 from rounding up.
  const double tokens =
      static_cast<double>(utf8_length(text)) / chars_per_token_;
  const auto n = static_cast<std::size_t>(std::ceil(tokens - 1e-9));
  return n == 0 ? 1 : n;
}

}  // namespace trsr
