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
#include <chrono>
#include <functional>
#include <memory>
#include <semaphore>
#include <string>

#include <nlohmann/json.hpp>

#include "trsr/gateway.hpp"

namespace trsr {

struct RetryPolicy {
  std::size_t max_attempts = 4;  // total, including the first try
  std::chrono::milliseconds initial_backoff{500};
  double multiplier = 2.0;
  std::chrono::milliseconds max_backoff{8000};

  std::chrono::milliseconds backoff_before(std::size_t attempt) const;
};

struct HttpOptions {
  // Scheme, host, port and optional path prefix, e.g. http://127.0.0.1:8000
  // or http://127.0.0.1:8000/v1. Plain http only.
  std::string base_url;
  std::string model;
  std::string api_key;
  std::size_t context_limit = 2048;
  double chars_per_token = 4.0;
  std::size_t max_in_flight = 4;
  std::chrono::milliseconds timeout{60000};
  RetryPolicy retry;
  int top_logprobs = 20;
};

// OpenAI-compatible completions client (POST /v1/completions). Next-token
// scores come from the top logprobs of a single generated token. Exact token
// counts use the /tokenize endpoint that vLLM and llama.cpp expose.
class HttpBackend : public Backend {
 public:
  explicit HttpBackend(HttpOptions options);
  ~HttpBackend() override;

  std::string model_id() const override { return options_.model; }
  std::size_t context_limit() const override { return options_.context_limit; }
  std::optional<std::size_t> count_tokens(std::string_view text) override;

  // HTTP attempts made so far, retries included.
  std::size_t attempts() const { return attempts_; }

  // Replaces the sleep between retries (tests).
  void set_sleeper(std::function<void(std::chrono::milliseconds)> sleeper);

 protected:
  Completion do_complete(const CompletionRequest& request) override;
  TokenScores do_next_token_scores(const TokenScoreRequest& request) override;

 private:
  nlohmann::json post_json(const std::string& path, const nlohmann::json& body,
                           std::string_view tag);

  HttpOptions options_;
  std::string scheme_host_port_;
  std::string completions_path_;
  std::string tokenize_path_;
  std::counting_semaphore<> in_flight_;
  std::atomic<std::size_t> attempts_{0};
  std::atomic<int> tokenize_state_{0};  // 0 unknown, 1 supported, -1 absent
  std::function<void(std::chrono::milliseconds)> sleeper_;
};

}  // namespace trsr
