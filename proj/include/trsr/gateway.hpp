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

#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "trsr/token_counter.hpp"

namespace trsr {

class GatewayError : public std::runtime_error {
 public:
  enum class Kind {
    kInvalidRequest,
    kOverLength,
    kTransport,
    kTimeout,
    kRateLimited,
    kHttpStatus,
    kMalformedResponse,
    kCapability,
  };

  GatewayError(Kind kind, const std::string& what, int status = 0)
      : std::runtime_error(what), kind_(kind), status_(status) {}

  Kind kind() const { return kind_; }
  int status() const { return status_; }
  // Transport failures, timeouts, 429 and 5xx.
  bool retryable() const;

 private:
  Kind kind_;
  int status_;
};

std::string_view to_string(GatewayError::Kind kind);

struct CompletionRequest {
  std::string prompt;
  std::size_t max_new_tokens = 256;
  double temperature = 0.0;
  std::vector<std::string> stop;
  std::string request_tag;  // provenance only; never part of the cache key

  void validate() const;
  // Everything that determines the response.
  nlohmann::json payload() const;
};

enum class FinishReason { kStop, kLength, kError };

std::string_view to_string(FinishReason reason);
FinishReason parse_finish_reason(std::string_view s);

struct Usage {
  std::size_t prompt_tokens = 0;
  std::size_t completion_tokens = 0;

  bool operator==(const Usage&) const = default;
};

struct Completion {
  std::string text;
  FinishReason finish_reason = FinishReason::kStop;
  Usage usage;

  nlohmann::json to_json() const;
  static Completion from_json(const nlohmann::json& j);

  bool operator==(const Completion&) const = default;
};

struct TokenScoreRequest {
  std::string prompt;
  std::vector<std::string> candidates;  // e.g. {"Yes.", "No."}
  std::string request_tag;

  // Candidates non-empty, each with a leading token, pairwise distinct after
  // answer normalization.
  void validate() const;
  nlohmann::json payload() const;
};

// Candidate surface form -> probability of the next token matching the
// candidate's leading token.
using TokenScores = std::map<std::string, double>;

// Folds an answer or token to its matching key: leading whitespace and
// tokenizer word markers dropped, ASCII lower-cased, cut at the first
// character that is not a letter or digit. " Yes." and "yes" share "yes".
std::string answer_key(std::string_view text);

// Completion backend. Public entry points validate the request and reject
// prompts that cannot fit the context window before anything is dispatched.
class Backend {
 public:
  explicit Backend(double chars_per_token = 4.0);
  virtual ~Backend() = default;

  Backend(const Backend&) = delete;
  Backend& operator=(const Backend&) = delete;

  virtual std::string model_id() const = 0;
  virtual std::size_t context_limit() const = 0;

  // Exact token count from the backend tokenizer; nullopt when unsupported.
  virtual std::optional<std::size_t> count_tokens(std::string_view text);

  Completion complete(const CompletionRequest& request);
  TokenScores next_token_scores(const TokenScoreRequest& request);

  // Heuristic count used by the pre-dispatch length check.
  std::size_t estimate_tokens(std::string_view text) const;
  bool fits(std::string_view prompt, std::size_t max_new_tokens) const;
  const TokenCounter& length_counter() const { return length_counter_; }

 protected:
  virtual Completion do_complete(const CompletionRequest& request) = 0;
  virtual TokenScores do_next_token_scores(
      const TokenScoreRequest& request) = 0;

 private:
  void check_length(std::string_view prompt, std::size_t max_new_tokens,
                    std::string_view tag) const;

  TokenCounter length_counter_;
};

}  // namespace trsr
