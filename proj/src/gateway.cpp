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

#include "trsr/gateway.hpp"

#include <cmath>
#include <set>

namespace trsr {

bool GatewayError::retryable() const {
  switch (kind_) {
    case Kind::kTransport:
    case Kind::kTimeout:
    case Kind::kRateLimited:
      return true;
    case Kind::kHttpStatus:
      return status_ >= 500;
    default:
      return false;
  }
}

std::string_view to_string(GatewayError::Kind kind) {
  using K = GatewayError::Kind;
  switch (kind) {
    case K::kInvalidRequest:
      return "invalid-request";
    case K::kOverLength:
      return "over-length";
    case K::kTransport:
      return "transport";
    case K::kTimeout:
      return "timeout";
    case K::kRateLimited:
      return "rate-limited";
    case K::kHttpStatus:
      return "http-status";
    case K::kMalformedResponse:
      return "malformed-response";
    case K::kCapability:
      return "capability";
  }
  return "unknown";
}

void CompletionRequest::validate() const {
  if (max_new_tokens < 1) {
    throw GatewayError(GatewayError::Kind::kInvalidRequest,
                       "max_new_tokens must be at least 1");
  }
  if (!(temperature >= 0.0) || !std::isfinite(temperature)) {
    throw GatewayError(GatewayError::Kind::kInvalidRequest,
                       "temperature must be a non-negative number");
  }
}

nlohmann::json CompletionRequest::payload() const {
  return {{"prompt", prompt},
          {"max_new_tokens", max_new_tokens},
          {"temperature", temperature},
          {"stop", stop}};
}

std::string_view to_string(FinishReason reason) {
  switch (reason) {
    case FinishReason::kStop:
      return "stop";
    case FinishReason::kLength:
      return "length";
    case FinishReason::kError:
      return "error";
  }
  return "error";
}

FinishReason parse_finish_reason(std::string_view s) {
  if (s == "length") return FinishReason::kLength;
  if (s == "error") return FinishReason::kError;
  // Servers also report "eos", "stop_sequence" and friends for a normal end.
  return FinishReason::kStop;
}

nlohmann::json Completion::to_json() const {
  return {{"text", text},
          {"finish_reason", std::string(to_string(finish_reason))},
          {"usage",
           {{"prompt_tokens", usage.prompt_tokens},
            {"completion_tokens", usage.completion_tokens}}}};
}

Completion Completion::from_json(const nlohmann::json& j) {
  Completion c;
  c.text = j.at("text").get<std::string>();
  c.finish_reason =
      parse_finish_reason(j.at("finish_reason").get<std::string>());
  c.usage.prompt_tokens = j.at("usage").at("prompt_tokens").get<std::size_t>();
  c.usage.completion_tokens =
      j.at("usage").at("completion_tokens").get<std::size_t>();
  return c;
}

std::string answer_key(std::string_view text) {
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      ++i;
    } else if (text.substr(i, 3) == "\xe2\x96\x81") {  // sentencepiece
      i += 3;
    } else if (text.substr(i, 2) == "\xc4\xa0") {  // byte-level BPE
      i += 2;
    } else {
      break;
    }
  }
  std::string key;
  for (; i < text.size(); ++i) {
    char c = text[i];
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    const bool word = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') ||
                      static_cast<unsigned char>(c) >= 0x80;
    if (!word) break;
    key.push_back(c);
  }
  return key;
}

void TokenScoreRequest::validate() const {
  if (candidates.empty()) {
    throw GatewayError(GatewayError::Kind::kInvalidRequest,
                       "token score request needs at least one candidate");
  }
  std::set<std::string> keys;
  for (const auto& c : candidates) {
    const auto key = answer_key(c);
    if (key.empty()) {
      throw GatewayError(GatewayError::Kind::kInvalidRequest,
                         "candidate \"" + c + "\" has no leading token");
    }
    if (!keys.insert(key).second) {
      throw GatewayError(GatewayError::Kind::kInvalidRequest,
                         "duplicate candidates: \"" + c + "\"");
    }
  }
}

nlohmann::json TokenScoreRequest::payload() const {
  return {{"prompt", prompt}, {"candidates", candidates}};
}

Backend::Backend(double chars_per_token)
    : length_counter_(TokenCounter::heuristic(chars_per_token)) {}

std::optional<std::size_t> Backend::count_tokens(std::string_view) {
  return std::nullopt;
}

std::size_t Backend::estimate_tokens(std::string_view text) const {
  return length_counter_.count(text);
}

bool Backend::fits(std::string_view prompt, std::size_t max_new_tokens) const {
  return estimate_tokens(prompt) + max_new_tokens <= context_limit();
}

void Backend::check_length(std::string_view prompt, std::size_t max_new_tokens,
                           std::string_view tag) const {
  const auto prompt_tokens = estimate_tokens(prompt);
  if (prompt_tokens + max_new_tokens > context_limit()) {
    throw GatewayError(
        GatewayError::Kind::kOverLength,
        "request " + std::string(tag) + " needs " +
            std::to_string(prompt_tokens) + " prompt tokens + " +
            std::to_string(max_new_tokens) + " new tokens, over the " +
            std::to_string(context_limit()) + "-token context of " +
            model_id());
  }
}

Completion Backend::complete(const CompletionRequest& request) {
  request.validate();
  check_length(request.prompt, request.max_new_tokens, request.request_tag);
  return do_complete(request);
}

TokenScores Backend::next_token_scores(const TokenScoreRequest& request) {
  request.validate();
  check_length(request.prompt, 1, request.request_tag);
  return do_next_token_scores(request);
}

}  // namespace trsr
