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

#include "trsr/http_backend.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

namespace trsr {

namespace {

using Kind = GatewayError::Kind;

// Holds a slot of the in-flight limit for one HTTP exchange.
class SlotGuard {
 public:
  explicit SlotGuard(std::counting_semaphore<>& sem) : sem_(sem) {
    sem_.acquire();
  }
  ~SlotGuard() { sem_.release(); }
  SlotGuard(const SlotGuard&) = delete;
  SlotGuard& operator=(const SlotGuard&) = delete;

 private:
  std::counting_semaphore<>& sem_;
};

std::chrono::milliseconds retry_after(const httplib::Response& res) {
  if (!res.has_header("Retry-After")) return std::chrono::milliseconds{-1};
  try {
    const double secs = std::stod(res.get_header_value("Retry-After"));
    if (secs >= 0) {
      return std::chrono::milliseconds(static_cast<long long>(secs * 1000));
    }
  } catch (const std::exception&) {
  }
  return std::chrono::milliseconds{-1};
}

const nlohmann::json& first_choice(const nlohmann::json& body) {
  if (!body.is_object() || !body.contains("choices") ||
      !body["choices"].is_array() || body["choices"].empty() ||
      !body["choices"][0].is_object()) {
    throw GatewayError(Kind::kMalformedResponse, "response has no choices");
  }
  return body["choices"][0];
}

}  // namespace

std::chrono::milliseconds RetryPolicy::backoff_before(std::size_t attempt) const {
  // attempt is the 1-based number of the attempt about to be made (>= 2).
  double ms = static_cast<double>(initial_backoff.count()) *
              std::pow(multiplier, static_cast<double>(attempt - 2));
  ms = std::min(ms, static_cast<double>(max_backoff.count()));
  return std::chrono::milliseconds(static_cast<long long>(ms));
}

HttpBackend::HttpBackend(HttpOptions options)
    : Backend(options.chars_per_token),
      options_(std::move(options)),
      in_flight_(static_cast<std::ptrdiff_t>(
          std::max<std::size_t>(1, options_.max_in_flight))),
      sleeper_([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }) {
  const auto& url = options_.base_url;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos || url.substr(0, scheme_end) != "http") {
    throw GatewayError(Kind::kInvalidRequest,
                       "base_url must start with http:// (got \"" + url + "\")");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  scheme_host_port_ = url.substr(0, path_start);
  std::string prefix =
      path_start == std::string::npos ? "" : url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  const bool has_v1 = prefix.size() >= 3 &&
                      prefix.compare(prefix.size() - 3, 3, "/v1") == 0;
  const std::string root = has_v1 ? prefix.substr(0, prefix.size() - 3) : prefix;
  completions_path_ = root + "/v1/completions";
  tokenize_path_ = root + "/tokenize";
  if (options_.retry.max_attempts < 1) options_.retry.max_attempts = 1;
}

HttpBackend::~HttpBackend() = default;

void HttpBackend::set_sleeper(
    std::function<void(std::chrono::milliseconds)> sleeper) {
  sleeper_ = std::move(sleeper);
}

nlohmann::json HttpBackend::post_json(const std::string& path,
                                      const nlohmann::json& body,
                                      std::string_view tag) {
  httplib::Headers headers;
  if (!options_.api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + options_.api_key);
  }
  const auto payload = body.dump();
  const auto timeout = options_.timeout;
  const auto& retry = options_.retry;

  for (std::size_t attempt = 1;; ++attempt) {
    ++attempts_;
    std::chrono::milliseconds wait{-1};
    std::optional<GatewayError> failure;
    {
      SlotGuard slot(in_flight_);
      httplib::Client client(scheme_host_port_);
      client.set_connection_timeout(timeout);
      client.set_read_timeout(timeout);
      client.set_write_timeout(timeout);
      auto res = client.Post(path, headers, payload, "application/json");
      if (!res) {
        const auto err = res.error();
        const bool timed_out =
            err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout;
        failure.emplace(timed_out ? Kind::kTimeout : Kind::kTransport,
                        "POST " + path + ": " + httplib::to_string(err));
      } else if (res->status == 200) {
        try {
          return nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::parse_error& e) {
          throw GatewayError(Kind::kMalformedResponse,
                             "POST " + path + ": response is not JSON: " +
                                 e.what(),
                             res->status);
        }
      } else {
        failure.emplace(
            res->status == 429 ? Kind::kRateLimited : Kind::kHttpStatus,
            "POST " + path + ": HTTP " + std::to_string(res->status),
            res->status);
        wait = retry_after(*res);
      }
    }
    spdlog::info("{} attempt {}/{} failed: {}", tag, attempt,
                 retry.max_attempts, failure->what());
    if (!failure->retryable() || attempt >= retry.max_attempts) throw *failure;
    auto backoff = retry.backoff_before(attempt + 1);
    if (wait.count() >= 0) backoff = std::min(wait, retry.max_backoff);
    sleeper_(backoff);
  }
}

Completion HttpBackend::do_complete(const CompletionRequest& request) {
  nlohmann::json body = {{"model", options_.model},
                         {"prompt", request.prompt},
                         {"max_tokens", request.max_new_tokens},
                         {"temperature", request.temperature}};
  if (!request.stop.empty()) body["stop"] = request.stop;
  const auto res = post_json(completions_path_, body, request.request_tag);
  const auto& choice = first_choice(res);
  if (!choice.contains("text") || !choice["text"].is_string()) {
    throw GatewayError(Kind::kMalformedResponse, "choice has no text");
  }
  Completion c;
  c.text = choice["text"].get<std::string>();
  c.finish_reason = choice.contains("finish_reason") &&
                            choice["finish_reason"].is_string()
                        ? parse_finish_reason(choice["finish_reason"].get<std::string>())
                        : FinishReason::kStop;
  if (res.contains("usage") && res["usage"].is_object()) {
    c.usage.prompt_tokens = res["usage"].value("prompt_tokens", std::size_t{0});
    c.usage.completion_tokens =
        res["usage"].value("completion_tokens", std::size_t{0});
  } else {
    c.usage.prompt_tokens = estimate_tokens(request.prompt);
    c.usage.completion_tokens = estimate_tokens(c.text);
  }
  if (c.finish_reason == FinishReason::kLength) {
    c.usage.completion_tokens = request.max_new_tokens;
  }
  if (c.finish_reason == FinishReason::kStop && c.text.empty()) {
    throw GatewayError(Kind::kMalformedResponse,
                       "backend returned an empty completion");
  }
  return c;
}

TokenScores HttpBackend::do_next_token_scores(const TokenScoreRequest& request) {
  nlohmann::json body = {{"model", options_.model},
                         {"prompt", request.prompt},
                         {"max_tokens", 1},
                         {"temperature", 0.0},
                         {"logprobs", options_.top_logprobs}};
  const auto res = post_json(completions_path_, body, request.request_tag);
  const auto& choice = first_choice(res);
  const auto lp = choice.find("logprobs");
  if (lp == choice.end() || !lp->is_object() || !lp->contains("top_logprobs") ||
      !(*lp)["top_logprobs"].is_array() || (*lp)["top_logprobs"].empty() ||
      !(*lp)["top_logprobs"][0].is_object()) {
    throw GatewayError(Kind::kCapability,
                       "backend " + options_.model + " returned no logprobs");
  }
  std::map<std::string, double> token_logprob;
  for (const auto& [token, value] : (*lp)["top_logprobs"][0].items()) {
    if (!value.is_number()) {
      throw GatewayError(Kind::kMalformedResponse, "non-numeric logprob");
    }
    token_logprob[token] = value.get<double>();
  }
  // The sampled token is not always repeated in top_logprobs.
  if (lp->contains("tokens") && (*lp)["tokens"].is_array() &&
      !(*lp)["tokens"].empty() && lp->contains("token_logprobs") &&
      (*lp)["token_logprobs"].is_array() && !(*lp)["token_logprobs"].empty() &&
      (*lp)["tokens"][0].is_string() && (*lp)["token_logprobs"][0].is_number()) {
    token_logprob.emplace((*lp)["tokens"][0].get<std::string>(),
                          (*lp)["token_logprobs"][0].get<double>());
  }
  TokenScores scores;
  for (const auto& candidate : request.candidates) {
    const auto key = answer_key(candidate);
    double mass = 0.0;
    for (const auto& [token, logprob] : token_logprob) {
      if (answer_key(token) == key) mass += std::exp(logprob);
    }
    scores[candidate] = std::clamp(mass, 0.0, 1.0);
  }
  return scores;
}

std::optional<std::size_t> HttpBackend::count_tokens(std::string_view text) {
  if (tokenize_state_ < 0) return std::nullopt;
  httplib::Client client(scheme_host_port_);
  client.set_connection_timeout(options_.timeout);
  client.set_read_timeout(options_.timeout);
  httplib::Headers headers;
  if (!options_.api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + options_.api_key);
  }
  const nlohmann::json body = {{"model", options_.model},
                               {"prompt", std::string(text)},
                               {"content", std::string(text)}};
  std::optional<httplib::Result> res;
  {
    SlotGuard slot(in_flight_);
    res.emplace(client.Post(tokenize_path_, headers, body.dump(),
                            "application/json"));
  }
  if (!*res) {
    throw GatewayError(Kind::kTransport,
                       "POST " + tokenize_path_ + ": " +
                           httplib::to_string(res->error()));
  }
  const auto status = (*res)->status;
  if (status == 404 || status == 405 || status == 501) {
    tokenize_state_ = -1;
    return std::nullopt;
  }
  if (status != 200) {
    throw GatewayError(Kind::kHttpStatus,
                       "POST " + tokenize_path_ + ": HTTP " +
                           std::to_string(status),
                       status);
  }
  try {
    const auto j = nlohmann::json::parse((*res)->body);
    tokenize_state_ = 1;
    if (j.contains("count")) return j["count"].get<std::size_t>();
    return j.at("tokens").size();
  } catch (const nlohmann::json::exception& e) {
    throw GatewayError(Kind::kMalformedResponse,
                       std::string("tokenize response: ") + e.what());
  }
}

}  // namespace trsr
