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
#include <deque>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace trsr::testing {

// Local HTTP server that answers POST /v1/completions from a script of
// canned replies, then from a fallback once the script runs out.
class FakeServer {
 public:
  using Handler =
      std::function<void(const httplib::Request&, httplib::Response&)>;

  FakeServer() {
    server_.Post("/v1/completions",
                 [this](const httplib::Request& req, httplib::Response& res) {
                   Handler h;
                   {
                     std::lock_guard lock(mu_);
                     ++hits_;
                     bodies_.push_back(req.body);
                     if (!script_.empty()) {
                       h = std::move(script_.front());
                       script_.pop_front();
                     } else {
                       h = fallback_;
                     }
                   }
                   const int now = ++active_;
                   int seen = peak_.load();
                   while (now > seen && !peak_.compare_exchange_weak(seen, now)) {
                   }
                   if (h) {
                     h(req, res);
                   } else {
                     res.status = 500;
                   }
                   --active_;
                 });
    server_.Post("/tokenize", [this](const httplib::Request& req,
                                     httplib::Response& res) {
      if (!tokenize_) {
        res.status = 404;
        return;
      }
      const auto j = nlohmann::json::parse(req.body);
      const auto text = j.at("prompt").get<std::string>();
      res.set_content(nlohmann::json{{"count", tokenize_(text)}}.dump(),
                      "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~FakeServer() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  FakeServer(const FakeServer&) = delete;
  FakeServer& operator=(const FakeServer&) = delete;

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

  void push(Handler h) {
    std::lock_guard lock(mu_);
    script_.push_back(std::move(h));
  }
  void set_fallback(Handler h) {
    std::lock_guard lock(mu_);
    fallback_ = std::move(h);
  }
  void set_tokenizer(std::function<std::size_t(const std::string&)> f) {
    tokenize_ = std::move(f);
  }

  int hits() const {
    std::lock_guard lock(mu_);
    return hits_;
  }
  int peak_concurrency() const { return peak_; }
  std::vector<std::string> bodies() const {
    std::lock_guard lock(mu_);
    return bodies_;
  }

  // Canned replies.
  static Handler status(int code, std::string retry_after = {}) {
    return [code, retry_after](const httplib::Request&, httplib::Response& res) {
      res.status = code;
      if (!retry_after.empty()) res.set_header("Retry-After", retry_after);
    };
  }
  static Handler text(std::string body) {
    return [body](const httplib::Request&, httplib::Response& res) {
      res.set_content(body, "application/json");
    };
  }
  static Handler completion(std::string text_out,
                            std::string finish_reason = "stop") {
    return [=](const httplib::Request&, httplib::Response& res) {
      nlohmann::json j = {
          {"choices", {{{"text", text_out}, {"finish_reason", finish_reason}}}},
          {"usage", {{"prompt_tokens", 10}, {"completion_tokens", 3}}}};
      res.set_content(j.dump(), "application/json");
    };
  }
  static Handler logprobs(nlohmann::json top) {
    return [top](const httplib::Request&, httplib::Response& res) {
      nlohmann::json j = {
          {"choices",
           {{{"text", " Yes"},
             {"finish_reason", "length"},
             {"logprobs", {{"top_logprobs", nlohmann::json::array({top})}}}}}}};
      res.set_content(j.dump(), "application/json");
    };
  }
  static Handler delayed(std::chrono::milliseconds delay, Handler then) {
    return [delay, then](const httplib::Request& req, httplib::Response& res) {
      std::this_thread::sleep_for(delay);
      then(req, res);
    };
  }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  mutable std::mutex mu_;
  std::deque<Handler> script_;
  Handler fallback_;
  std::function<std::size_t(const std::string&)> tokenize_;
  int hits_ = 0;
  std::vector<std::string> bodies_;
  std::atomic<int> active_{0};
  std::atomic<int> peak_{0};
};

}  // namespace trsr::testing
