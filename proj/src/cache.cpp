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

#include "trsr/cache.hpp"

#include <unistd.h>

#include <fstream>
#include <sstream>
#include <system_error>

#include <spdlog/spdlog.h>

#include "trsr/digest.hpp"

namespace trsr {

CachedBackend::CachedBackend(std::shared_ptr<Backend> inner,
                             std::filesystem::path dir)
    : Backend(inner->length_counter().chars_per_token()),
      inner_(std::move(inner)),
      dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec || !std::filesystem::is_directory(dir_)) {
    throw std::runtime_error("cache directory " + dir_.string() +
                             " is not writable: " + ec.message());
  }
  const auto probe = dir_ / (".probe." + std::to_string(::getpid()));
  {
    std::ofstream out(probe);
    if (!out) {
      throw std::runtime_error("cache directory " + dir_.string() +
                               " is not writable");
    }
  }
  std::filesystem::remove(probe, ec);
}

std::string CachedBackend::key_for(const nlohmann::json& request) const {
  return sha256_hex(inner_->model_id() + "\n" + request.dump());
}

std::filesystem::path CachedBackend::path_for(const std::string& key) const {
  return dir_ / key.substr(0, 2) / (key + ".json");
}

std::optional<nlohmann::json> CachedBackend::lookup(
    const std::string& key, const nlohmann::json& request) {
  const auto path = path_for(key);
  std::ifstream in(path);
  if (!in) return std::nullopt;
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    auto entry = nlohmann::json::parse(buf.str());
    if (entry.at("model").get<std::string>() != inner_->model_id() ||
        entry.at("request") != request) {
      throw std::runtime_error("entry does not match its key");
    }
    return entry.at("response");
  } catch (const std::exception& e) {
    ++corrupt_;
    spdlog::warn("cache entry {} is unusable ({}); refetching", path.string(),
                 e.what());
    return std::nullopt;
  }
}

void CachedBackend::store(const std::string& key, const nlohmann::json& request,
                          const nlohmann::json& response) {
  static std::atomic<std::uint64_t> counter{0};
  const auto path = path_for(key);
  std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.parent_path() /
                   (key + ".tmp." + std::to_string(::getpid()) + "." +
                    std::to_string(counter++));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << nlohmann::json{{"model", inner_->model_id()},
                          {"request", request},
                          {"response", response}}
               .dump();
    out.flush();
    if (!out) {
      throw std::runtime_error("cannot write cache entry " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

Completion CachedBackend::do_complete(const CompletionRequest& request) {
  const nlohmann::json keyed = {{"kind", "completion"},
                                {"payload", request.payload()}};
  const auto key = key_for(keyed);
  if (auto hit = lookup(key, keyed)) {
    try {
      auto c = Completion::from_json(*hit);
      ++hits_;
      return c;
    } catch (const nlohmann::json::exception& e) {
      ++corrupt_;
      spdlog::warn("cache entry {} has a bad completion ({}); refetching", key,
                   e.what());
    }
  }
  ++misses_;
  auto c = inner_->complete(request);
  store(key, keyed, c.to_json());
  return c;
}

TokenScores CachedBackend::do_next_token_scores(
    const TokenScoreRequest& request) {
  const nlohmann::json keyed = {{"kind", "next_token_scores"},
                                {"payload", request.payload()}};
  const auto key = key_for(keyed);
  if (auto hit = lookup(key, keyed)) {
    try {
      auto scores = hit->get<TokenScores>();
      ++hits_;
      return scores;
    } catch (const nlohmann::json::exception& e) {
      ++corrupt_;
      spdlog::warn("cache entry {} has bad scores ({}); refetching", key,
                   e.what());
    }
  }
  ++misses_;
  auto scores = inner_->next_token_scores(request);
  store(key, keyed, scores);
  return scores;
}

std::shared_ptr<CachedBackend> with_cache(std::shared_ptr<Backend> backend,
                                          const std::filesystem::path& dir) {
  return std::make_shared<CachedBackend>(std::move(backend), dir);
}

}  // namespace trsr
