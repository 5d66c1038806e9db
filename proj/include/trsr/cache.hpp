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
#include <filesystem>
#include <memory>
#include <optional>

#include <nlohmann/json.hpp>

#include "trsr/gateway.hpp"

namespace trsr {

// Persistent response cache in front of another backend. Entries live at
// <dir>/<key[0:2]>/<key>.json where key = sha256(model id, request payload);
// each entry stores the request next to the response so a hash collision or
// a damaged file reads as a miss. Writes go to a temp file and are renamed
// into place, so concurrent writers of one key leave a complete entry.
class CachedBackend : public Backend {
 public:
  CachedBackend(std::shared_ptr<Backend> inner, std::filesystem::path dir);

  std::string model_id() const override { return inner_->model_id(); }
  std::size_t context_limit() const override { return inner_->context_limit(); }
  std::optional<std::size_t> count_tokens(std::string_view text) override {
    return inner_->count_tokens(text);
  }

  std::size_t hits() const { return hits_; }
  std::size_t misses() const { return misses_; }
  std::size_t corrupt_entries() const { return corrupt_; }
  const std::filesystem::path& dir() const { return dir_; }

  std::string key_for(const nlohmann::json& kind_and_payload) const;

 protected:
  Completion do_complete(const CompletionRequest& request) override;
  TokenScores do_next_token_scores(const TokenScoreRequest& request) override;

 private:
  std::filesystem::path path_for(const std::string& key) const;
  std::optional<nlohmann::json> lookup(const std::string& key,
                                       const nlohmann::json& request);
  void store(const std::string& key, const nlohmann::json& request,
             const nlohmann::json& response);

  std::shared_ptr<Backend> inner_;
  std::filesystem::path dir_;
  std::atomic<std::size_t> hits_{0};
  std::atomic<std::size_t> misses_{0};
  std::atomic<std::size_t> corrupt_{0};
};

std::shared_ptr<CachedBackend> with_cache(std::shared_ptr<Backend> backend,
                                          const std::filesystem::path& dir);

}  // namespace trsr
