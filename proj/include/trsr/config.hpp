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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trsr/domain.hpp"
#include "trsr/http_backend.hpp"
#include "trsr/recommend.hpp"
#include "trsr/summarize.hpp"

namespace trsr {

// Every problem found while loading a config, reported together.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

struct BackendConfig {
  std::string kind = "mock";  // mock | http
  std::string base_url;
  std::string model = "mock";
  std::size_t context_limit = 2048;
  std::size_t max_in_flight = 4;
  std::size_t timeout_ms = 60000;
  std::string api_key_env = "OPENAI_API_KEY";
  int top_logprobs = 20;
  RetryPolicy retry;
};

// Declarative pipeline settings. Defaults follow the published setup: blocks
// of 5 items within 2048 tokens, 3 recent items in the recommendation prompt,
// 1 negative per training positive and 20 per evaluation positive, K in
// {3, 5, 10}, histories of 10 to 25 interactions.
struct PipelineConfig {
  struct Dataset {
    std::filesystem::path path;
    SourceFormat format = SourceFormat::kJsonl;
    LengthFilter length_filter;
    bool resplit = false;
    SplitCounts split_counts;
  } dataset;

  struct Textize {
    double chars_per_token = 4.0;
    std::size_t block_item_limit = 5;
    std::size_t token_budget = 2048;
    TokenCountMode token_mode = TokenCountMode::kHeuristic;
    std::string schema_preset = "auto";  // auto | amazon-m2 | mind | generic
    std::filesystem::path schema_file;
  } textize;

  struct Summarize {
    Paradigm paradigm = Paradigm::kHierarchical;
    std::size_t fan_in = 0;  // 0 = whole layer when it fits, else 5
    std::size_t summary_max_tokens = 256;
    std::string template_preset = "auto";  // auto | shopping | news
    std::filesystem::path template_file;
    double temperature = 0.0;
    std::size_t parallelism = 1;
  } summarize;

  BackendConfig backend;

  struct Recommend {
    std::size_t recent_item_count = 3;
    AnswerVocab answers;
    std::string template_preset = "auto";
    std::filesystem::path template_file;
    BackendConfig backend;  // "backend" with recommend.backend overrides
  } recommend;

  struct Eval {
    std::size_t neg_ratio_train = 1;
    std::size_t neg_ratio_eval = 20;
    std::vector<std::size_t> ks{3, 5, 10};
    std::uint64_t seed = 42;
    Split split = Split::kTest;
    bool allow_partial = false;
    std::size_t parallelism = 1;
  } eval;

  std::filesystem::path output_dir = "runs/default";
  std::filesystem::path cache_dir;  // empty = <output_dir>/cache; "none" disables

  // Fully resolved tree (defaults merged with the file and overrides).
  nlohmann::json tree;

  static nlohmann::json defaults();
  // Merges `user` over the defaults and validates everything at once.
  static PipelineConfig from_json(const nlohmann::json& user);

  // A copy with `path` (dotted, e.g. "recommend.N") set to `value`.
  PipelineConfig with(const std::string& path, const nlohmann::json& value) const;

  std::filesystem::path effective_cache_dir() const;

  // Digests of the settings each artifact depends on.
  std::string corpus_digest() const;
  std::string summary_digest() const;
  std::string run_digest() const;
};

// "section.key=value"; the value is parsed as JSON when it parses, otherwise
// taken as a string.
std::pair<std::string, nlohmann::json> parse_override(const std::string& text);

PipelineConfig load_config(const std::optional<std::filesystem::path>& file,
                           const std::vector<std::string>& overrides);

}  // namespace trsr
