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
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "trsr/gateway.hpp"

namespace trsr {

struct MockOptions {
  std::string model = "mock";
  std::size_t context_limit = 2048;
  double chars_per_token = 4.0;
  // When set, count_tokens answers with the heuristic count, standing in for
  // a server that exposes its tokenizer.
  bool tokenizer = false;
};

// Deterministic offline backend that reads the tagged regions of a prompt.
//
// complete(): takes the first sentence of each item's first non-empty
// attribute value inside <items>...</items> and emits
//   "Interests: <lead>; <lead>; ..."
// followed by the text of every <summary>...</summary> region ("Summary N: "
// prefixes dropped), then truncates to max_new_tokens heuristic tokens.
//
// next_token_scores(): J is the Jaccard overlap between the word set of the
// <candidate> values and the word set of the <summary> regions (or of the
// <items> regions when the prompt has no summary). Pr(yes) = 0.1 + 0.8 J and
// Pr(no) = 1 - Pr(yes); other answers score 0.
class MockBackend : public Backend {
 public:
  explicit MockBackend(MockOptions options = {});

  std::string model_id() const override { return options_.model; }
  std::size_t context_limit() const override { return options_.context_limit; }
  std::optional<std::size_t> count_tokens(std::string_view text) override;

  std::size_t completion_calls() const { return completion_calls_; }
  std::size_t score_calls() const { return score_calls_; }
  std::size_t total_calls() const { return completion_calls_ + score_calls_; }

 protected:
  Completion do_complete(const CompletionRequest& request) override;
  TokenScores do_next_token_scores(const TokenScoreRequest& request) override;

 private:
  MockOptions options_;
  std::atomic<std::size_t> completion_calls_{0};
  std::atomic<std::size_t> score_calls_{0};
};

namespace mock_rules {

// Text between every <tag> and its matching </tag>, in prompt order.
std::vector<std::string_view> regions(std::string_view prompt,
                                      std::string_view tag);
// Lead sentence of each rendered item in an <items> region.
std::vector<std::string> item_leads(std::string_view region);
// All attribute values of the rendered items in a region, "Label:" stripped.
std::vector<std::string> item_values(std::string_view region);
std::string first_sentence(std::string_view text);
std::set<std::string> words(std::string_view text);
double jaccard(const std::set<std::string>& a, const std::set<std::string>& b);

}  // namespace mock_rules

}  // namespace trsr
