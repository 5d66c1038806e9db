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

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trsr/domain.hpp"
#include "trsr/gateway.hpp"
#include "trsr/summarize.hpp"
#include "trsr/textize.hpp"

namespace trsr {

struct AnswerVocab {
  std::string positive = "Yes.";
  std::string negative = "No.";
};

// The recommendation prompt is five parts in fixed order: instruction,
// preference summary ({SUMMARY}), recent behavior ({RECENT_ITEMS}), candidate
// description ({CANDIDATE}) and, for training records only, the answer.
struct RecPromptConfig {
  std::string instruction;
  std::string summary_section;
  std::string recent_section;
  std::string candidate_section;
  std::size_t recent_item_count = 3;
  AnswerVocab answers;
  RenderSchema schema;
  std::string none_marker = "(none)";

  void validate() const;
  // Reads the four section templates; schema, N and answers are set by the
  // caller.
  static RecPromptConfig from_json(const nlohmann::json& j);
};

struct RecPromptParts {
  std::string instruction;
  std::string preference_summary;
  std::string recent_behavior;
  std::string candidate_description;
  std::optional<std::string> final_answer;
};

struct RecPrompt {
  std::string full_text;
  RecPromptParts parts;
};

// Token accounting for a prompt that does not fit the recommender context.
class PromptTooLong : public std::runtime_error {
 public:
  struct Accounting {
    std::size_t instruction = 0;
    std::size_t preference_summary = 0;
    std::size_t recent_behavior = 0;
    std::size_t candidate_description = 0;
    std::size_t final_answer = 0;
    std::size_t limit = 0;
  };
  PromptTooLong(const std::string& what, Accounting accounting)
      : std::runtime_error(what), accounting_(accounting) {}
  const Accounting& accounting() const { return accounting_; }

 private:
  Accounting accounting_;
};

struct PromptLimit {
  const TokenCounter* counter = nullptr;
  std::size_t context_limit = 2048;
  std::size_t reserved = 1;  // room for the answer token at inference
};

// Recent behavior is the last N items of `seq` (all of them if shorter),
// numbered by their position in the sequence. N = 0 renders the none marker.
// An empty summary is allowed only when N > 0.
RecPrompt build_prompt(std::string_view summary, const BehaviorSequence& seq,
                       const Item& candidate, const RecPromptConfig& config,
                       std::optional<int> answer = std::nullopt,
                       const std::optional<PromptLimit>& limit = std::nullopt);

// Unscored candidates carry NaN probabilities.
struct ScoredCandidate {
  Item candidate;
  double p_yes = std::numeric_limits<double>::quiet_NaN();
  double p_no = std::numeric_limits<double>::quiet_NaN();
  double p = std::numeric_limits<double>::quiet_NaN();

  bool scored() const { return !std::isnan(p); }
};

// Softmax over the two answer probabilities themselves (not over logits):
// exp(p_yes) / (exp(p_yes) + exp(p_no)), i.e. sigmoid(p_yes - p_no). This
// squeezes p into [0.269, 0.731] but orders candidates exactly as
// p_yes - p_no does.
double interaction_probability(double p_yes, double p_no);

ScoredCandidate score(const RecPrompt& prompt, const Item& candidate,
                      Backend& backend, const AnswerVocab& answers,
                      const std::string& request_tag = {});

// Descending p; equal p ordered by ascending item_id.
std::vector<std::size_t> rank_order(std::span<const ScoredCandidate> group);
std::vector<ScoredCandidate> rank(std::vector<ScoredCandidate> group);

struct SftExample {
  std::string prompt_text;  // ends with the answer surface form
  int label = 0;
  std::string user_id;
  std::string group_id;
  std::string candidate_id;
  std::string paradigm;
  std::string config_digest;

  nlohmann::json to_json() const;
  static SftExample from_json(const nlohmann::json& j);
};

// Removes the trailing answer surface form; throws if the prompt does not end
// with the one its label calls for.
std::string strip_answer(const SftExample& example, const AnswerVocab& answers);

class MissingSummaries : public std::runtime_error {
 public:
  explicit MissingSummaries(std::vector<std::string> user_ids);
  const std::vector<std::string>& user_ids() const { return user_ids_; }

 private:
  std::vector<std::string> user_ids_;
};

struct SftExportOptions {
  std::size_t negatives_per_positive = 1;
  std::uint64_t seed = 42;
  std::string paradigm;
  std::string config_digest;
};

struct SftExportStats {
  std::size_t positives = 0;
  std::size_t records = 0;
  std::string digest;  // sha256 of the emitted bytes
};

// For every train-split positive: the positive record followed by the sampled
// negatives, each ending with its answer.
SftExportStats export_sft(const Corpus& corpus, const SummaryStore& summaries,
                          const RecPromptConfig& config,
                          const SftExportOptions& options, std::ostream& out);

}  // namespace trsr
