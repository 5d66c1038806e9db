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

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trsr/domain.hpp"
#include "trsr/gateway.hpp"
#include "trsr/textize.hpp"

namespace trsr {

enum class Paradigm { kHierarchical, kRecurrent };

std::string_view to_string(Paradigm paradigm);
Paradigm parse_paradigm(std::string_view s);

// Prompt templates for the three summarizer calls. block_template takes
// {BLOCK_TEXT}; merge_template takes {SUMMARIES}; update_template takes
// {PREV_SUMMARY} and {BLOCK_TEXT}.
struct SummaryTemplateSet {
  std::string flavor;  // shopping, news or custom
  std::string block_template;
  std::string merge_template;
  std::string update_template;

  void validate() const;
  static SummaryTemplateSet from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

// One backend call. Hierarchical calls are numbered by layer (0 = blocks);
// recurrent calls by step. Inputs name blocks as "block:<i>" and earlier
// calls by node id.
struct TraceCall {
  std::size_t layer = 0;
  std::size_t group = 0;
  std::string node_id;
  std::vector<std::string> inputs;
  std::string request_tag;
  bool truncated = false;

  bool operator==(const TraceCall&) const = default;
};

struct SummaryTrace {
  Paradigm paradigm = Paradigm::kHierarchical;
  std::size_t fan_in = 0;  // hierarchical only
  std::vector<TraceCall> calls;
  std::vector<std::string> warnings;

  std::size_t layer_count() const;
  nlohmann::json to_json() const;
  static SummaryTrace from_json(const nlohmann::json& j);

  bool operator==(const SummaryTrace&) const = default;
};

struct Summary {
  std::string text;
  SummaryTrace trace;

  bool operator==(const Summary&) const = default;
};

struct SummarizeOptions {
  std::size_t summary_max_tokens = 256;
  double temperature = 0.0;
  // Hierarchical merge width; 0 merges a whole layer at once when it fits the
  // context and falls back to groups of 5 otherwise.
  std::size_t fan_in = 0;
  // Concurrent calls within one layer.
  std::size_t parallelism = 1;
  std::string tag_prefix;
};

inline constexpr std::size_t kFallbackFanIn = 5;

// Carries where in the orchestration a call failed.
class SummarizeError : public std::runtime_error {
 public:
  SummarizeError(const std::string& what, std::optional<GatewayError::Kind> kind)
      : std::runtime_error(what), kind_(kind) {}
  std::optional<GatewayError::Kind> gateway_kind() const { return kind_; }

 private:
  std::optional<GatewayError::Kind> kind_;
};

Summary summarize_block(const Block& block, const SummaryTemplateSet& templates,
                        Backend& backend, const SummarizeOptions& options = {});

// Layer 0 summarizes every block. Each later layer groups the previous
// layer's summaries left to right into runs of at most fan_in; runs of two or
// more are merged with one call, singletons pass through untouched. Stops
// when one summary remains.
Summary summarize_hierarchical(std::span<const Block> blocks,
                               const SummaryTemplateSet& templates,
                               Backend& backend,
                               const SummarizeOptions& options = {});

// Step 0 summarizes block 0 with the block template; step i updates the
// previous summary with block i.
Summary summarize_recurrent(std::span<const Block> blocks,
                            const SummaryTemplateSet& templates,
                            Backend& backend,
                            const SummarizeOptions& options = {});

Summary summarize(Paradigm paradigm, std::span<const Block> blocks,
                  const SummaryTemplateSet& templates, Backend& backend,
                  const SummarizeOptions& options = {});

// "Summary 1: ...\nSummary 2: ..." as substituted for {SUMMARIES}.
std::string format_summaries(std::span<const std::string> summaries);

// Throw std::logic_error describing the first violation.
void validate_hierarchical_trace(const SummaryTrace& trace,
                                 std::size_t block_count);
void validate_recurrent_trace(const SummaryTrace& trace,
                              std::size_t block_count);

// Identifies the exact history a summary was built from.
std::string sequence_digest(const BehaviorSequence& seq);

struct StoredSummary {
  std::string user_id;
  std::string sequence_digest;
  std::string config_digest;
  Summary summary;

  nlohmann::json to_json() const;
  static StoredSummary from_json(const nlohmann::json& j);
};

// JSONL summary store keyed by (user_id, sequence digest).
class SummaryStore {
 public:
  static SummaryStore load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  void put(StoredSummary record);
  const StoredSummary* find(const std::string& user_id,
                            const std::string& seq_digest) const;
  std::size_t size() const { return records_.size(); }
  const std::vector<StoredSummary>& records() const { return records_; }

  // Throws if any record was produced under a different config digest.
  void require_digest(const std::string& config_digest) const;

 private:
  std::vector<StoredSummary> records_;
  std::map<std::pair<std::string, std::string>, std::size_t> index_;
};

}  // namespace trsr
